//! Channel datasets: generation from a scene, the `CHDS` binary format and
//! CSV interchange.
//!
//! Binary layout (little-endian): magic `CHDS`, `u16` version, `f64`
//! frequency (Hz), `f64` extent side (m), `u32` kind, `u64` sample count,
//! then `(x, y, h_re, h_im)` as four `f64` per sample, then the CRC32 of all
//! preceding bytes.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binio::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::par;
use crate::scene::{Extent, Point, Scene};

pub const DATASET_MAGIC: &[u8; 4] = b"CHDS";
pub const DATASET_VERSION: u16 = 1;
pub const DEFAULT_GRID_CAP: u64 = 10_000_000;
pub const CSV_HEADER: [&str; 4] = ["x_m", "y_m", "h_re", "h_im"];

const MAX_RESAMPLES: usize = 100;
const GRID_TOLERANCE_M: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Train,
    TestGrid,
    Imported,
}

impl DatasetKind {
    pub fn tag(self) -> u32 {
        match self {
            DatasetKind::Train => 0,
            DatasetKind::TestGrid => 1,
            DatasetKind::Imported => 2,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(DatasetKind::Train),
            1 => Some(DatasetKind::TestGrid),
            2 => Some(DatasetKind::Imported),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Train => "train",
            DatasetKind::TestGrid => "test-grid",
            DatasetKind::Imported => "imported",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSample {
    pub x: Point,
    pub h: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDataset {
    pub kind: DatasetKind,
    pub frequency_hz: f64,
    pub extent_m: f64,
    pub samples: Vec<ChannelSample>,
}

impl ChannelDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn locations(&self) -> Vec<Point> {
        self.samples.iter().map(|s| s.x).collect()
    }

    pub fn channels(&self) -> Vec<Complex64> {
        self.samples.iter().map(|s| s.h).collect()
    }

    pub fn wavelength(&self) -> f64 {
        crate::scene::SPEED_OF_LIGHT / self.frequency_hz
    }

    /// Spacing of the uniform grid the locations form, if they form one
    /// (positions checked to 1e-9 m).
    pub fn grid_spacing(&self) -> Option<f64> {
        let mut xs: Vec<f64> = self.samples.iter().map(|s| s.x.x).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() <= GRID_TOLERANCE_M);
        let mut ys: Vec<f64> = self.samples.iter().map(|s| s.x.y).collect();
        ys.sort_by(f64::total_cmp);
        ys.dedup_by(|a, b| (*a - *b).abs() <= GRID_TOLERANCE_M);
        if xs.len() < 2 || xs.len() != ys.len() || xs.len() * ys.len() != self.samples.len() {
            return None;
        }
        let spacing = xs[1] - xs[0];
        let origin = Point::new(xs[0], ys[0]);
        let on_grid = |v: f64, o: f64| {
            let steps = ((v - o) / spacing).round();
            (o + steps * spacing - v).abs() <= GRID_TOLERANCE_M
        };
        let uniform = xs.iter().enumerate().all(|(i, &x)| (origin.x + i as f64 * spacing - x).abs() <= GRID_TOLERANCE_M)
            && ys.iter().enumerate().all(|(j, &y)| (origin.y + j as f64 * spacing - y).abs() <= GRID_TOLERANCE_M)
            && self.samples.iter().all(|s| on_grid(s.x.x, origin.x) && on_grid(s.x.y, origin.y));
        uniform.then_some(spacing)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.bytes(DATASET_MAGIC);
        enc.u16(DATASET_VERSION);
        enc.f64(self.frequency_hz);
        enc.f64(self.extent_m);
        enc.u32(self.kind.tag());
        enc.u64(self.samples.len() as u64);
        for s in &self.samples {
            enc.f64(s.x.x);
            enc.f64(s.x.y);
            enc.f64(s.h.re);
            enc.f64(s.h.im);
        }
        enc.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes);
        dec.magic(DATASET_MAGIC)?;
        let version = dec.u16("version")?;
        if version != DATASET_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let frequency_hz = dec.f64("frequency")?;
        let extent_m = dec.f64("extent")?;
        let tag = dec.u32("kind")?;
        let kind = DatasetKind::from_tag(tag).ok_or_else(|| Error::Format(format!("unknown dataset kind {tag}")))?;
        let count = dec.u64("sample count")?;
        dec.require(count as u128 * 32 + 4, "samples")?;
        let mut samples = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let x = Point::new(dec.f64("x")?, dec.f64("y")?);
            let h = Complex64::new(dec.f64("h_re")?, dec.f64("h_im")?);
            samples.push(ChannelSample { x, h });
        }
        dec.finish()?;
        if samples.is_empty() {
            return Err(Error::Format("dataset holds no samples".into()));
        }
        Ok(ChannelDataset {
            kind,
            frequency_hz,
            extent_m,
            samples,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        ChannelDataset::decode(&bytes)
    }

    /// Writes `x_m,y_m,h_re,h_im` rows with shortest round-trip floats.
    pub fn export_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "{}", CSV_HEADER.join(","))?;
            for s in &self.samples {
                writeln!(out, "{:?},{:?},{:?},{:?}", s.x.x, s.x.y, s.h.re, s.h.im)?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

fn evaluate(scene: &Scene, points: Vec<Point>, kind: DatasetKind) -> Result<ChannelDataset> {
    let values = par::map_indexed(points.len(), |i| scene.channel_coefficient(points[i]));
    let samples = points
        .into_iter()
        .zip(values)
        .map(|(x, h)| Ok(ChannelSample { x, h: h? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelDataset {
        kind,
        frequency_hz: scene.frequency_hz(),
        extent_m: scene.extent().side,
        samples,
    })
}

/// `count` i.i.d. uniform locations over the scene extent.
pub fn generate_training_set(scene: &Scene, count: usize, seed: u64) -> Result<ChannelDataset> {
    if count < 1 {
        return Err(Error::BadConfig("training set needs at least one sample".into()));
    }
    let extent = scene.extent();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let mut accepted = None;
        for _ in 0..=MAX_RESAMPLES {
            let p = extent.origin + Point::new(rng.gen::<f64>() * extent.side, rng.gen::<f64>() * extent.side);
            if scene.channel_coefficient(p).is_ok() {
                accepted = Some(p);
                break;
            }
        }
        points.push(accepted.ok_or(Error::SamplingFailed { retries: MAX_RESAMPLES })?);
    }
    evaluate(scene, points, DatasetKind::Train)
}

/// Number of grid points per axis for `side` at `spacing`, endpoints included.
pub fn grid_points_per_axis(side: f64, spacing: f64) -> u64 {
    (side / spacing + 1e-9).floor() as u64 + 1
}

/// Origin-anchored grid points `origin + (i·spacing, j·spacing)` within `zone`,
/// `y` outer and `x` inner.
pub fn grid_points(zone: Extent, spacing: f64, cap: u64) -> Result<Vec<Point>> {
    if !(spacing.is_finite() && spacing > 0.0) || !(zone.side >= 0.0) {
        return Err(Error::BadConfig(format!(
            "grid spacing {spacing} must be positive and zone side {} non-negative",
            zone.side
        )));
    }
    let n = grid_points_per_axis(zone.side, spacing);
    let total = n.saturating_mul(n);
    if total > cap {
        return Err(Error::GridTooLarge { points: total, cap });
    }
    let mut points = Vec::with_capacity(total as usize);
    for j in 0..n {
        for i in 0..n {
            points.push(zone.origin + Point::new(i as f64 * spacing, j as f64 * spacing));
        }
    }
    Ok(points)
}

pub fn generate_test_grid(scene: &Scene, spacing: f64) -> Result<ChannelDataset> {
    generate_test_grid_capped(scene, spacing, DEFAULT_GRID_CAP)
}

pub fn generate_test_grid_capped(scene: &Scene, spacing: f64, cap: u64) -> Result<ChannelDataset> {
    if !(spacing > 0.0 && spacing <= scene.extent().side) {
        return Err(Error::BadConfig(format!(
            "grid spacing {spacing} must lie in (0, {}]",
            scene.extent().side
        )));
    }
    let points = grid_points(scene.extent(), spacing, cap)?;
    evaluate(scene, points, DatasetKind::TestGrid)
}

/// Reads externally produced channels from a `x_m,y_m,h_re,h_im` CSV.
pub fn import_csv(path: impl AsRef<Path>, frequency_hz: f64, extent: Extent) -> Result<ChannelDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    if headers.iter().map(str::trim).ne(CSV_HEADER) {
        return Err(Error::Parse {
            line: 1,
            column: "header".into(),
            message: format!("expected {}, found {}", CSV_HEADER.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut samples = Vec::new();
    let mut outside = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let mut v = [0.0; 4];
        for (slot, (field, name)) in v.iter_mut().zip(record.iter().zip(CSV_HEADER)) {
            let parsed: f64 = field.trim().parse().map_err(|e: std::num::ParseFloatError| Error::Parse {
                line,
                column: name.into(),
                message: e.to_string(),
            })?;
            if !parsed.is_finite() {
                return Err(Error::Parse {
                    line,
                    column: name.into(),
                    message: format!("non-finite value {field:?}"),
                });
            }
            *slot = parsed;
        }
        let x = Point::new(v[0], v[1]);
        if !extent.contains(x) {
            outside.push(line);
        }
        samples.push(ChannelSample {
            x,
            h: Complex64::new(v[2], v[3]),
        });
    }
    if samples.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    if !outside.is_empty() {
        return Err(Error::OutOfExtent { lines: outside });
    }
    Ok(ChannelDataset {
        kind: DatasetKind::Imported,
        frequency_hz,
        extent_m: extent.side,
        samples,
    })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            line,
            column: "row".into(),
            message: format!("expected {expected_len} fields, found {len}"),
        },
        other => Error::Parse {
            line,
            column: "row".into(),
            message: format!("{other:?}"),
        },
    }
}
