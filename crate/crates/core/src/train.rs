//! Training, evaluation, the path-count/density sweep and heatmap export.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{adam_step, make_circle_bank, AdamState, CircleSampling};
use crate::dataset::{
    generate_test_grid, generate_training_set, grid_points, ChannelDataset, DatasetKind, DEFAULT_GRID_CAP,
};
use crate::error::{Error, Result};
use crate::models::{build_model, Model, ModelKind, ModelSpec};
use crate::par;
use crate::scene::{sample_random_scene, Extent, Point, Scene, SceneConfig};

/// Serialized stand-in for an NMSE of −∞ (exact prediction).
pub const NMSE_EXACT_SENTINEL: f64 = -999.0;

pub const SWEEP_CSV_HEADER: &str = "model,lp,density_locs_per_lambda2,seed,nmse_db,param_count,wall_time_s";
pub const HEATMAP_CSV_HEADER: &str = "x_m,y_m,h_re,h_im,hhat_re,hhat_im";

/// Mean squared modulus `mean |pred − target|²`.
pub fn l2_loss(pred: &[Complex64], target: &[Complex64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "l2_loss needs equal non-empty lengths, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t).norm_sqr()).sum();
    Ok(sum / pred.len() as f64)
}

/// `10 log10(Σ|h − ĥ|² / Σ|h|²)`; `-inf` when the prediction is exact.
pub fn nmse_db(pred: &[Complex64], target: &[Complex64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "nmse_db needs equal lengths, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let signal: f64 = target.iter().map(|t| t.norm_sqr()).sum();
    if signal == 0.0 {
        return Err(Error::ZeroReference);
    }
    let error: f64 = pred.iter().zip(target).map(|(p, t)| (p - t).norm_sqr()).sum();
    Ok(10.0 * (error / signal).log10())
}

/// Maps `-inf` to [`NMSE_EXACT_SENTINEL`] for tabular output.
pub fn nmse_for_output(nmse: f64) -> f64 {
    if nmse == f64::NEG_INFINITY {
        NMSE_EXACT_SENTINEL
    } else {
        nmse
    }
}

/// SplitMix64 finaliser over `master` and a stream index.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStop {
    pub patience: usize,
    pub min_delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub rng_seed: u64,
    pub early_stop: Option<EarlyStop>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 600,
            batch_size: 64,
            lr: 1e-3,
            rng_seed: 0,
            early_stop: None,
        }
    }
}

impl TrainConfig {
    /// `lr = 0` is accepted and leaves parameters unchanged.
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::BadConfig("epochs must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::BadConfig("batch_size must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::BadConfig(format!("lr must be finite and non-negative, got {}", self.lr)));
        }
        if let Some(es) = self.early_stop {
            if es.patience < 1 || !(es.min_delta >= 0.0) {
                return Err(Error::BadConfig("early_stop needs patience >= 1 and min_delta >= 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// NMSE over the set the report refers to (training set for [`train`]).
    pub nmse_db: f64,
    pub param_count: usize,
    pub loss_history: Vec<f64>,
    pub wall_time_s: f64,
}

pub fn predict(model: &Model, points: &[Point]) -> Result<Vec<Complex64>> {
    model.forward_batch(points)
}

/// NMSE of `model` over every sample of `ds`.
pub fn evaluate(model: &Model, ds: &ChannelDataset) -> Result<f64> {
    let pred = predict(model, &ds.locations())?;
    nmse_db(&pred, &ds.channels())
}

pub fn train(model: Model, ds: &ChannelDataset, cfg: &TrainConfig) -> Result<(Model, EvalReport)> {
    train_with_progress(model, ds, cfg, |_, _, _| {})
}

/// [`train`] with a callback receiving `(epoch, mean loss, model)` after
/// each epoch.
pub fn train_with_progress(
    mut model: Model,
    ds: &ChannelDataset,
    cfg: &TrainConfig,
    mut progress: impl FnMut(usize, f64, &Model),
) -> Result<(Model, EvalReport)> {
    cfg.validate()?;
    if !matches!(ds.kind, DatasetKind::Train | DatasetKind::Imported) {
        return Err(Error::BadConfig(format!("cannot train on a {} dataset", ds.kind.name())));
    }
    if ds.is_empty() {
        return Err(Error::BadConfig("training set is empty".into()));
    }
    let start = Instant::now();
    let points = ds.locations();
    let targets = ds.channels();
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut adam = AdamState::new(cfg.lr);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = f64::INFINITY;
    let mut stale = 0usize;
    let mut batch_x = Vec::with_capacity(cfg.batch_size);
    let mut batch_y = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch_x.clear();
            batch_y.clear();
            batch_x.extend(chunk.iter().map(|&i| points[i]));
            batch_y.extend(chunk.iter().map(|&i| targets[i]));
            let (graph, loss) = model.loss_graph(&batch_x, &batch_y)?;
            let value = graph.value(loss).values()[0].re;
            if !value.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    lr: cfg.lr,
                    loss: value,
                });
            }
            total += value * chunk.len() as f64;
            let params = model.params_mut();
            params.zero_grads();
            graph.backward(loss, params)?;
            adam_step(params, &mut adam)?;
        }
        let mean = total / ds.len() as f64;
        history.push(mean);
        progress(epoch, mean, &model);
        if let Some(es) = cfg.early_stop {
            if mean < best - es.min_delta {
                best = mean;
                stale = 0;
            } else {
                stale += 1;
                if stale >= es.patience {
                    break;
                }
            }
        }
    }

    let pred = predict(&model, &points)?;
    let nmse = nmse_db(&pred, &targets)?;
    let report = EvalReport {
        nmse_db: nmse,
        param_count: model.param_count(),
        loss_history: history,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((model, report))
}

/// Writes `x_m,y_m,h_re,h_im,hhat_re,hhat_im` over the `spacing` grid of
/// `zone`, which must lie inside the scene extent.
pub fn export_heatmap(model: &Model, scene: &Scene, zone: Extent, spacing: f64, path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let ext = scene.extent();
    let tol = 1e-9;
    let inside = zone.origin.x >= ext.origin.x - tol
        && zone.origin.y >= ext.origin.y - tol
        && zone.origin.x + zone.side <= ext.origin.x + ext.side + tol
        && zone.origin.y + zone.side <= ext.origin.y + ext.side + tol;
    if !inside {
        return Err(Error::BadConfig(format!(
            "heatmap zone {:?} + {} m is outside the scene extent",
            zone.origin, zone.side
        )));
    }
    let points = grid_points(zone, spacing, DEFAULT_GRID_CAP)?;
    let truth = par::map_indexed(points.len(), |i| scene.channel_coefficient(points[i]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let pred = predict(model, &points)?;

    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "{HEATMAP_CSV_HEADER}")?;
        for ((p, h), hh) in points.iter().zip(&truth).zip(&pred) {
            writeln!(out, "{:?},{:?},{:?},{:?},{:?},{:?}", p.x, p.y, h.re, h.im, hh.re, hh.im)?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))?;
    Ok(points.len())
}

/// One sweep training run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub model: ModelKind,
    pub lp: usize,
    pub density: f64,
    pub seed: u64,
    /// `None` when the cell failed; see `error`.
    pub nmse_db: Option<f64>,
    pub param_count: usize,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub model: ModelKind,
    pub lp: usize,
    pub density: f64,
    pub mean_db: f64,
    pub std_db: f64,
    pub runs: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub lp_values: Vec<usize>,
    pub densities: Vec<f64>,
    pub n_seeds: usize,
    pub models: Vec<ModelSpec>,
    pub train: TrainConfig,
    pub frequency_hz: f64,
    pub extent_m: f64,
    /// Test grid spacing in wavelengths.
    pub grid_spacing_lambda: f64,
    pub master_seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lp_values.is_empty() || self.densities.is_empty() || self.models.is_empty() {
            return Err(Error::BadConfig("sweep needs non-empty path, density and model lists".into()));
        }
        if self.n_seeds < 1 {
            return Err(Error::BadConfig("sweep needs n_seeds >= 1".into()));
        }
        if self.densities.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::BadConfig("densities must be positive".into()));
        }
        if !(self.grid_spacing_lambda > 0.0) {
            return Err(Error::BadConfig("grid spacing must be positive".into()));
        }
        for m in &self.models {
            m.validate()?;
        }
        self.train.validate()?;
        if !(self.frequency_hz > 0.0 && self.extent_m > 0.0) {
            return Err(Error::BadConfig("frequency and extent must be positive".into()));
        }
        Ok(())
    }
}

/// Training samples for `density` locations per λ² over a square of `side`.
pub fn samples_for_density(density: f64, side: f64, wavelength: f64) -> usize {
    ((density * (side / wavelength).powi(2)).round() as usize).max(1)
}

struct CellContext {
    test: ChannelDataset,
    train: ChannelDataset,
    wavelength: f64,
    model_seed: u64,
    shuffle_seed: u64,
}

fn cell_context(cfg: &SweepConfig, lp: usize, density: f64, seed: u64) -> Result<CellContext> {
    let scene_cfg = SceneConfig::new(lp, Extent::square(cfg.extent_m), cfg.frequency_hz);
    let scene = sample_random_scene(derive_seed(seed, 0), &scene_cfg)?;
    let wavelength = scene.wavelength();
    let count = samples_for_density(density, cfg.extent_m, wavelength);
    let train = generate_training_set(&scene, count, derive_seed(seed, 1))?;
    let test = generate_test_grid(&scene, cfg.grid_spacing_lambda * wavelength)?;
    Ok(CellContext {
        test,
        train,
        wavelength,
        model_seed: derive_seed(seed, 2),
        shuffle_seed: derive_seed(seed, 3),
    })
}

fn run_model(ctx: &CellContext, spec: &ModelSpec, train_cfg: &TrainConfig) -> Result<(f64, usize)> {
    let bank = if spec.kind.uses_bank() {
        Some(make_circle_bank(spec.d, ctx.wavelength, CircleSampling::Equiangular)?)
    } else {
        None
    };
    let model = build_model(spec, bank.as_ref(), ctx.model_seed)?;
    let count = model.param_count();
    let cfg = TrainConfig {
        rng_seed: ctx.shuffle_seed,
        ..*train_cfg
    };
    let (model, _) = train(model, &ctx.train, &cfg)?;
    Ok((evaluate(&model, &ctx.test)?, count))
}

/// Runs every `(L_p, density, seed)` cell for every model; a failing run is
/// recorded in its row and the sweep continues.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepTable> {
    run_sweep_with_progress(cfg, |_| {})
}

pub fn run_sweep_with_progress(cfg: &SweepConfig, mut progress: impl FnMut(&SweepRow)) -> Result<SweepTable> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (li, &lp) in cfg.lp_values.iter().enumerate() {
        for (di, &density) in cfg.densities.iter().enumerate() {
            for s in 0..cfg.n_seeds {
                let cell_seed = derive_seed(cfg.master_seed, ((li as u64) << 40) | ((di as u64) << 20) | s as u64);
                let ctx = cell_context(cfg, lp, density, cell_seed);
                for spec in &cfg.models {
                    let start = Instant::now();
                    let outcome = ctx.as_ref().map_err(|e| e.to_string()).and_then(|ctx| {
                        run_model(ctx, spec, &cfg.train).map_err(|e| e.to_string())
                    });
                    let row = match outcome {
                        Ok((nmse, count)) => SweepRow {
                            model: spec.kind,
                            lp,
                            density,
                            seed: s as u64,
                            nmse_db: Some(nmse),
                            param_count: count,
                            wall_time_s: start.elapsed().as_secs_f64(),
                            error: None,
                        },
                        Err(message) => SweepRow {
                            model: spec.kind,
                            lp,
                            density,
                            seed: s as u64,
                            nmse_db: None,
                            param_count: crate::models::count_parameters(spec),
                            wall_time_s: start.elapsed().as_secs_f64(),
                            error: Some(message),
                        },
                    };
                    progress(&row);
                    rows.push(row);
                }
            }
        }
    }
    Ok(SweepTable { rows })
}

impl SweepTable {
    /// Mean and population standard deviation per `(model, L_p, density)`,
    /// in first-seen order; failed runs are counted but excluded.
    pub fn summary(&self) -> Vec<SweepCell> {
        let mut cells: Vec<(SweepCell, Vec<f64>)> = Vec::new();
        for row in &self.rows {
            let idx = match cells
                .iter()
                .position(|(c, _)| c.model == row.model && c.lp == row.lp && c.density == row.density)
            {
                Some(i) => i,
                None => {
                    cells.push((
                        SweepCell {
                            model: row.model,
                            lp: row.lp,
                            density: row.density,
                            mean_db: f64::NAN,
                            std_db: f64::NAN,
                            runs: 0,
                            failed: 0,
                        },
                        Vec::new(),
                    ));
                    cells.len() - 1
                }
            };
            let (cell, values) = &mut cells[idx];
            match row.nmse_db {
                Some(v) => {
                    cell.runs += 1;
                    values.push(nmse_for_output(v));
                }
                None => cell.failed += 1,
            }
        }
        cells
            .into_iter()
            .map(|(mut cell, values)| {
                if !values.is_empty() {
                    let n = values.len() as f64;
                    let mean = values.iter().sum::<f64>() / n;
                    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    cell.mean_db = mean;
                    cell.std_db = var.sqrt();
                }
                cell
            })
            .collect()
    }

    pub fn cell(&self, model: ModelKind, lp: usize, density: f64) -> Option<SweepCell> {
        self.summary()
            .into_iter()
            .find(|c| c.model == model && c.lp == lp && c.density == density)
    }

    /// One line per run; failed runs carry the −999 sentinel.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(SWEEP_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let nmse = r.nmse_db.map(nmse_for_output).unwrap_or(NMSE_EXACT_SENTINEL);
            s.push_str(&format!(
                "{},{},{:?},{},{:?},{},{:?}\n",
                r.model.name(),
                r.lp,
                r.density,
                r.seed,
                nmse,
                r.param_count,
                r.wall_time_s
            ));
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
