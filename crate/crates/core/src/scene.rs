//! Image-source channel model and its local plane-wave approximation.
//!
//! A [`Scene`] is a carrier frequency plus an ordered list of point sources
//! (the base station and its mirror images). The channel at a location is the
//! coherent sum of spherical waves, each attenuated by `1/d`. Around a
//! reference point every spherical wave is close to a plane wave, which is
//! what the dictionary models exploit.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::ops::{Add, Mul, Sub};
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Locations closer than this to a source are rejected.
pub const SINGULARITY_GUARD_M: f64 = 1e-9;

const DEGENERATE_DENOMINATOR: f64 = 1e-9;
const DEGENERATE_SEPARATION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

/// Axis-aligned square region `[origin, origin + side]²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extent {
    pub origin: Point,
    pub side: f64,
}

impl Extent {
    pub fn new(origin: Point, side: f64) -> Self {
        Extent { origin, side }
    }

    pub fn square(side: f64) -> Self {
        Extent::new(Point::ORIGIN, side)
    }

    pub fn contains(&self, p: Point) -> bool {
        let dx = p.x - self.origin.x;
        let dy = p.y - self.origin.y;
        (0.0..=self.side).contains(&dx) && (0.0..=self.side).contains(&dy)
    }

    pub fn center(&self) -> Point {
        self.origin + Point::new(0.5 * self.side, 0.5 * self.side)
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    /// Euclidean distance from `p` to the square (zero inside).
    pub fn distance_to(&self, p: Point) -> f64 {
        let dx = (self.origin.x - p.x).max(p.x - self.origin.x - self.side).max(0.0);
        let dy = (self.origin.y - p.y).max(p.y - self.origin.y - self.side).max(0.0);
        dx.hypot(dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Source {
    pub location: Point,
    /// Small-scale attenuation, strictly positive.
    pub alpha: f64,
    /// Phase shift in `[0, 2π)`.
    pub beta: f64,
}

impl Source {
    pub fn line_of_sight(location: Point) -> Self {
        Source {
            location,
            alpha: 1.0,
            beta: 0.0,
        }
    }

    fn gain(&self) -> Complex64 {
        Complex64::from_polar(self.alpha, self.beta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    frequency_hz: f64,
    wavelength: f64,
    sources: Vec<Source>,
    extent: Extent,
}

impl Scene {
    pub fn new(frequency_hz: f64, extent: Extent, sources: Vec<Source>) -> Result<Self> {
        if !(frequency_hz.is_finite() && frequency_hz > 0.0) {
            return Err(Error::BadConfig(format!(
                "frequency must be positive, got {frequency_hz}"
            )));
        }
        if !(extent.side.is_finite() && extent.side > 0.0) || !extent.origin.is_finite() {
            return Err(Error::BadConfig(format!(
                "extent side must be positive, got {}",
                extent.side
            )));
        }
        if sources.is_empty() {
            return Err(Error::BadConfig("a scene needs at least one source".into()));
        }
        for (i, s) in sources.iter().enumerate() {
            if !s.location.is_finite() {
                return Err(Error::BadConfig(format!("source {i} has a non-finite location")));
            }
            if !(s.alpha.is_finite() && s.alpha > 0.0) {
                return Err(Error::BadConfig(format!(
                    "source {i}: alpha must be positive, got {}",
                    s.alpha
                )));
            }
            if !(0.0..TAU).contains(&s.beta) {
                return Err(Error::BadConfig(format!(
                    "source {i}: beta must lie in [0, 2π), got {}",
                    s.beta
                )));
            }
        }
        Ok(Scene {
            frequency_hz,
            wavelength: SPEED_OF_LIGHT / frequency_hz,
            sources,
            extent,
        })
    }

    pub fn frequency_hz(&self) -> f64 {
        self.frequency_hz
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn wavenumber(&self) -> f64 {
        TAU / self.wavelength
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    pub fn num_paths(&self) -> usize {
        self.sources.len()
    }

    pub fn extent(&self) -> Extent {
        self.extent
    }

    fn check_regular(&self, x: Point) -> Result<()> {
        for (i, s) in self.sources.iter().enumerate() {
            if x.distance(s.location) <= SINGULARITY_GUARD_M {
                return Err(Error::SingularLocation {
                    location: x,
                    source_index: i,
                    guard: SINGULARITY_GUARD_M,
                });
            }
        }
        Ok(())
    }

    /// Unit-amplitude spherical wave `e^{-j2πd/λ} / d`.
    fn spherical(&self, d: f64) -> Complex64 {
        Complex64::from_polar(1.0 / d, -TAU * d / self.wavelength)
    }

    /// Sum of attenuated spherical waves from every source at `x`.
    pub fn channel_coefficient(&self, x: Point) -> Result<Complex64> {
        self.check_regular(x)?;
        Ok(self
            .sources
            .iter()
            .map(|s| s.gain() * self.spherical(x.distance(s.location)))
            .sum())
    }

    /// Channel at `x` with each spherical wave replaced by its first-order
    /// plane-wave expansion around `x_ref`.
    pub fn planar_approx_channel(&self, x: Point, x_ref: Point) -> Result<Complex64> {
        self.check_regular(x)?;
        self.check_regular(x_ref)?;
        let k = self.wavenumber();
        let mut h = Complex64::new(0.0, 0.0);
        for (i, s) in self.sources.iter().enumerate() {
            let offset = x_ref - s.location;
            let d_ref = offset.norm();
            let u = offset * (1.0 / d_ref);
            let along = u.dot(x - x_ref);
            let denominator = 1.0 + along / d_ref;
            if denominator <= DEGENERATE_DENOMINATOR {
                return Err(Error::DegenerateInterpolation {
                    source_index: i,
                    denominator,
                });
            }
            let plane = Complex64::from_polar(1.0, -k * along);
            h += s.gain() * self.spherical(d_ref) * plane / denominator;
        }
        Ok(h)
    }

    /// Largest radius around `x_ref` within which the plane-wave approximation
    /// stays within `eps` of the exact channel.
    ///
    /// Each candidate radius is probed along `direction_samples` equiangular
    /// rays at 8 evenly spaced steps; the radius is bisected over `[0, 10λ]`
    /// down to a resolution of `1e-4·λ`.
    pub fn planar_validity_radius(
        &self,
        x_ref: Point,
        eps: f64,
        direction_samples: usize,
    ) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(Error::BadConfig(format!("eps must be positive, got {eps}")));
        }
        if direction_samples < 4 {
            return Err(Error::BadConfig(format!(
                "need at least 4 direction samples, got {direction_samples}"
            )));
        }
        self.check_regular(x_ref)?;

        const RADIAL_STEPS: usize = 8;
        let resolution = 1e-4 * self.wavelength;
        let upper = 10.0 * self.wavelength;

        let within = |radius: f64| -> bool {
            (0..direction_samples).all(|k| {
                let theta = TAU * k as f64 / direction_samples as f64;
                let dir = Point::new(theta.cos(), theta.sin());
                (1..=RADIAL_STEPS).all(|step| {
                    let x = x_ref + dir * (radius * step as f64 / RADIAL_STEPS as f64);
                    match (self.channel_coefficient(x), self.planar_approx_channel(x, x_ref)) {
                        (Ok(exact), Ok(approx)) => (exact - approx).norm() <= eps,
                        _ => false,
                    }
                })
            })
        };

        if within(upper) {
            return Ok(upper);
        }
        if !within(resolution) {
            return Err(Error::NoValidRadius {
                eps,
                min_radius: resolution,
            });
        }
        let (mut lo, mut hi) = (resolution, upper);
        while hi - lo > resolution {
            let mid = 0.5 * (lo + hi);
            if within(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# wavefield scene\n");
        let _ = writeln!(out, "frequency_hz = {:.16e}", self.frequency_hz);
        let _ = writeln!(out, "origin_x_m = {:.16e}", self.extent.origin.x);
        let _ = writeln!(out, "origin_y_m = {:.16e}", self.extent.origin.y);
        let _ = writeln!(out, "extent_m = {:.16e}", self.extent.side);
        let _ = writeln!(out, "sources = {}", self.sources.len());
        out.push_str("# x_m y_m alpha beta_rad\n");
        for s in &self.sources {
            let _ = writeln!(
                out,
                "{:.16e} {:.16e} {:.16e} {:.16e}",
                s.location.x, s.location.y, s.alpha, s.beta
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut frequency = None;
        let mut origin_x = 0.0;
        let mut origin_y = 0.0;
        let mut side = None;
        let mut expected_sources = None;
        let mut sources = Vec::new();

        let parse_f64 = |line: usize, column: &str, raw: &str| -> Result<f64> {
            raw.trim().parse::<f64>().map_err(|e| Error::Parse {
                line: line as u64,
                column: column.to_string(),
                message: e.to_string(),
            })
        };

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if expected_sources.is_some() {
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() != 4 {
                    return Err(Error::Parse {
                        line: lineno as u64,
                        column: "source".into(),
                        message: format!("expected 4 fields, found {}", fields.len()),
                    });
                }
                let names = ["x_m", "y_m", "alpha", "beta_rad"];
                let mut v = [0.0; 4];
                for (slot, (field, name)) in v.iter_mut().zip(fields.iter().zip(names)) {
                    *slot = parse_f64(lineno, name, field)?;
                }
                sources.push(Source {
                    location: Point::new(v[0], v[1]),
                    alpha: v[2],
                    beta: v[3],
                });
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno as u64,
                column: "key".into(),
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            let key = key.trim();
            match key {
                "frequency_hz" => frequency = Some(parse_f64(lineno, key, value)?),
                "origin_x_m" => origin_x = parse_f64(lineno, key, value)?,
                "origin_y_m" => origin_y = parse_f64(lineno, key, value)?,
                "extent_m" => side = Some(parse_f64(lineno, key, value)?),
                "sources" => {
                    expected_sources =
                        Some(value.trim().parse::<usize>().map_err(|e| Error::Parse {
                            line: lineno as u64,
                            column: key.into(),
                            message: e.to_string(),
                        })?)
                }
                other => {
                    return Err(Error::Parse {
                        line: lineno as u64,
                        column: other.into(),
                        message: "unknown key".into(),
                    })
                }
            }
        }

        let frequency = frequency.ok_or_else(|| Error::Format("missing frequency_hz".into()))?;
        let side = side.ok_or_else(|| Error::Format("missing extent_m".into()))?;
        let expected = expected_sources.ok_or_else(|| Error::Format("missing sources".into()))?;
        if sources.len() != expected {
            return Err(Error::Format(format!(
                "declared {expected} sources, found {}",
                sources.len()
            )));
        }
        Scene::new(frequency, Extent::new(Point::new(origin_x, origin_y), side), sources)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scene::from_text(&text)
    }
}

/// First-order expansion of `‖x − x_source‖` around `x_ref`.
pub fn taylor_distance(x: Point, x_ref: Point, x_source: Point) -> Result<f64> {
    let offset = x_ref - x_source;
    let d = offset.norm();
    if d < DEGENERATE_SEPARATION {
        return Err(Error::DegenerateDirection { separation: d });
    }
    Ok(d + offset.dot(x - x_ref) / d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub num_paths: usize,
    pub extent: Extent,
    pub frequency_hz: f64,
}

impl SceneConfig {
    pub fn new(num_paths: usize, extent: Extent, frequency_hz: f64) -> Self {
        SceneConfig {
            num_paths,
            extent,
            frequency_hz,
        }
    }
}

/// Draws a random multipath scene.
///
/// The first source is the line-of-sight base station; the others are image
/// sources with `alpha ~ U(0.6, 1)` and `beta ~ U[0, 2π)`. All locations are
/// uniform over the box of three times the scene side (same center), minus
/// the scene itself dilated by one wavelength.
pub fn sample_random_scene(seed: u64, config: &SceneConfig) -> Result<Scene> {
    if config.num_paths < 1 {
        return Err(Error::BadConfig("num_paths must be at least 1".into()));
    }
    if !(config.extent.side.is_finite() && config.extent.side > 0.0) {
        return Err(Error::BadConfig(format!(
            "extent side must be positive, got {}",
            config.extent.side
        )));
    }
    if !(config.frequency_hz.is_finite() && config.frequency_hz > 0.0) {
        return Err(Error::BadConfig(format!(
            "frequency must be positive, got {}",
            config.frequency_hz
        )));
    }
    let wavelength = SPEED_OF_LIGHT / config.frequency_hz;
    let extent = config.extent;
    let outer_min = extent.origin - Point::new(extent.side, extent.side);
    let outer_side = 3.0 * extent.side;
    if wavelength >= extent.side {
        return Err(Error::BadConfig(
            "extent must be larger than one wavelength".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let place = |rng: &mut ChaCha8Rng| loop {
        let p = outer_min
            + Point::new(
                rng.gen::<f64>() * outer_side,
                rng.gen::<f64>() * outer_side,
            );
        if extent.distance_to(p) > wavelength {
            return p;
        }
    };

    let mut sources = Vec::with_capacity(config.num_paths);
    sources.push(Source::line_of_sight(place(&mut rng)));
    for _ in 1..config.num_paths {
        let location = place(&mut rng);
        let alpha = rng.gen_range(0.6..1.0);
        let beta = rng.gen_range(0.0..TAU);
        sources.push(Source {
            location,
            alpha,
            beta,
        });
    }
    Scene::new(config.frequency_hz, extent, sources)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn single(distance_wavelengths: f64, freq: f64) -> (Scene, Point) {
        let lambda = SPEED_OF_LIGHT / freq;
        let src = Point::new(-distance_wavelengths * lambda, 0.0);
        let scene = Scene::new(freq, Extent::square(1.0), vec![Source::line_of_sight(src)]).unwrap();
        (scene, Point::ORIGIN)
    }

    #[test]
    fn full_and_half_period_phase() {
        let (scene, x) = single(1.0, 3.5e9);
        let lambda = scene.wavelength();
        let h = scene.channel_coefficient(x).unwrap();
        assert_relative_eq!(h.re, 1.0 / lambda, max_relative = 1e-12);
        assert!(h.im.abs() < 1e-9 / lambda);

        let (scene, x) = single(0.5, 3.5e9);
        let h = scene.channel_coefficient(x).unwrap();
        assert_relative_eq!(h.re, -2.0 / lambda, max_relative = 1e-12);
        assert!(h.im.abs() < 1e-9 / lambda);
    }

    #[test]
    fn singular_location_is_rejected() {
        let src = Point::new(0.3, 0.4);
        let scene = Scene::new(3.5e9, Extent::square(1.0), vec![Source::line_of_sight(src)]).unwrap();
        assert!(matches!(
            scene.channel_coefficient(src + Point::new(1e-10, 0.0)),
            Err(Error::SingularLocation { source_index: 0, .. })
        ));
        assert!(scene.channel_coefficient(src + Point::new(1e-6, 0.0)).is_ok());
    }

    #[test]
    fn wavelength_matches_frequency() {
        let scene = Scene::new(3.5e9, Extent::square(10.0), vec![Source::line_of_sight(Point::new(-1.0, 0.0))]).unwrap();
        assert_relative_eq!(scene.wavelength() * 3.5e9, SPEED_OF_LIGHT, max_relative = 1e-12);
        assert_relative_eq!(scene.wavelength(), 0.085_654_988, max_relative = 1e-8);
    }

    #[test]
    fn scene_rejects_bad_sources() {
        let bad_alpha = Source { location: Point::new(2.0, 0.0), alpha: 0.0, beta: 0.0 };
        assert!(Scene::new(3.5e9, Extent::square(1.0), vec![bad_alpha]).is_err());
        let bad_beta = Source { location: Point::new(2.0, 0.0), alpha: 1.0, beta: TAU };
        assert!(Scene::new(3.5e9, Extent::square(1.0), vec![bad_beta]).is_err());
        assert!(Scene::new(3.5e9, Extent::square(1.0), vec![]).is_err());
    }

    #[test]
    fn planar_approx_at_reference_is_exact() {
        let cfg = SceneConfig::new(6, Extent::square(10.0), 3.5e9);
        let scene = sample_random_scene(3, &cfg).unwrap();
        let x_ref = Point::new(4.2, 7.1);
        let exact = scene.channel_coefficient(x_ref).unwrap();
        let approx = scene.planar_approx_channel(x_ref, x_ref).unwrap();
        assert!((exact - approx).norm() <= 1e-12 * exact.norm());
    }

    #[test]
    fn planar_approx_far_field_accuracy() {
        let (scene, x_ref) = single(100.0, 3.5e9);
        let lambda = scene.wavelength();
        for k in 0..16 {
            let theta = TAU * k as f64 / 16.0;
            let x = x_ref + Point::new(theta.cos(), theta.sin()) * (lambda / 10.0);
            let exact = scene.channel_coefficient(x).unwrap();
            let approx = scene.planar_approx_channel(x, x_ref).unwrap();
            assert!((exact - approx).norm() / exact.norm() < 1e-3);
        }
    }

    #[test]
    fn planar_error_grows_along_a_ray() {
        let (scene, x_ref) = single(100.0, 3.5e9);
        let lambda = scene.wavelength();
        let dir = Point::new(0.6, 0.8);
        let mut prev = 0.0;
        for step in 0..=200 {
            let x = x_ref + dir * (lambda * step as f64 / 200.0);
            let err = (scene.channel_coefficient(x).unwrap()
                - scene.planar_approx_channel(x, x_ref).unwrap())
            .norm();
            assert!(err + 1e-15 >= prev, "step {step}: {err} < {prev}");
            prev = err;
        }
    }

    #[test]
    fn degenerate_interpolation() {
        let src = Point::new(-1.0, 0.0);
        let scene = Scene::new(3.5e9, Extent::square(1.0), vec![Source::line_of_sight(src)]).unwrap();
        // Moving from x_ref straight back through the source zeroes the denominator.
        let err = scene.planar_approx_channel(Point::new(-2.0, 0.0), Point::ORIGIN);
        assert!(matches!(err, Err(Error::DegenerateInterpolation { .. })));
    }

    #[test]
    fn taylor_distance_cases() {
        let x_l = Point::new(-3.0, -4.0);
        let x_r = Point::ORIGIN;
        assert_eq!(taylor_distance(x_r, x_r, x_l).unwrap(), 5.0);
        let u = Point::new(0.6, 0.8);
        let delta = 0.01;
        assert_relative_eq!(
            taylor_distance(x_r + u * delta, x_r, x_l).unwrap(),
            5.0 + delta,
            max_relative = 1e-14
        );
        let perp = Point::new(-0.8, 0.6);
        let x = x_r + perp * delta;
        let approx = taylor_distance(x, x_r, x_l).unwrap();
        assert_relative_eq!(approx, 5.0, max_relative = 1e-14);
        let exact = x.distance(x_l);
        assert_relative_eq!(exact - approx, delta * delta / 10.0, max_relative = 1e-3);
        assert!(matches!(
            taylor_distance(x, x_l, x_l),
            Err(Error::DegenerateDirection { .. })
        ));
    }

    #[test]
    fn validity_radius_unconstrained_is_search_bound() {
        let (scene, x_ref) = single(50.0, 3.5e9);
        let r = scene.planar_validity_radius(x_ref, f64::INFINITY, 8).unwrap();
        assert_eq!(r, 10.0 * scene.wavelength());
    }

    #[test]
    fn validity_radius_far_source() {
        let (scene, x_ref) = single(1000.0, 3.5e9);
        let eps = 0.01 * scene.channel_coefficient(x_ref).unwrap().norm();
        let r = scene.planar_validity_radius(x_ref, eps, 16).unwrap();
        assert!(r >= scene.wavelength(), "radius {r}");
    }

    #[test]
    fn validity_radius_shrinks_when_source_approaches() {
        let (far, x_ref) = single(200.0, 3.5e9);
        let (near, _) = single(20.0, 3.5e9);
        // Same absolute tolerance for both scenes.
        let eps = 1e-3 * far.channel_coefficient(x_ref).unwrap().norm();
        let r_far = far.planar_validity_radius(x_ref, eps, 16).unwrap();
        let r_near = near.planar_validity_radius(x_ref, eps, 16).unwrap();
        assert!(r_near < r_far, "near {r_near} far {r_far}");
    }

    #[test]
    fn validity_radius_errors() {
        let (scene, x_ref) = single(2.0, 3.5e9);
        assert!(matches!(
            scene.planar_validity_radius(x_ref, 1e-30, 8),
            Err(Error::NoValidRadius { .. })
        ));
        assert!(scene.planar_validity_radius(x_ref, 1.0, 3).is_err());
        assert!(scene.planar_validity_radius(x_ref, 0.0, 8).is_err());
    }

    #[test]
    fn random_scene_contract() {
        let cfg = SceneConfig::new(6, Extent::square(10.0), 3.5e9);
        let a = sample_random_scene(11, &cfg).unwrap();
        let b = sample_random_scene(11, &cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_random_scene(12, &cfg).unwrap());
        assert_eq!(a.sources()[0].alpha, 1.0);
        assert_eq!(a.sources()[0].beta, 0.0);
        for s in a.sources() {
            assert!(a.extent().distance_to(s.location) > a.wavelength());
            assert!(s.location.x >= -10.0 && s.location.x <= 20.0);
            assert!(s.location.y >= -10.0 && s.location.y <= 20.0);
        }

        let los = sample_random_scene(5, &SceneConfig::new(1, Extent::square(10.0), 3.5e9)).unwrap();
        assert_eq!(los.num_paths(), 1);
        assert_eq!((los.sources()[0].alpha, los.sources()[0].beta), (1.0, 0.0));

        assert!(sample_random_scene(0, &SceneConfig::new(0, Extent::square(10.0), 3.5e9)).is_err());
        assert!(sample_random_scene(0, &SceneConfig::new(2, Extent::square(-1.0), 3.5e9)).is_err());
    }

    #[test]
    fn alpha_distribution_monte_carlo() {
        let cfg = SceneConfig::new(6, Extent::square(10.0), 3.5e9);
        let mut sum = 0.0;
        let mut n = 0usize;
        for seed in 0..1000 {
            for s in &sample_random_scene(seed, &cfg).unwrap().sources()[1..] {
                assert!(s.alpha >= 0.6 && s.alpha <= 1.0);
                assert!((0.0..TAU).contains(&s.beta));
                sum += s.alpha;
                n += 1;
            }
        }
        let mean = sum / n as f64;
        assert!((mean - 0.8).abs() < 0.02, "mean alpha {mean}");
    }

    #[test]
    fn text_round_trip_is_exact() {
        let cfg = SceneConfig::new(5, Extent::new(Point::new(0.1, -0.7), 2.5), 3.5e9);
        let scene = sample_random_scene(77, &cfg).unwrap();
        let text = scene.to_text();
        assert_eq!(Scene::from_text(&text).unwrap(), scene);
    }

    #[test]
    fn text_parse_errors() {
        assert!(matches!(Scene::from_text("frequency_hz = abc\n"), Err(Error::Parse { line: 1, .. })));
        let missing = "frequency_hz = 1e9\nextent_m = 1\nsources = 2\n5 5 1 0\n";
        assert!(matches!(Scene::from_text(missing), Err(Error::Format(_))));
    }
}
