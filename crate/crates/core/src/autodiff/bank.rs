use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scene::Point;

/// Fixed set of angular wave vectors (rad/m) feeding the Fourier-feature layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierFeatureBank {
    frequencies: Vec<Point>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CircleSampling {
    Equiangular,
    Random { seed: u64 },
}

impl FourierFeatureBank {
    pub fn new(frequencies: Vec<Point>) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::BadConfig("Fourier feature bank is empty".into()));
        }
        if frequencies.iter().any(|k| !k.is_finite()) {
            return Err(Error::BadConfig("non-finite spatial frequency".into()));
        }
        Ok(FourierFeatureBank { frequencies })
    }

    pub fn frequencies(&self) -> &[Point] {
        &self.frequencies
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Largest relative deviation of `‖k_i‖` from `2π/λ`.
    pub fn norm_deviation(&self, wavelength: f64) -> f64 {
        let radius = TAU / wavelength;
        self.frequencies
            .iter()
            .map(|k| (k.norm() - radius).abs() / radius)
            .fold(0.0, f64::max)
    }
}

/// Samples `count` wave vectors on the circle of radius `2π/λ`.
pub fn make_circle_bank(count: usize, wavelength: f64, sampling: CircleSampling) -> Result<FourierFeatureBank> {
    if count < 1 {
        return Err(Error::BadConfig("dictionary size must be at least 1".into()));
    }
    if !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(Error::BadConfig(format!("bad wavelength {wavelength}")));
    }
    let radius = TAU / wavelength;
    let angles: Vec<f64> = match sampling {
        CircleSampling::Equiangular => (0..count).map(|i| TAU * i as f64 / count as f64).collect(),
        CircleSampling::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count).map(|_| rng.gen_range(0.0..TAU)).collect()
        }
    };
    let frequencies = angles
        .into_iter()
        .map(|theta| Point::new(radius * theta.cos(), radius * theta.sin()))
        .collect();
    FourierFeatureBank::new(frequencies)
}
