//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use wavefield::scene::Source;

pub const C: f64 = 299_792_458.0;

/// Direct summation of attenuated spherical waves, with real arithmetic only.
pub fn direct_sum(sources: &[Source], freq: f64, x: f64, y: f64) -> (f64, f64) {
    let lambda = C / freq;
    let (mut re, mut im) = (0.0, 0.0);
    for s in sources {
        let dx = x - s.location.x;
        let dy = y - s.location.y;
        let d = (dx * dx + dy * dy).sqrt();
        let phase = s.beta - 2.0 * PI * d / lambda;
        re += s.alpha * phase.cos() / d;
        im += s.alpha * phase.sin() / d;
    }
    (re, im)
}

/// Plane-wave expansion of every source around `(xr, yr)`, real arithmetic.
pub fn direct_planar(sources: &[Source], freq: f64, x: (f64, f64), xr: (f64, f64)) -> (f64, f64) {
    let lambda = C / freq;
    let k = 2.0 * PI / lambda;
    let (mut re, mut im) = (0.0, 0.0);
    for s in sources {
        let (ox, oy) = (xr.0 - s.location.x, xr.1 - s.location.y);
        let dr = (ox * ox + oy * oy).sqrt();
        let (ux, uy) = (ox / dr, oy / dr);
        let along = ux * (x.0 - xr.0) + uy * (x.1 - xr.1);
        let phase = s.beta - k * dr - k * along;
        let amp = s.alpha / dr / (1.0 + along / dr);
        re += amp * phase.cos();
        im += amp * phase.sin();
    }
    (re, im)
}

pub fn rel_err(a: (f64, f64), b: (f64, f64)) -> f64 {
    let num = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
    let den = (b.0 * b.0 + b.1 * b.1).sqrt();
    num / den
}
