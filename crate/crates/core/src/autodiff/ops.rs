//! Forward kernels and their vector-Jacobian products.
//!
//! Every kernel accepts either a single vector `[n]` or a batch `[B, n]` and
//! works row by row. Backward passes take the upstream gradient in the
//! real-pair convention (see [`CTensor`]) and return the gradient with respect
//! to the kernel input.

use num_complex::Complex64;

use super::bank::FourierFeatureBank;
use super::tensor::{CTensor, ZERO};
use crate::error::{Error, Result};
use crate::par;
use crate::scene::Point;

/// Rows handled together against one shared vector in [`lane_dots`].
const MICRO: usize = 8;
/// Rows (or weight rows) per parallel task in the linear kernels.
const TASK_ROWS: usize = 16;
/// Width of the `f64` accumulators.
const LANES: usize = 4;

/// Magnitudes at or below this get a unit phase factor in the gate.
pub const GATE_PHASE_FLOOR: f64 = 1e-12;

/// How the gate maps the real softmax of magnitudes back to complex
/// coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum GateMode {
    /// `w_i = softmax(|z|)_i · z_i / |z_i|`
    #[default]
    PhasePreserving,
    /// `w_i = softmax(|z|)_i · z_i`
    Scaled,
    /// `w_i = softmax(|z|)_i`, real-valued.
    Magnitude,
}

impl GateMode {
    pub fn tag(self) -> u32 {
        match self {
            GateMode::PhasePreserving => 0,
            GateMode::Scaled => 1,
            GateMode::Magnitude => 2,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(GateMode::PhasePreserving),
            1 => Some(GateMode::Scaled),
            2 => Some(GateMode::Magnitude),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateMode::PhasePreserving => "phase",
            GateMode::Scaled => "scaled",
            GateMode::Magnitude => "magnitude",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "phase" => Some(GateMode::PhasePreserving),
            "scaled" => Some(GateMode::Scaled),
            "magnitude" => Some(GateMode::Magnitude),
            _ => None,
        }
    }
}

/// `a·b + c`, fused where the target has FMA.
#[inline(always)]
fn fmadd(a: f64, b: f64, c: f64) -> f64 {
    #[cfg(target_feature = "fma")]
    {
        a.mul_add(b, c)
    }
    #[cfg(not(target_feature = "fma"))]
    {
        a * b + c
    }
}

fn flat(v: &[Complex64]) -> &[f64] {
    bytemuck::cast_slice(v)
}

/// Lane sums for `R` rows against one shared vector `s`, on the interleaved
/// `f64` view. Per row the result is `[Σ re·re, Σ im·im, Σ re·s_im, Σ im·s_re]`
/// with the row component first; the order of additions is the same for
/// every row, whatever `R`.
#[inline(always)]
fn lane_dots<const R: usize>(s: &[f64], rows: &[&[f64]; R]) -> [[f64; 4]; R] {
    let chunks = s.len() / LANES;
    let mut p = [[0.0f64; LANES]; R];
    let mut q = [[0.0f64; LANES]; R];
    for c in 0..chunks {
        let sc: &[f64; LANES] = s[c * LANES..(c + 1) * LANES].try_into().unwrap();
        let sw: [f64; LANES] = std::array::from_fn(|l| sc[l ^ 1]);
        for k in 0..R {
            let x: &[f64; LANES] = rows[k][c * LANES..(c + 1) * LANES].try_into().unwrap();
            for l in 0..LANES {
                p[k][l] = fmadd(x[l], sc[l], p[k][l]);
                q[k][l] = fmadd(x[l], sw[l], q[k][l]);
            }
        }
    }
    let tail = chunks * LANES;
    std::array::from_fn(|k| {
        let mut acc = [0.0f64; 4];
        for l in (0..LANES).step_by(2) {
            acc[0] += p[k][l];
            acc[1] += p[k][l + 1];
            acc[2] += q[k][l];
            acc[3] += q[k][l + 1];
        }
        for (x, y) in rows[k][tail..].chunks_exact(2).zip(s[tail..].chunks_exact(2)) {
            acc[0] += x[0] * y[0];
            acc[1] += x[1] * y[1];
            acc[2] += x[0] * y[1];
            acc[3] += x[1] * y[0];
        }
        acc
    })
}

/// [`lane_dots`] over any number of rows, `MICRO` at a time.
fn dots_against(s: &[f64], rows: &[&[f64]], out: &mut Vec<[f64; 4]>) {
    out.clear();
    let mut blocks = rows.chunks_exact(MICRO);
    for blk in &mut blocks {
        out.extend(lane_dots::<MICRO>(s, blk.try_into().unwrap()));
    }
    for row in blocks.remainder() {
        out.extend(lane_dots::<1>(s, &[row]));
    }
}

/// `a·b` from the lane sums of row `a` against shared `b`.
#[inline]
fn plain(d: [f64; 4]) -> Complex64 {
    Complex64::new(d[0] - d[1], d[2] + d[3])
}

#[inline]
pub(crate) fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    plain(lane_dots::<1>(flat(b), &[flat(a)])[0])
}

fn transpose(v: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut t = vec![ZERO; v.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = v[r * cols + c];
        }
    }
    t
}

/// `y += g · conj(x)`
#[inline]
fn axpy_conj(y: &mut [Complex64], g: Complex64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        yi.re += g.re * xi.re + g.im * xi.im;
        yi.im += g.im * xi.re - g.re * xi.im;
    }
}

fn batch_shape(rows: usize, cols: usize, batched: bool) -> Vec<usize> {
    if batched {
        vec![rows, cols]
    } else {
        vec![cols]
    }
}

/// `y = W·z + b` for each row `z` of `input`.
pub fn complex_linear(input: &CTensor, weight: &CTensor, bias: Option<&CTensor>) -> Result<CTensor> {
    let batched = input.shape().len() == 2;
    let (rows, n) = input.rows_cols();
    let (m, wn) = match weight.shape() {
        [m, n] => (*m, *n),
        other => {
            return Err(Error::ShapeMismatch(format!(
                "weight must be a matrix, got shape {other:?}"
            )))
        }
    };
    if wn != n {
        return Err(Error::ShapeMismatch(format!(
            "weight expects {wn} inputs, input has {n}"
        )));
    }
    if let Some(b) = bias {
        if b.shape() != [m] {
            return Err(Error::ShapeMismatch(format!(
                "bias shape {:?} does not match {m} outputs",
                b.shape()
            )));
        }
    }
    let x = input.values();
    let w = weight.values();
    let b = bias.map(CTensor::values);
    let mut out = vec![ZERO; rows * m];
    par::for_each_row(&mut out, TASK_ROWS * m, |t, y| {
        let r0 = t * TASK_ROWS;
        let xs: Vec<&[f64]> = (r0..r0 + y.len() / m).map(|r| flat(&x[r * n..(r + 1) * n])).collect();
        let mut sums = Vec::with_capacity(xs.len());
        for o in 0..m {
            dots_against(flat(&w[o * n..(o + 1) * n]), &xs, &mut sums);
            for (k, d) in sums.iter().enumerate() {
                let mut acc = plain(*d);
                if let Some(b) = b {
                    acc += b[o];
                }
                y[k * m + o] = acc;
            }
        }
    });
    CTensor::from_vec(&batch_shape(rows, m, batched), out)
}

/// Accumulates `∂L/∂W[o, i] = Σ_r g[r, o] · conj(x[r, i])` into `grad_w`.
pub(crate) fn linear_backward_weight(
    grad_out: &[Complex64],
    input: &[Complex64],
    rows: usize,
    n: usize,
    m: usize,
    grad_w: &mut [Complex64],
) {
    let gt = transpose(grad_out, rows, m);
    let xt = transpose(input, rows, n);
    let xs: Vec<&[f64]> = (0..n).map(|i| flat(&xt[i * rows..(i + 1) * rows])).collect();
    par::for_each_row(grad_w, TASK_ROWS * n, |t, gw| {
        let o0 = t * TASK_ROWS;
        let mut sums = Vec::with_capacity(TASK_ROWS);
        for i0 in (0..n).step_by(TASK_ROWS) {
            let cols = &xs[i0..(i0 + TASK_ROWS).min(n)];
            for (k, gwo) in gw.chunks_exact_mut(n).enumerate() {
                let o = o0 + k;
                dots_against(flat(&gt[o * rows..(o + 1) * rows]), cols, &mut sums);
                for (j, d) in sums.iter().enumerate() {
                    gwo[i0 + j] += Complex64::new(d[0] + d[1], d[2] - d[3]);
                }
            }
        }
    });
}

pub(crate) fn linear_backward_bias(grad_out: &[Complex64], rows: usize, m: usize, grad_b: &mut [Complex64]) {
    for r in 0..rows {
        for (gb, g) in grad_b.iter_mut().zip(&grad_out[r * m..(r + 1) * m]) {
            *gb += g;
        }
    }
}

/// `∂L/∂z[r, i] = Σ_o conj(W[o, i]) · g[r, o]`
pub(crate) fn linear_backward_input(
    grad_out: &[Complex64],
    weight: &[Complex64],
    rows: usize,
    n: usize,
    m: usize,
) -> Vec<Complex64> {
    let wt = transpose(weight, m, n);
    let mut gx = vec![ZERO; rows * n];
    par::for_each_row(&mut gx, TASK_ROWS * n, |t, gxb| {
        let r0 = t * TASK_ROWS;
        let gs: Vec<&[f64]> = (r0..r0 + gxb.len() / n).map(|r| flat(&grad_out[r * m..(r + 1) * m])).collect();
        let mut sums = Vec::with_capacity(gs.len());
        for i in 0..n {
            dots_against(flat(&wt[i * m..(i + 1) * m]), &gs, &mut sums);
            for (k, d) in sums.iter().enumerate() {
                gxb[k * n + i] = Complex64::new(d[0] + d[1], d[3] - d[2]);
            }
        }
    });
    gx
}

/// Independent ReLU on real and imaginary parts.
pub fn relu_c(z: &CTensor) -> CTensor {
    let values = z
        .values()
        .iter()
        .map(|v| Complex64::new(v.re.max(0.0), v.im.max(0.0)))
        .collect();
    CTensor::from_vec(z.shape(), values).expect("same shape")
}

/// Subgradient 0 at the kink in each part.
pub(crate) fn relu_c_backward(input: &[Complex64], grad_out: &[Complex64]) -> Vec<Complex64> {
    input
        .iter()
        .zip(grad_out)
        .map(|(z, g)| {
            Complex64::new(
                if z.re > 0.0 { g.re } else { 0.0 },
                if z.im > 0.0 { g.im } else { 0.0 },
            )
        })
        .collect()
}

fn softmax_in_place(m: &mut [f64]) {
    let max = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in m.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    let inv = 1.0 / total;
    for v in m.iter_mut() {
        *v *= inv;
    }
}

fn unit_phase(z: Complex64, magnitude: f64) -> Complex64 {
    if magnitude > GATE_PHASE_FLOOR {
        z / magnitude
    } else {
        Complex64::new(1.0, 0.0)
    }
}

/// Softmax over the magnitudes of each row, mapped back to complex
/// coefficients according to `mode`.
pub fn softmax_c_gate(z: &CTensor, mode: GateMode) -> Result<CTensor> {
    let (rows, d) = z.rows_cols();
    if d == 0 {
        return Err(Error::ShapeMismatch("gate needs at least one entry".into()));
    }
    let zv = z.values();
    let mut out = vec![ZERO; rows * d];
    par::for_each_row(&mut out, d, |r, w| {
        let zr = &zv[r * d..(r + 1) * d];
        let mut s: Vec<f64> = zr.iter().map(|v| v.norm()).collect();
        let mags = s.clone();
        softmax_in_place(&mut s);
        for i in 0..d {
            w[i] = match mode {
                GateMode::PhasePreserving => unit_phase(zr[i], mags[i]) * s[i],
                GateMode::Scaled => zr[i] * s[i],
                GateMode::Magnitude => Complex64::new(s[i], 0.0),
            };
        }
    });
    CTensor::from_vec(z.shape(), out)
}

pub(crate) fn softmax_c_gate_backward(
    input: &[Complex64],
    grad_out: &[Complex64],
    d: usize,
    mode: GateMode,
) -> Vec<Complex64> {
    let mut gz = vec![ZERO; input.len()];
    par::for_each_row(&mut gz, d, |r, gzr| {
        let zr = &input[r * d..(r + 1) * d];
        let gr = &grad_out[r * d..(r + 1) * d];
        let mags: Vec<f64> = zr.iter().map(|v| v.norm()).collect();
        let mut s = mags.clone();
        softmax_in_place(&mut s);
        let phases: Vec<Complex64> = zr.iter().zip(&mags).map(|(z, m)| unit_phase(*z, *m)).collect();

        // Sensitivity of the loss to each softmax output.
        let gs: Vec<f64> = (0..d)
            .map(|i| match mode {
                GateMode::PhasePreserving => (gr[i].conj() * phases[i]).re,
                GateMode::Scaled => (gr[i].conj() * zr[i]).re,
                GateMode::Magnitude => gr[i].re,
            })
            .collect();
        let weighted: f64 = s.iter().zip(&gs).map(|(a, b)| a * b).sum();

        for i in 0..d {
            let gm = s[i] * (gs[i] - weighted);
            let magnitude_path = if mags[i] > GATE_PHASE_FLOOR {
                phases[i] * gm
            } else {
                ZERO
            };
            let direct = match mode {
                GateMode::PhasePreserving if mags[i] > GATE_PHASE_FLOOR => {
                    (gr[i] - phases[i] * gs[i]) * (s[i] / mags[i])
                }
                GateMode::PhasePreserving => ZERO,
                GateMode::Scaled => gr[i] * s[i],
                GateMode::Magnitude => ZERO,
            };
            gzr[i] = magnitude_path + direct;
        }
    });
    gz
}

/// Plane-wave dictionary `ψ_i(x) = e^{-j k_i·x}` for each location.
pub fn fourier_features(points: &[Point], bank: &FourierFeatureBank) -> CTensor {
    let d = bank.len();
    let ks = bank.frequencies();
    let mut out = vec![ZERO; points.len() * d];
    par::for_each_row(&mut out, d, |r, row| {
        let x = points[r];
        for (psi, k) in row.iter_mut().zip(ks) {
            let (s, c) = k.dot(x).sin_cos();
            *psi = Complex64::new(c, -s);
        }
    });
    CTensor::from_vec(&[points.len(), d], out).expect("shape")
}

/// Row-wise inner product `Σ_i w_i ψ_i`, shape `[B, 1]`.
pub fn dict_combine(coeffs: &CTensor, atoms: &CTensor) -> Result<CTensor> {
    if coeffs.rows_cols() != atoms.rows_cols() {
        return Err(Error::ShapeMismatch(format!(
            "coefficients {:?} vs dictionary {:?}",
            coeffs.shape(),
            atoms.shape()
        )));
    }
    let (rows, d) = coeffs.rows_cols();
    let w = coeffs.values();
    let psi = atoms.values();
    let out = par::map_indexed(rows, |r| cdot(&w[r * d..(r + 1) * d], &psi[r * d..(r + 1) * d]));
    CTensor::from_vec(&[rows, 1], out)
}

/// `∂L/∂w[r, i] = g[r] · conj(ψ[r, i])`
pub(crate) fn dict_combine_backward_coeffs(grad_out: &[Complex64], atoms: &[Complex64], d: usize) -> Vec<Complex64> {
    let mut gw = vec![ZERO; atoms.len()];
    par::for_each_row(&mut gw, d, |r, row| {
        axpy_conj(row, grad_out[r], &atoms[r * d..(r + 1) * d]);
    });
    gw
}

pub(crate) fn dict_combine_backward_atoms(grad_out: &[Complex64], coeffs: &[Complex64], d: usize) -> Vec<Complex64> {
    dict_combine_backward_coeffs(grad_out, coeffs, d)
}
