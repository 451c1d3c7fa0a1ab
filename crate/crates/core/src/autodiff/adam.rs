use num_complex::Complex64;

use super::params::ParamStore;
use super::tensor::ZERO;
use crate::error::{Error, Result};

/// Adam with bias correction; real and imaginary parts are independent
/// scalars with their own moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// First moments, one buffer per parameter tensor.
    pub m: Vec<Vec<Complex64>>,
    /// Second moments; `re` and `im` hold the two components' estimates.
    pub v: Vec<Vec<Complex64>>,
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        AdamState {
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn for_params(lr: f64, params: &ParamStore) -> Self {
        let mut state = AdamState::new(lr);
        state.init(params);
        state
    }

    fn init(&mut self, params: &ParamStore) {
        self.m = params.iter().map(|p| vec![ZERO; p.tensor.len()]).collect();
        self.v = self.m.clone();
    }
}

/// One Adam update from the gradients currently stored in `params`.
/// Tensors without a gradient slot are treated as having zero gradient.
pub fn adam_step(params: &mut ParamStore, state: &mut AdamState) -> Result<()> {
    if !(state.lr >= 0.0) {
        return Err(Error::BadConfig(format!("learning rate must be non-negative, got {}", state.lr)));
    }
    if state.m.is_empty() && !params.is_empty() {
        state.init(params);
    }
    if state.m.len() != params.len() {
        return Err(Error::ShapeMismatch(format!(
            "optimizer tracks {} tensors, model has {}",
            state.m.len(),
            params.len()
        )));
    }
    for ((p, m), v) in params.iter().zip(&state.m).zip(&state.v) {
        if m.len() != p.tensor.len() || v.len() != p.tensor.len() {
            return Err(Error::ShapeMismatch(format!(
                "moment buffers for {} have the wrong length",
                p.name
            )));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 / (1.0 - b1.powi(t));
    let c2 = 1.0 / (1.0 - b2.powi(t));
    let lr = state.lr;

    let update = |param: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *param -= lr * (*m * c1) / ((*v * c2).sqrt() + eps);
    };

    for ((p, m), v) in params.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        let grads = p.tensor.grad().map(<[Complex64]>::to_vec);
        let values = p.tensor.values_mut();
        for i in 0..values.len() {
            let g = grads.as_ref().map_or(ZERO, |g| g[i]);
            update(&mut values[i].re, g.re, &mut m[i].re, &mut v[i].re);
            update(&mut values[i].im, g.im, &mut m[i].im, &mut v[i].im);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::tensor::CTensor;

    fn scalar_store(value: Complex64) -> ParamStore {
        let mut store = ParamStore::new();
        store.insert("p", CTensor::vector(vec![value])).unwrap();
        store
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut store = scalar_store(Complex64::new(0.5, -2.0));
        store.iter_mut().next().unwrap().tensor.grad_mut();
        let mut state = AdamState::new(0.1);
        adam_step(&mut store, &mut state).unwrap();
        assert_eq!(state.step, 1);
        assert_eq!(store.by_name("p").unwrap().values()[0], Complex64::new(0.5, -2.0));
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m̂ = g and v̂ = g² after bias correction, so the step is lr·g/(|g| + ε).
        let mut store = scalar_store(ZERO);
        store.iter_mut().next().unwrap().tensor.grad_mut()[0] = Complex64::new(1.0, 0.0);
        let mut state = AdamState::new(0.1);
        adam_step(&mut store, &mut state).unwrap();
        let p = store.by_name("p").unwrap().values()[0];
        assert!((p.re + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
        assert_eq!(p.im, 0.0);
    }

    #[test]
    fn quadratic_descends_monotonically() {
        // L = |p - c|², gradient in the real-pair convention is 2(p - c).
        let target = Complex64::new(3.0, -1.5);
        let mut store = scalar_store(ZERO);
        let mut state = AdamState::new(1e-3);
        let loss = |s: &ParamStore| (s.by_name("p").unwrap().values()[0] - target).norm_sqr();
        let mut prev = loss(&store);
        for _ in 0..1000 {
            let p = store.by_name("p").unwrap().values()[0];
            let t = &mut store.iter_mut().next().unwrap().tensor;
            t.zero_grad();
            t.grad_mut()[0] = (p - target) * 2.0;
            adam_step(&mut store, &mut state).unwrap();
            let l = loss(&store);
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let mut store = scalar_store(ZERO);
        let mut state = AdamState::new(0.1);
        state.m = vec![vec![ZERO; 3]];
        state.v = vec![vec![ZERO; 3]];
        assert!(matches!(adam_step(&mut store, &mut state), Err(Error::ShapeMismatch(_))));
    }
}
