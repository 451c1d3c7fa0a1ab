use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Dense row-major complex tensor with an optional gradient accumulator.
///
/// Gradients follow the real-pair convention: for a real loss `L` and an
/// entry `a + jb`, the accumulator holds `∂L/∂a + j ∂L/∂b`.
#[derive(Debug, Clone, PartialEq)]
pub struct CTensor {
    shape: Vec<usize>,
    values: Vec<Complex64>,
    grad: Option<Vec<Complex64>>,
}

impl CTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        CTensor {
            shape: shape.to_vec(),
            values: vec![ZERO; len],
            grad: None,
        }
    }

    pub fn from_vec(shape: &[usize], values: Vec<Complex64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} holds {len} entries, got {}",
                values.len()
            )));
        }
        Ok(CTensor {
            shape: shape.to_vec(),
            values,
            grad: None,
        })
    }

    /// Column vector `[n]`.
    pub fn vector(values: Vec<Complex64>) -> Self {
        CTensor {
            shape: vec![values.len()],
            values,
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn grad(&self) -> Option<&[Complex64]> {
        self.grad.as_deref()
    }

    /// Gradient slot, allocated (zeroed) on first use.
    pub fn grad_mut(&mut self) -> &mut [Complex64] {
        let len = self.values.len();
        self.grad.get_or_insert_with(|| vec![ZERO; len])
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.fill(ZERO);
        }
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    /// Rows and columns when viewed as a matrix; a vector is a single row.
    pub fn rows_cols(&self) -> (usize, usize) {
        match self.shape.as_slice() {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            _ => (1, self.values.len()),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Number of real scalars held (two per complex entry).
    pub fn real_len(&self) -> usize {
        2 * self.values.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checks() {
        assert!(CTensor::from_vec(&[2, 3], vec![ZERO; 5]).is_err());
        let t = CTensor::from_vec(&[2, 3], vec![ZERO; 6]).unwrap();
        assert_eq!(t.rows_cols(), (2, 3));
        assert_eq!(t.real_len(), 12);
    }

    #[test]
    fn grad_slot_lifecycle() {
        let mut t = CTensor::zeros(&[4]);
        assert!(t.grad().is_none());
        t.grad_mut()[1] = Complex64::new(1.0, -1.0);
        assert_eq!(t.grad().unwrap()[1], Complex64::new(1.0, -1.0));
        t.zero_grad();
        assert!(t.grad().unwrap().iter().all(|g| *g == ZERO));
        t.clear_grad();
        assert!(t.grad().is_none());
    }
}
