use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Zero-mean multivariate normal noise, held by its lower Cholesky factor.
#[derive(Clone, Debug)]
pub(crate) struct Gaussian {
    lower: DMatrix<f64>,
    log_norm: f64,
}

impl Gaussian {
    /// `name` is used in the error when `cov` is not positive definite.
    pub fn new(cov: &DMatrix<f64>, name: &str) -> Result<Self> {
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Invariant(format!("{name} positive definite")))?;
        let lower = chol.l();
        let dim = cov.nrows() as f64;
        let log_det: f64 = 2.0 * lower.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Gaussian {
            lower,
            log_norm: -0.5 * (dim * (2.0 * PI).ln() + log_det),
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn log_density(&self, residual: &[f64]) -> f64 {
        let n = self.dim();
        if n == 1 {
            let z = residual[0] / self.lower[(0, 0)];
            return self.log_norm - 0.5 * z * z;
        }
        // forward substitution L z = r
        let mut z = [0.0; 16];
        let mut heap;
        let z: &mut [f64] = if n <= 16 {
            &mut z[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        let mut quad = 0.0;
        for i in 0..n {
            let mut acc = residual[i];
            for j in 0..i {
                acc -= self.lower[(i, j)] * z[j];
            }
            z[i] = acc / self.lower[(i, i)];
            quad += z[i] * z[i];
        }
        self.log_norm - 0.5 * quad
    }

    /// Writes `mean + L·ε` with `ε ~ N(0, I)` into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, mean: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let mut eps = [0.0; 16];
        let mut heap;
        let eps: &mut [f64] = if n <= 16 {
            &mut eps[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        for e in eps.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        for i in 0..n {
            let mut acc = mean[i];
            for j in 0..=i {
                acc += self.lower[(i, j)] * eps[j];
            }
            out[i] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn scalar_density_at_mean() {
        let g = Gaussian::new(&DMatrix::from_element(1, 1, 0.5), "R").unwrap();
        assert_relative_eq!(g.log_density(&[0.0]).exp(), 0.564_189_583_547_756_3, epsilon = 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        let err = Gaussian::new(&DMatrix::from_element(1, 1, -1.0), "Q").unwrap_err();
        assert!(err.to_string().contains("Q positive definite"));
    }
}
