//! Model quality measures beyond output error statistics.

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Interval holding the central `mass` fraction of `values`, by empirical
/// quantiles with linear interpolation.
pub fn central_interval(values: &[f64], mass: f64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("no values".into()));
    }
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(Error::InvalidArgument(format!("mass must lie in (0, 1], got {mass}")));
    }
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let tail = 0.5 * (1.0 - mass);
    Ok((quantile(&v, tail), quantile(&v, 1.0 - tail)))
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// `points` evenly spaced values covering `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Root-mean-square difference between the identified state function
/// `f_x` (first state coordinate) and `truth` on `grid`. Scalar states only.
pub fn grid_rmse<F: Fn(f64) -> f64>(model: &ModelParams, truth: F, grid: &[f64]) -> Result<f64> {
    if model.n_x != 1 {
        return Err(Error::Dimension {
            what: "state dimension for grid RMSE",
            expected: 1,
            got: model.n_x,
        });
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    let mut acc = 0.0;
    for &x in grid {
        let d = model.state_fn_x(&[x])?[0] - truth(x);
        acc += d * d;
    }
    Ok((acc / grid.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::linear_gaussian;

    #[test]
    fn central_interval_of_uniform_ramp() {
        let v: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let (lo, hi) = central_interval(&v, 0.95).unwrap();
        assert!((lo - 0.025).abs() < 1e-12 && (hi - 0.975).abs() < 1e-12);
        assert!(central_interval(&[], 0.9).is_err());
    }

    #[test]
    fn grid_rmse_of_exact_model_is_zero() {
        let m = linear_gaussian(0.5, 0.1, 1.0, 0.1).unwrap();
        let grid = uniform_grid(-1.0, 1.0, 21);
        assert_eq!(grid_rmse(&m, |x| 0.5 * x, &grid).unwrap(), 0.0);
        let off = grid_rmse(&m, |x| 0.5 * x + 0.1, &grid).unwrap();
        assert!((off - 0.1).abs() < 1e-12);
    }
}
