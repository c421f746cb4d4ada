//! Shared test oracles.

#![allow(dead_code)]

/// Smoothing marginals `p(x_t | y_1:T)` of the scalar model
/// `x' = a·x + w`, `y = c·x + e`, `w ~ N(0, q)`, `e ~ N(0, r)`,
/// `x_1 ~ N(m0, p0)`, by a Kalman filter and RTS backward pass.
pub struct ScalarSmoother {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

pub fn rts_smoother(a: f64, q: f64, c: f64, r: f64, m0: f64, p0: f64, y: &[f64]) -> ScalarSmoother {
    let n = y.len();
    let (mut mf, mut pf) = (vec![0.0; n], vec![0.0; n]);
    let (mut mp, mut pp) = (m0, p0);
    for t in 0..n {
        let s = c * c * pp + r;
        let k = pp * c / s;
        mf[t] = mp + k * (y[t] - c * mp);
        pf[t] = (1.0 - k * c) * pp;
        mp = a * mf[t];
        pp = a * a * pf[t] + q;
    }
    let (mut ms, mut ps) = (mf.clone(), pf.clone());
    for t in (0..n.saturating_sub(1)).rev() {
        let pred = a * a * pf[t] + q;
        let g = pf[t] * a / pred;
        ms[t] = mf[t] + g * (ms[t + 1] - a * mf[t]);
        ps[t] = pf[t] + g * g * (ps[t + 1] - pred);
    }
    ScalarSmoother { mean: ms, var: ps }
}

/// Sample mean and population variance.
pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n)
}

#[test]
fn smoother_with_one_sample_is_the_posterior() {
    // x ~ N(0, 1), y = x + e with r = 1: posterior N(y/2, 1/2)
    let s = rts_smoother(0.9, 0.1, 1.0, 1.0, 0.0, 1.0, &[3.0]);
    assert!((s.mean[0] - 1.5).abs() < 1e-15 && (s.var[0] - 0.5).abs() < 1e-15);
}

#[test]
fn smoother_matches_dense_gaussian_conditioning() {
    // joint Gaussian of (x_1..x_3, y_1..y_3), conditioned in closed form
    let (a, q, c, r): (f64, f64, f64, f64) = (0.8, 0.3, 1.5, 0.2);
    let y = [0.4, -1.0, 2.0];
    let mut cov_x = [[0.0; 3]; 3];
    let mut var = [1.0, 0.0, 0.0];
    for t in 1..3 {
        var[t] = a * a * var[t - 1] + q;
    }
    for i in 0..3 {
        for j in 0..3 {
            let (lo, hi) = (i.min(j), i.max(j));
            cov_x[i][j] = a.powi((hi - lo) as i32) * var[lo];
        }
    }
    let sxy = nalgebra::Matrix3::from_fn(|i, j| cov_x[i][j] * c);
    let syy = nalgebra::Matrix3::from_fn(|i, j| cov_x[i][j] * c * c + if i == j { r } else { 0.0 });
    let sxx = nalgebra::Matrix3::from_fn(|i, j| cov_x[i][j]);
    let inv = syy.try_inverse().unwrap();
    let mean = sxy * inv * nalgebra::Vector3::from(y);
    let post = sxx - sxy * inv * sxy.transpose();
    let s = rts_smoother(a, q, c, r, 0.0, 1.0, &y);
    for t in 0..3 {
        assert!((s.mean[t] - mean[t]).abs() < 1e-12);
        assert!((s.var[t] - post[(t, t)]).abs() < 1e-12);
    }
}
