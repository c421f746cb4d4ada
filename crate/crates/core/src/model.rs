//! The parametric state-space model
//!
//! ```text
//! x[t+1] = Γf · z(x[t], u[t]) + w[t],   w ~ N(0, Q)
//! y[t]   = Γg · z(x[t], u[t]) + e[t],   e ~ N(0, R)
//! ```
//!
//! where `z = [φx(x); φu(u)]` stacks the state and input basis features, so
//! `Γf = [A B]` and `Γg = [C D]`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, BasisSet};
use crate::error::{Error, Result};
use crate::gaussian::Gaussian;

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub n_x: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub basis_x: BasisSet,
    pub basis_u: BasisSet,
    /// `[A B]`, `n_x × (m_x + m_u)`.
    pub gamma_f: DMatrix<f64>,
    /// `[C D]`, `n_y × (m_x + m_u)`.
    pub gamma_g: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub init_mean: DVector<f64>,
    pub init_cov: DMatrix<f64>,
}

impl ModelParams {
    /// A model with zero coefficients, identity noise and `p(x1) = N(0, I)`.
    pub fn zeros(n_x: usize, n_u: usize, n_y: usize, basis_x: BasisSet, basis_u: BasisSet) -> Self {
        let q = basis_x.feature_count() + basis_u.feature_count();
        ModelParams {
            n_x,
            n_u,
            n_y,
            basis_x,
            basis_u,
            gamma_f: DMatrix::zeros(n_x, q),
            gamma_g: DMatrix::zeros(n_y, q),
            q: DMatrix::identity(n_x, n_x),
            r: DMatrix::identity(n_y, n_y),
            init_mean: DVector::zeros(n_x),
            init_cov: DMatrix::identity(n_x, n_x),
        }
    }

    /// Default starting point for identification: zero coefficients except
    /// `0.5·I` on a linear block over the full state, and `Q = R = s·I`
    /// where `s` is the mean output variance of `data`.
    pub fn initial_guess(
        n_x: usize,
        basis_x: BasisSet,
        basis_u: BasisSet,
        data: &Dataset,
    ) -> Self {
        let mut model = ModelParams::zeros(n_x, data.n_u(), data.n_y(), basis_x, basis_u);
        let mut offset = 0;
        for block in &model.basis_x.blocks {
            let reads_state_in_order = match &block.inputs {
                None => true,
                Some(sel) => sel.iter().copied().eq(0..n_x),
            };
            if block.spec.kind == BasisKind::Linear && block.spec.dims == n_x && reads_state_in_order
            {
                for i in 0..n_x {
                    model.gamma_f[(i, offset + i)] = 0.5;
                }
                break;
            }
            offset += block.spec.feature_count();
        }
        let scale = data.output_variance();
        let scale = if scale.is_finite() && scale > 0.0 { scale } else { 1.0 };
        model.q = DMatrix::identity(n_x, n_x) * scale;
        model.r = DMatrix::identity(data.n_y(), data.n_y()) * scale;
        model
    }

    pub fn m_x(&self) -> usize {
        self.basis_x.feature_count()
    }

    pub fn m_u(&self) -> usize {
        self.basis_u.feature_count()
    }

    pub fn regressor_len(&self) -> usize {
        self.m_x() + self.m_u()
    }

    /// Checks every type invariant, naming the first one that fails.
    pub fn validate(&self) -> Result<()> {
        self.basis_x.validate(self.n_x)?;
        self.basis_u.validate(self.n_u)?;
        let q = self.regressor_len();
        check_shape("Gamma_f", &self.gamma_f, self.n_x, q)?;
        check_shape("Gamma_g", &self.gamma_g, self.n_y, q)?;
        check_shape("Q", &self.q, self.n_x, self.n_x)?;
        check_shape("R", &self.r, self.n_y, self.n_y)?;
        check_shape("init_cov", &self.init_cov, self.n_x, self.n_x)?;
        if self.init_mean.len() != self.n_x {
            return Err(Error::Dimension {
                what: "init_mean",
                expected: self.n_x,
                got: self.init_mean.len(),
            });
        }
        let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        if !(finite(&self.gamma_f) && finite(&self.gamma_g) && self.init_mean.iter().all(|v| v.is_finite())) {
            return Err(Error::Invariant("coefficients finite".into()));
        }
        for (name, m) in [("Q", &self.q), ("R", &self.r), ("init_cov", &self.init_cov)] {
            check_covariance(name, m)?;
        }
        Ok(())
    }

    /// `z = [φx(x); φu(u)]`.
    pub fn regressor(&self, x: &[f64], u: &[f64]) -> Result<DVector<f64>> {
        self.check_xu(x, u)?;
        let mut z = DVector::zeros(self.regressor_len());
        self.regressor_into(x, u, z.as_mut_slice());
        Ok(z)
    }

    pub(crate) fn regressor_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        let m_x = self.m_x();
        self.basis_x.eval_into(x, &mut out[..m_x]);
        if !self.basis_u.is_empty() {
            self.basis_u.eval_into(u, &mut out[m_x..]);
        }
    }

    pub fn step_mean(&self, x: &[f64], u: &[f64]) -> Result<DVector<f64>> {
        Ok(&self.gamma_f * self.regressor(x, u)?)
    }

    pub fn obs_mean(&self, x: &[f64], u: &[f64]) -> Result<DVector<f64>> {
        Ok(&self.gamma_g * self.regressor(x, u)?)
    }

    /// The state-only part `f_x(x) = A·φx(x)` of the transition.
    pub fn state_fn_x(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_xu(x, &vec![0.0; self.n_u])?;
        let phi = self.basis_x.eval(x);
        Ok(self.gamma_f.columns(0, self.m_x()) * phi)
    }

    fn check_xu(&self, x: &[f64], u: &[f64]) -> Result<()> {
        if x.len() != self.n_x {
            return Err(Error::Dimension {
                what: "state",
                expected: self.n_x,
                got: x.len(),
            });
        }
        if u.len() != self.n_u {
            return Err(Error::Dimension {
                what: "input",
                expected: self.n_u,
                got: u.len(),
            });
        }
        Ok(())
    }
}

fn check_shape(name: &'static str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows {
        return Err(Error::Dimension {
            what: name,
            expected: rows,
            got: m.nrows(),
        });
    }
    if m.ncols() != cols {
        return Err(Error::Dimension {
            what: name,
            expected: cols,
            got: m.ncols(),
        });
    }
    Ok(())
}

pub(crate) fn check_covariance(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invariant(format!("{name} finite")));
    }
    let scale = m.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::Invariant(format!("{name} symmetric")));
            }
        }
    }
    let min_eig = m.clone().symmetric_eigenvalues().min();
    if m.nrows() > 0 && !(min_eig > 0.0) {
        return Err(Error::Invariant(format!("{name} positive definite")));
    }
    Ok(())
}

/// Which coefficients of one equation are learned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowStructure {
    pub learn_mask: Vec<bool>,
    /// Values used where `learn_mask` is false.
    pub fixed_row: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquationStructure {
    pub rows: Vec<RowStructure>,
    /// Whether the noise covariance (Q or R) is re-estimated.
    pub learn_noise: bool,
}

impl EquationStructure {
    pub fn learn_all(p: usize, q: usize) -> Self {
        EquationStructure {
            rows: (0..p)
                .map(|_| RowStructure {
                    learn_mask: vec![true; q],
                    fixed_row: vec![0.0; q],
                })
                .collect(),
            learn_noise: true,
        }
    }

    /// Every coefficient fixed to `gamma` and the noise not learned.
    pub fn known(gamma: &DMatrix<f64>) -> Self {
        Self::masked(gamma, &DMatrix::from_element(gamma.nrows(), gamma.ncols(), false), false)
    }

    /// `mask[(r, c)]` true means learned; fixed entries are taken from `gamma`.
    pub fn masked(gamma: &DMatrix<f64>, mask: &DMatrix<bool>, learn_noise: bool) -> Self {
        EquationStructure {
            rows: (0..gamma.nrows())
                .map(|r| RowStructure {
                    learn_mask: mask.row(r).iter().copied().collect(),
                    fixed_row: gamma.row(r).iter().copied().collect(),
                })
                .collect(),
            learn_noise,
        }
    }

    pub fn is_known(&self) -> bool {
        !self.learn_noise && self.rows.iter().all(|r| r.learn_mask.iter().all(|&b| !b))
    }

    pub fn learns_coefficients(&self) -> bool {
        self.rows.iter().any(|r| r.learn_mask.iter().any(|&b| b))
    }

    pub fn validate(&self, p: usize, q: usize) -> Result<()> {
        if self.rows.len() != p {
            return Err(Error::Dimension {
                what: "structure rows",
                expected: p,
                got: self.rows.len(),
            });
        }
        for row in &self.rows {
            if row.learn_mask.len() != q {
                return Err(Error::Dimension {
                    what: "structure mask",
                    expected: q,
                    got: row.learn_mask.len(),
                });
            }
            if row.fixed_row.len() != q {
                return Err(Error::Dimension {
                    what: "structure fixed row",
                    expected: q,
                    got: row.fixed_row.len(),
                });
            }
            if row.fixed_row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invariant("fixed_row finite".into()));
            }
        }
        Ok(())
    }

    /// Overwrites the fixed entries of `gamma` with their configured values.
    pub fn apply_fixed(&self, gamma: &mut DMatrix<f64>) {
        for (r, row) in self.rows.iter().enumerate() {
            for (c, (&learn, &v)) in row.learn_mask.iter().zip(&row.fixed_row).enumerate() {
                if !learn {
                    gamma[(r, c)] = v;
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureSpec {
    pub state: EquationStructure,
    pub measurement: EquationStructure,
}

impl StructureSpec {
    pub fn learn_all(model: &ModelParams) -> Self {
        let q = model.regressor_len();
        StructureSpec {
            state: EquationStructure::learn_all(model.n_x, q),
            measurement: EquationStructure::learn_all(model.n_y, q),
        }
    }

    /// Learns the state equation; the measurement equation is taken as known.
    pub fn known_measurement(model: &ModelParams) -> Self {
        StructureSpec {
            state: EquationStructure::learn_all(model.n_x, model.regressor_len()),
            measurement: EquationStructure::known(&model.gamma_g),
        }
    }

    pub fn validate(&self, model: &ModelParams) -> Result<()> {
        let q = model.regressor_len();
        self.state.validate(model.n_x, q)?;
        self.measurement.validate(model.n_y, q)
    }
}

/// Input-output record; `u` has zero columns for autonomous systems.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub u: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

impl Dataset {
    pub fn new(u: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        if u.nrows() != y.nrows() {
            return Err(Error::Dimension {
                what: "input rows",
                expected: y.nrows(),
                got: u.nrows(),
            });
        }
        if u.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("dataset values must be finite".into()));
        }
        Ok(Dataset { u, y })
    }

    pub fn autonomous(y: DMatrix<f64>) -> Result<Self> {
        let t = y.nrows();
        Self::new(DMatrix::zeros(t, 0), y)
    }

    pub fn len(&self) -> usize {
        self.y.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.y.nrows() == 0
    }

    pub fn n_u(&self) -> usize {
        self.u.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.y.ncols()
    }

    pub fn u_at(&self, t: usize) -> Vec<f64> {
        self.u.row(t).iter().copied().collect()
    }

    pub fn y_at(&self, t: usize) -> Vec<f64> {
        self.y.row(t).iter().copied().collect()
    }

    /// Mean over output channels of the per-channel sample variance.
    pub fn output_variance(&self) -> f64 {
        let t = self.len() as f64;
        if self.n_y() == 0 || t < 2.0 {
            return f64::NAN;
        }
        let total: f64 = self
            .y
            .column_iter()
            .map(|c| {
                let mean = c.mean();
                c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0)
            })
            .sum();
        total / self.n_y() as f64
    }

    /// Largest absolute output value.
    pub fn max_abs_output(&self) -> f64 {
        self.y.iter().fold(0.0, |a: f64, v| a.max(v.abs()))
    }
}

/// State and output trajectories, one row per time step.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

/// Runs the model forward from `x1` over the rows of `inputs` (`T × n_u`).
///
/// Without noise the result is deterministic and does not depend on `seed`.
pub fn simulate(
    model: &ModelParams,
    inputs: &DMatrix<f64>,
    x1: &[f64],
    seed: u64,
    with_noise: bool,
) -> Result<Simulation> {
    model.validate()?;
    if inputs.ncols() != model.n_u {
        return Err(Error::Dimension {
            what: "input columns",
            expected: model.n_u,
            got: inputs.ncols(),
        });
    }
    if x1.len() != model.n_x {
        return Err(Error::Dimension {
            what: "initial state",
            expected: model.n_x,
            got: x1.len(),
        });
    }
    let steps = inputs.nrows();
    let (n_x, n_y) = (model.n_x, model.n_y);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Gaussian::new(&model.q, "Q")?;
    let e = Gaussian::new(&model.r, "R")?;
    let mut xs = DMatrix::zeros(steps, n_x);
    let mut ys = DMatrix::zeros(steps, n_y);
    let mut z = vec![0.0; model.regressor_len()];
    let mut x = x1.to_vec();
    let mut next = vec![0.0; n_x];
    let mut obs = vec![0.0; n_y];
    for t in 0..steps {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                time: t,
                iteration: None,
            });
        }
        let u: Vec<f64> = inputs.row(t).iter().copied().collect();
        model.regressor_into(&x, &u, &mut z);
        let mean_y = mat_vec(&model.gamma_g, &z);
        if with_noise {
            e.sample_into(&mut rng, &mean_y, &mut obs);
        } else {
            obs.copy_from_slice(&mean_y);
        }
        for i in 0..n_x {
            xs[(t, i)] = x[i];
        }
        for j in 0..n_y {
            ys[(t, j)] = obs[j];
        }
        let mean_x = mat_vec(&model.gamma_f, &z);
        if with_noise {
            w.sample_into(&mut rng, &mean_x, &mut next);
        } else {
            next.copy_from_slice(&mean_x);
        }
        std::mem::swap(&mut x, &mut next);
    }
    Ok(Simulation { x: xs, y: ys })
}

pub(crate) fn mat_vec(m: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows()];
    mat_vec_into(m, z, &mut out);
    out
}

/// `out = m·z`, walking `m` column by column.
pub(crate) fn mat_vec_into(m: &DMatrix<f64>, z: &[f64], out: &mut [f64]) {
    let rows = m.nrows();
    if rows == 1 {
        out[0] = m.as_slice().iter().zip(z).map(|(a, b)| a * b).sum();
        return;
    }
    out.fill(0.0);
    for (col, &zc) in m.as_slice().chunks_exact(rows).zip(z) {
        if zc != 0.0 {
            for (o, &v) in out.iter_mut().zip(col) {
                *o += v * zc;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub mean_error: f64,
    /// Population standard deviation of the error.
    pub std_error: f64,
    pub rmse: f64,
}

/// Error statistics of `y_true - y_sim` over all entries.
pub fn metrics(y_true: &DMatrix<f64>, y_sim: &DMatrix<f64>) -> Result<ErrorMetrics> {
    if y_true.shape() != y_sim.shape() {
        return Err(Error::Dimension {
            what: "simulated output length",
            expected: y_true.len(),
            got: y_sim.len(),
        });
    }
    let n = y_true.len();
    if n == 0 {
        return Err(Error::InvalidArgument("metrics of an empty signal".into()));
    }
    let n = n as f64;
    let err = y_true - y_sim;
    let mean = err.sum() / n;
    let ms = err.iter().map(|e| e * e).sum::<f64>() / n;
    let var = err.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    Ok(ErrorMetrics {
        mean_error: mean,
        std_error: var.sqrt(),
        rmse: ms.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisSpec, Composition};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn scalar_linear(a: f64) -> ModelParams {
        let mut m = ModelParams::zeros(1, 0, 1, BasisSpec::linear(1).into(), BasisSet::empty());
        m.gamma_f[(0, 0)] = a;
        m.gamma_g[(0, 0)] = 1.0;
        m
    }

    #[test]
    fn regressor_examples() {
        let m = ModelParams::zeros(1, 0, 1, BasisSpec::fourier(3, 2.0).into(), BasisSet::empty());
        assert_eq!(m.regressor(&[0.0], &[]).unwrap().as_slice(), &[1.0, 1.0, 0.0]);

        let m = ModelParams::zeros(1, 1, 1, BasisSpec::linear(1).into(), BasisSpec::linear(1).into());
        assert_eq!(m.regressor(&[2.0], &[-1.0]).unwrap().as_slice(), &[2.0, -1.0]);
        assert!(matches!(m.regressor(&[2.0], &[]), Err(Error::Dimension { .. })));

        let spec = BasisSpec::fourier_nd(3, 2.0, 2, Composition::TensorProduct);
        let m = ModelParams::zeros(2, 0, 1, spec.into(), BasisSet::empty());
        let z = m.regressor(&[0.0, 0.0], &[]).unwrap();
        let oracle: Vec<f64> = (0..3)
            .flat_map(|i| (0..3).map(move |j| [1.0, 1.0, 0.0][i] * [1.0, 1.0, 0.0][j]))
            .collect();
        assert_eq!(z.as_slice(), oracle.as_slice());
    }

    #[test]
    fn step_and_obs_means() {
        let m = scalar_linear(0.5);
        assert_eq!(m.step_mean(&[2.0], &[]).unwrap()[0], 1.0);
        assert_eq!(m.obs_mean(&[2.0], &[]).unwrap()[0], 2.0);
        let zero = scalar_linear(0.0);
        assert_eq!(zero.step_mean(&[13.0], &[]).unwrap()[0], 0.0);
    }

    #[test]
    fn fourier_fit_matches_grid_least_squares() {
        // Fit f(x) = -10x/(1+3x²) with 6 Fourier functions by least squares on
        // one grid, then check step_mean against an independent normal-equation
        // solve on a finer grid.
        let f = |x: f64| -10.0 * x / (1.0 + 3.0 * x * x);
        let basis = BasisSpec::fourier(6, 2.0);
        let fit = |n: usize| {
            let xs: Vec<f64> = (0..n).map(|i| -1.5 + 3.0 * i as f64 / (n - 1) as f64).collect();
            let phi = DMatrix::from_fn(n, 6, |i, j| basis.eval_features(&[xs[i]]).unwrap()[j]);
            let target = DVector::from_iterator(n, xs.iter().map(|&x| f(x)));
            let normal = phi.transpose() * &phi;
            normal.cholesky().unwrap().solve(&(phi.transpose() * target))
        };
        let coarse = fit(301);
        let fine = fit(3001);
        let mut m = ModelParams::zeros(1, 0, 1, basis.clone().into(), BasisSet::empty());
        m.gamma_f = DMatrix::from_row_slice(1, 6, coarse.as_slice());
        let mut sup: f64 = 0.0;
        for i in 0..=300 {
            let x = -1.5 + 3.0 * i as f64 / 300.0;
            let oracle = (basis.eval_features(&[x]).unwrap().transpose() * &fine)[0];
            sup = sup.max((m.step_mean(&[x], &[]).unwrap()[0] - oracle).abs());
        }
        assert!(sup < 2e-2, "sup-norm {sup}");
    }

    #[test]
    fn simulate_geometric_decay() {
        let m = scalar_linear(0.5);
        let sim = simulate(&m, &DMatrix::zeros(4, 0), &[1.0], 7, false).unwrap();
        assert_eq!(sim.x.as_slice(), &[1.0, 0.5, 0.25, 0.125]);
        let mut zero = scalar_linear(0.0);
        zero.gamma_g[(0, 0)] = 0.0;
        let sim = simulate(&zero, &DMatrix::zeros(5, 0), &[3.0], 1, false).unwrap();
        assert!(sim.y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn simulate_noise_free_is_seed_independent() {
        let m = scalar_linear(0.9);
        let a = simulate(&m, &DMatrix::zeros(20, 0), &[1.0], 1, false).unwrap();
        let b = simulate(&m, &DMatrix::zeros(20, 0), &[1.0], 99, false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn simulate_matches_matrix_power() {
        let a = DMatrix::from_row_slice(2, 2, &[0.9, 0.2, -0.1, 0.7]);
        let mut m = ModelParams::zeros(2, 0, 2, BasisSpec::linear(2).into(), BasisSet::empty());
        m.gamma_f = a.clone();
        m.gamma_g = DMatrix::identity(2, 2);
        let sim = simulate(&m, &DMatrix::zeros(30, 0), &[1.0, -2.0], 0, false).unwrap();
        let mut x = DVector::from_vec(vec![1.0, -2.0]);
        for t in 0..30 {
            assert_abs_diff_eq!(sim.x[(t, 0)], x[0], epsilon = 1e-10);
            assert_abs_diff_eq!(sim.x[(t, 1)], x[1], epsilon = 1e-10);
            x = &a * x;
        }
    }

    #[test]
    fn simulate_reports_divergence() {
        let m = scalar_linear(1e200);
        let err = simulate(&m, &DMatrix::zeros(10, 0), &[1e200], 0, false).unwrap_err();
        assert!(matches!(err, Error::Divergence { time: 1, .. }), "{err:?}");
    }

    #[test]
    fn metrics_examples() {
        let y = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let m = metrics(&y, &y).unwrap();
        assert_eq!((m.mean_error, m.std_error, m.rmse), (0.0, 0.0, 0.0));
        let m = metrics(
            &DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            &DMatrix::zeros(2, 1),
        )
        .unwrap();
        assert_eq!(m.mean_error, 0.0);
        assert_eq!(m.rmse, 1.0);
        assert!(metrics(&y, &DMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn metrics_match_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..100).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..100).map(|_| rng.random_range(-2.0..2.0)).collect();
        let m = metrics(&DMatrix::from_vec(100, 1, a.clone()), &DMatrix::from_vec(100, 1, b.clone())).unwrap();
        let e: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let mean = e.iter().sum::<f64>() / 100.0;
        let mut sq = 0.0;
        let mut dev = 0.0;
        for v in &e {
            sq += v * v;
            dev += (v - mean) * (v - mean);
        }
        assert_abs_diff_eq!(m.mean_error, mean, epsilon = 1e-12);
        assert_abs_diff_eq!(m.rmse, (sq / 100.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(m.std_error, (dev / 100.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn validate_names_invariant() {
        let mut m = scalar_linear(0.5);
        m.q[(0, 0)] = -1.0;
        assert!(m.validate().unwrap_err().to_string().contains("Q positive definite"));
        let mut m = scalar_linear(0.5);
        m.gamma_f = DMatrix::zeros(1, 3);
        assert!(matches!(m.validate(), Err(Error::Dimension { .. })));
    }

    #[test]
    fn initial_guess_stabilizes_linear_block() {
        let y = DMatrix::from_row_slice(4, 1, &[1.0, -1.0, 1.0, -1.0]);
        let data = Dataset::autonomous(y).unwrap();
        let basis = BasisSet::from(BasisSpec::fourier(3, 2.0)).with_block(BasisSpec::linear(1), None);
        let m = ModelParams::initial_guess(1, basis, BasisSet::empty(), &data);
        assert_eq!(m.gamma_f.as_slice(), &[0.0, 0.0, 0.0, 0.5]);
        assert_abs_diff_eq!(m.q[(0, 0)], 4.0 / 3.0, epsilon = 1e-15);
        m.validate().unwrap();
    }

    proptest! {
        #[test]
        fn regressor_length_is_constant(x in -10.0f64..10.0, u in -10.0f64..10.0, m in 1usize..20) {
            let model = ModelParams::zeros(1, 1, 1, BasisSpec::fourier(m, 3.0).into(), BasisSpec::linear(1).into());
            prop_assert_eq!(model.regressor(&[x], &[u]).unwrap().len(), m + 1);
        }
    }
}
