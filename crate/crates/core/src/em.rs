//! Particle stochastic approximation EM.
//!
//! Each iteration runs one CPF-AS sweep under the current parameters,
//! forms the weighted second moments of responses `ζ` and regressors `z`
//!
//! ```text
//! Φ = E[ζζᵀ]   Ψ = E[ζzᵀ]   Σ = E[zzᵀ]
//! ```
//!
//! averages them into running statistics with step size `γ_k`, and solves
//! the ridge-regularized regression in closed form:
//!
//! ```text
//! Γ = Ψ (Σ + P/T)⁻¹
//! Π = Φ − ΨΓᵀ − ΓΨᵀ + ΓΣΓᵀ
//! ```
//!
//! The state equation uses `ζ_t = x_{t+1}`, the measurement equation
//! `ζ_t = y_t`; the two are maximized independently.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{DiagonalPrecision, PriorSpec};
use crate::error::{Error, Result};
use crate::model::{Dataset, EquationStructure, ModelParams, StructureSpec};
use crate::smc::{cpf_as_with, ParticleSystem, Resampling};

/// Eigenvalue floor applied to every estimated noise covariance.
pub const COVARIANCE_FLOOR: f64 = 1e-9;

/// Relative pivot size below which a ridge system is treated as singular.
const PIVOT_TOL: f64 = 1e-13;

/// Step sizes `γ_k = 1` for `k ≤ burn_in + 1`, then `(k − burn_in)^−exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaSchedule {
    pub exponent: f64,
    #[serde(default)]
    pub burn_in: usize,
}

impl Default for GammaSchedule {
    fn default() -> Self {
        GammaSchedule {
            exponent: 0.7,
            burn_in: 0,
        }
    }
}

impl GammaSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.exponent > 0.5 && self.exponent <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma exponent must lie in (0.5, 1], got {}",
                self.exponent
            )));
        }
        Ok(())
    }

    /// `k` is 1-based.
    pub fn value(&self, k: usize) -> f64 {
        assert!(k >= 1, "iterations are numbered from 1");
        if k <= self.burn_in + 1 {
            1.0
        } else {
            ((k - self.burn_in) as f64).powf(-self.exponent)
        }
    }
}

pub fn gamma_value(schedule: &GammaSchedule, k: usize) -> f64 {
    schedule.value(k)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    State,
    Measurement,
}

impl Equation {
    pub fn name(self) -> &'static str {
        match self {
            Equation::State => "state",
            Equation::Measurement => "measurement",
        }
    }
}

/// Running second moments for one equation: `Φ` is `p × p`, `Ψ` is `p × q`,
/// `Σ` is `q × q`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuffStats {
    pub phi: DMatrix<f64>,
    pub psi: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
}

impl SuffStats {
    pub fn zeros(p: usize, q: usize) -> Self {
        SuffStats {
            phi: DMatrix::zeros(p, p),
            psi: DMatrix::zeros(p, q),
            sigma: DMatrix::zeros(q, q),
        }
    }

    pub fn response_dim(&self) -> usize {
        self.phi.nrows()
    }

    pub fn regressor_dim(&self) -> usize {
        self.sigma.nrows()
    }
}

/// Weighted moments of one sweep's particle system, scaled by `1/T`.
///
/// Every trajectory `i` carries the final weight `w_T⁽ⁱ⁾` at all times.
/// Trajectories that coalesce share their early states, so equal lineage
/// entries are merged before accumulating.
pub fn iteration_stats(
    system: &ParticleSystem,
    model: &ModelParams,
    data: &Dataset,
    equation: Equation,
) -> Result<SuffStats> {
    if system.len() != data.len() {
        return Err(Error::Dimension {
            what: "particle system length",
            expected: data.len(),
            got: system.len(),
        });
    }
    if system.state_dim() != model.n_x {
        return Err(Error::Dimension {
            what: "particle state dimension",
            expected: model.n_x,
            got: system.state_dim(),
        });
    }
    if data.n_u() != model.n_u || data.n_y() != model.n_y {
        return Err(Error::Dimension {
            what: "dataset columns",
            expected: model.n_u + model.n_y,
            got: data.n_u() + data.n_y(),
        });
    }
    let t_len = data.len();
    let n = system.num_particles();
    let q = model.regressor_len();
    let p = match equation {
        Equation::State => model.n_x,
        Equation::Measurement => model.n_y,
    };
    let w = system.final_weights();
    let steps = match equation {
        Equation::State => t_len.saturating_sub(1),
        Equation::Measurement => t_len,
    };
    // One column per merged (state, successor) pair: the regressor, the
    // response, and both scaled by the pair's total weight.
    let mut zs: Vec<f64> = Vec::with_capacity(steps * q);
    let mut wzs: Vec<f64> = Vec::with_capacity(steps * q);
    let mut zetas: Vec<f64> = Vec::with_capacity(steps * p);
    let mut wzetas: Vec<f64> = Vec::with_capacity(steps * p);
    let mut z = vec![0.0; q];
    let mut groups: Vec<(usize, usize, f64)> = Vec::with_capacity(n);
    let mut u = vec![0.0; data.n_u()];
    let mut y = vec![0.0; data.n_y()];
    for t in 0..steps {
        groups.clear();
        for i in 0..n {
            let a = system.lineage(t, i);
            let b = match equation {
                Equation::State => system.lineage(t + 1, i),
                Equation::Measurement => 0,
            };
            groups.push((a, b, w[i]));
        }
        groups.sort_unstable_by_key(|&(a, b, _)| (a, b));
        for (dst, &v) in u.iter_mut().zip(data.u.row(t).iter()) {
            *dst = v;
        }
        for (dst, &v) in y.iter_mut().zip(data.y.row(t).iter()) {
            *dst = v;
        }
        let mut k = 0;
        while k < groups.len() {
            let (a, b, mut weight) = groups[k];
            k += 1;
            while k < groups.len() && groups[k].0 == a && groups[k].1 == b {
                weight += groups[k].2;
                k += 1;
            }
            if weight == 0.0 {
                continue;
            }
            model.regressor_into(system.particle(t, a), &u, &mut z);
            let zeta = match equation {
                Equation::State => system.particle(t + 1, b),
                Equation::Measurement => &y,
            };
            zs.extend_from_slice(&z);
            wzs.extend(z.iter().map(|v| weight * v));
            zetas.extend_from_slice(zeta);
            wzetas.extend(zeta.iter().map(|v| weight * v));
        }
    }
    let cols = zs.len() / q.max(1);
    if cols == 0 || q == 0 {
        return Ok(SuffStats::zeros(p, q));
    }
    let zs = DMatrix::from_vec(q, cols, zs).transpose();
    let wzs = DMatrix::from_vec(q, cols, wzs);
    let zetas = DMatrix::from_vec(p, cols, zetas).transpose();
    let wzetas = DMatrix::from_vec(p, cols, wzetas);
    let scale = 1.0 / t_len as f64;
    let symmetric = |m: DMatrix<f64>| (&m + m.transpose()) * (0.5 * scale);
    Ok(SuffStats {
        phi: symmetric(&wzetas * &zetas),
        psi: &wzetas * &zs * scale,
        sigma: symmetric(&wzs * &zs),
    })
}

/// `(1 − γ)·old + γ·new`, field by field.
pub fn blend_stats(old: &SuffStats, new: &SuffStats, gamma_k: f64) -> Result<SuffStats> {
    if old.phi.shape() != new.phi.shape() || old.psi.shape() != new.psi.shape() {
        return Err(Error::Dimension {
            what: "sufficient statistics",
            expected: old.psi.len(),
            got: new.psi.len(),
        });
    }
    if !(gamma_k > 0.0 && gamma_k <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "step size must lie in (0, 1], got {gamma_k}"
        )));
    }
    if gamma_k == 1.0 {
        return Ok(new.clone());
    }
    let keep = 1.0 - gamma_k;
    Ok(SuffStats {
        phi: &old.phi * keep + &new.phi * gamma_k,
        psi: &old.psi * keep + &new.psi * gamma_k,
        sigma: &old.sigma * keep + &new.sigma * gamma_k,
    })
}

/// Result of one closed-form maximization.
#[derive(Clone, Debug, PartialEq)]
pub struct MStep {
    /// Coefficients, `p × q`.
    pub gamma: DMatrix<f64>,
    /// Noise covariance estimate, `p × p`, symmetric with eigenvalues ≥ 1e-9.
    pub pi: DMatrix<f64>,
    /// Number of eigenvalues raised to [`COVARIANCE_FLOOR`].
    pub floored: usize,
}

/// Ridge M-step for one equation.
///
/// Rows learning every column share one Cholesky factorization of
/// `Σ + P/T`. Masked rows solve the same system restricted to their active
/// columns, with the fixed entries moved to the right-hand side.
pub fn m_step(
    stats: &SuffStats,
    precision: &DiagonalPrecision,
    t_len: usize,
    structure: &EquationStructure,
    equation: Equation,
) -> Result<MStep> {
    let (p, q) = (stats.response_dim(), stats.regressor_dim());
    if precision.len() != q {
        return Err(Error::Dimension {
            what: "prior precision",
            expected: q,
            got: precision.len(),
        });
    }
    if t_len == 0 {
        return Err(Error::InvalidArgument("data length must be positive".into()));
    }
    structure.validate(p, q)?;
    let mut system = stats.sigma.clone();
    for (c, &pc) in precision.diagonal().iter().enumerate() {
        system[(c, c)] += pc / t_len as f64;
    }

    let mut gamma = DMatrix::zeros(p, q);
    let full: Vec<usize> = (0..p)
        .filter(|&r| structure.rows[r].learn_mask.iter().all(|&b| b))
        .collect();
    if !full.is_empty() {
        let chol = factor(&system, equation, full[0])?;
        let rhs = DMatrix::from_fn(q, full.len(), |c, k| stats.psi[(full[k], c)]);
        let sol = chol.solve(&rhs);
        for (k, &r) in full.iter().enumerate() {
            for c in 0..q {
                gamma[(r, c)] = sol[(c, k)];
            }
        }
    }
    for (r, row) in structure.rows.iter().enumerate() {
        if full.contains(&r) {
            continue;
        }
        let active: Vec<usize> = (0..q).filter(|&c| row.learn_mask[c]).collect();
        let fixed: Vec<usize> = (0..q).filter(|&c| !row.learn_mask[c]).collect();
        for &c in &fixed {
            gamma[(r, c)] = row.fixed_row[c];
        }
        if active.is_empty() {
            continue;
        }
        let sub = system.select_rows(&active).select_columns(&active);
        let rhs = DVector::from_iterator(
            active.len(),
            active.iter().map(|&a| {
                stats.psi[(r, a)]
                    - fixed
                        .iter()
                        .map(|&f| stats.sigma[(a, f)] * row.fixed_row[f])
                        .sum::<f64>()
            }),
        );
        let sol = factor(&sub, equation, r)?.solve(&rhs);
        for (k, &a) in active.iter().enumerate() {
            gamma[(r, a)] = sol[k];
        }
    }

    let psi_gt = &stats.psi * gamma.transpose();
    let raw = &stats.phi - &psi_gt - psi_gt.transpose() + &gamma * &stats.sigma * gamma.transpose();
    let (pi, floored) = floor_covariance(&raw);
    Ok(MStep { gamma, pi, floored })
}

fn factor(
    m: &DMatrix<f64>,
    equation: Equation,
    row: usize,
) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let deficient = || Error::RankDeficient {
        equation: equation.name(),
        row,
    };
    let chol = m.clone().cholesky().ok_or_else(deficient)?;
    let max_diag = m.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |a, v| a.min(v * v));
    if !(min_pivot > PIVOT_TOL * max_diag) {
        return Err(deficient());
    }
    Ok(chol)
}

/// Symmetrizes and raises eigenvalues below [`COVARIANCE_FLOOR`].
fn floor_covariance(raw: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let sym = (raw + raw.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let floored = eig.eigenvalues.iter().filter(|&&v| !(v >= COVARIANCE_FLOOR)).count();
    if floored == 0 {
        return (sym, 0);
    }
    let vals = eig.eigenvalues.map(|v| if v >= COVARIANCE_FLOOR { v } else { COVARIANCE_FLOOR });
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    ((&out + out.transpose()) * 0.5, floored)
}

/// Run controls for [`psaem_identify`].
#[derive(Clone, Debug)]
pub struct PsaemConfig {
    pub particles: usize,
    pub iterations: usize,
    pub gamma: GammaSchedule,
    pub prior: PriorSpec,
    pub structure: StructureSpec,
    pub seed: u64,
    pub init_model: ModelParams,
    /// Keep every `trace_period`-th parameter set; 0 keeps none.
    pub trace_period: usize,
    pub resampling: Resampling,
    /// Initial conditional trajectory (`T × n_x`); zeros when absent.
    pub init_trajectory: Option<DMatrix<f64>>,
}

impl PsaemConfig {
    /// Learns everything with default schedule and no prior.
    pub fn new(init_model: ModelParams, particles: usize, iterations: usize, seed: u64) -> Self {
        let structure = StructureSpec::learn_all(&init_model);
        PsaemConfig {
            particles,
            iterations,
            gamma: GammaSchedule::default(),
            prior: PriorSpec::none(),
            structure,
            seed,
            init_model,
            trace_period: 0,
            resampling: Resampling::Multinomial,
            init_trajectory: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::InvalidArgument("particle count must be at least 1".into()));
        }
        self.gamma.validate()?;
        self.prior.validate()?;
        self.init_model.validate()?;
        self.structure.validate(&self.init_model)
    }
}

/// Per-iteration diagnostics record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub gamma: f64,
    /// Trace of the state-noise estimate, when learned.
    pub state_pi_trace: Option<f64>,
    /// Trace of the measurement-noise estimate, when learned.
    pub measurement_pi_trace: Option<f64>,
    pub degenerate_steps: usize,
    pub floor_activations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub k: usize,
    pub model: ModelParams,
}

#[derive(Clone, Debug)]
pub struct PsaemResult {
    pub model: ModelParams,
    pub trace: Vec<TraceEntry>,
    pub records: Vec<IterationRecord>,
    /// Conditional trajectory after the last iteration.
    pub trajectory: DMatrix<f64>,
}

impl PsaemResult {
    pub fn degenerate_steps(&self) -> usize {
        self.records.iter().map(|r| r.degenerate_steps).sum()
    }

    pub fn floor_activations(&self) -> usize {
        self.records.iter().map(|r| r.floor_activations).sum()
    }
}

/// Identifies the model parameters from `data` by PSAEM.
///
/// Fixed coefficients of the structure are written into the initial model
/// before the first sweep; equations that are fully known are never
/// updated.
pub fn psaem_identify(data: &Dataset, config: &PsaemConfig) -> Result<PsaemResult> {
    psaem_identify_with(data, config, |_| {})
}

/// [`psaem_identify`] with a callback invoked after every iteration.
pub fn psaem_identify_with<F: FnMut(&IterationRecord)>(
    data: &Dataset,
    config: &PsaemConfig,
    mut on_iteration: F,
) -> Result<PsaemResult> {
    config.validate()?;
    let mut model = config.init_model.clone();
    if data.n_u() != model.n_u || data.n_y() != model.n_y {
        return Err(Error::Dimension {
            what: "dataset columns",
            expected: model.n_u + model.n_y,
            got: data.n_u() + data.n_y(),
        });
    }
    if data.is_empty() {
        return Err(Error::InvalidArgument("dataset is empty".into()));
    }
    let structure = &config.structure;
    structure.state.apply_fixed(&mut model.gamma_f);
    structure.measurement.apply_fixed(&mut model.gamma_g);

    let t_len = data.len();
    let q = model.regressor_len();
    let mut trajectory = match &config.init_trajectory {
        Some(x) => x.clone(),
        None => DMatrix::zeros(t_len, model.n_x),
    };
    let precision = model
        .basis_x
        .precision(&config.prior)?
        .concat(&model.basis_u.precision(&config.prior)?);
    let mut state_stats = SuffStats::zeros(model.n_x, q);
    let mut meas_stats = SuffStats::zeros(model.n_y, q);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trace = Vec::new();
    let mut records = Vec::with_capacity(config.iterations);

    for k in 1..=config.iterations {
        let (next, system) = cpf_as_with(
            &model,
            data,
            &trajectory,
            config.particles,
            config.resampling,
            &mut rng,
        )
        .map_err(|e| e.at_iteration(k))?;
        trajectory = next;
        let gamma = config.gamma.value(k);
        let mut record = IterationRecord {
            k,
            gamma,
            state_pi_trace: None,
            measurement_pi_trace: None,
            degenerate_steps: system.degenerate_steps(),
            floor_activations: 0,
        };
        let mut updated = model.clone();
        for (equation, eq_structure, stats) in [
            (Equation::State, &structure.state, &mut state_stats),
            (Equation::Measurement, &structure.measurement, &mut meas_stats),
        ] {
            if eq_structure.is_known() {
                continue;
            }
            let fresh = iteration_stats(&system, &model, data, equation)?;
            *stats = blend_stats(stats, &fresh, gamma)?;
            let step = m_step(stats, &precision, t_len, eq_structure, equation)?;
            record.floor_activations += step.floored;
            let (coeffs, noise, trace_slot) = match equation {
                Equation::State => (&mut updated.gamma_f, &mut updated.q, &mut record.state_pi_trace),
                Equation::Measurement => {
                    (&mut updated.gamma_g, &mut updated.r, &mut record.measurement_pi_trace)
                }
            };
            *coeffs = step.gamma;
            if eq_structure.learn_noise {
                *trace_slot = Some(step.pi.trace());
                *noise = step.pi;
            }
        }
        model = updated;
        on_iteration(&record);
        records.push(record);
        if config.trace_period > 0 && k % config.trace_period == 0 {
            trace.push(TraceEntry {
                k,
                model: model.clone(),
            });
        }
    }
    Ok(PsaemResult {
        model,
        trace,
        records,
        trajectory,
    })
}
