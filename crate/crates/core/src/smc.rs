//! Conditional particle filter with ancestor sampling (CPF-AS).
//!
//! One call is a Markov kernel on state trajectories: the reference
//! trajectory is kept in the last particle slot, its ancestry is redrawn in
//! proportion to filter weight times transition density, and a new
//! trajectory is drawn from the final weights. Iterating the kernel yields a
//! particle Gibbs chain targeting the joint smoothing distribution.
//!
//! Particle indices are 0-based; the reference slot is `N - 1`. All weights
//! are handled in the log domain.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::model::{mat_vec, mat_vec_into, Dataset, ModelParams};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    #[default]
    Multinomial,
    Systematic,
}

/// Weighted trajectory ensemble produced by [`cpf_as`].
#[derive(Clone, Debug)]
pub struct ParticleSystem {
    n: usize,
    n_x: usize,
    t_len: usize,
    /// Generation-`t` particles, `T × N × n_x`.
    particles: Vec<f64>,
    /// `ancestors[t·N + i]`: parent (at `t`) of particle `i` at `t + 1`.
    ancestors: Vec<usize>,
    /// `lineage[t·N + i]`: generation-`t` particle on trajectory `i`.
    lineage: Vec<usize>,
    filter_weights: Vec<f64>,
    degenerate_steps: usize,
}

impl ParticleSystem {
    pub fn num_particles(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.t_len
    }

    pub fn is_empty(&self) -> bool {
        self.t_len == 0
    }

    pub fn state_dim(&self) -> usize {
        self.n_x
    }

    /// Particle `i` of generation `t`, before relinking.
    pub fn particle(&self, t: usize, i: usize) -> &[f64] {
        let start = (t * self.n + i) * self.n_x;
        &self.particles[start..start + self.n_x]
    }

    /// State of trajectory `i` at time `t`.
    pub fn state(&self, t: usize, i: usize) -> &[f64] {
        self.particle(t, self.lineage(t, i))
    }

    pub fn ancestor(&self, t: usize, i: usize) -> usize {
        self.ancestors[t * self.n + i]
    }

    pub fn lineage(&self, t: usize, i: usize) -> usize {
        self.lineage[t * self.n + i]
    }

    /// Normalized filter weights at time `t`.
    pub fn filter_weights(&self, t: usize) -> &[f64] {
        &self.filter_weights[t * self.n..(t + 1) * self.n]
    }

    /// The final weights `w_T`, which also weight whole trajectories.
    pub fn final_weights(&self) -> &[f64] {
        self.filter_weights(self.t_len - 1)
    }

    /// Number of time steps at which every weight vanished and uniform
    /// weights were substituted.
    pub fn degenerate_steps(&self) -> usize {
        self.degenerate_steps
    }

    /// Trajectory `i` as a `T × n_x` matrix.
    pub fn trajectory(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.t_len, self.n_x, |t, d| self.state(t, i)[d])
    }

    /// All trajectories, indexed `[i]` with `T × n_x` entries each.
    pub fn states(&self) -> Vec<DMatrix<f64>> {
        (0..self.n).map(|i| self.trajectory(i)).collect()
    }

    /// Weighted mean `Σᵢ w_T⁽ⁱ⁾ x_t⁽ⁱ⁾` of the trajectories at each time.
    pub fn smoothed_mean(&self) -> DMatrix<f64> {
        let w = self.final_weights();
        DMatrix::from_fn(self.t_len, self.n_x, |t, d| {
            (0..self.n).map(|i| w[i] * self.state(t, i)[d]).sum()
        })
    }
}

/// Normalizes log-weights in place so that `exp` sums to one.
/// Returns false (leaving uniform weights) when every weight vanished.
pub(crate) fn normalize_log_weights(logw: &mut [f64]) -> bool {
    let max = logw
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        let uniform = -(logw.len() as f64).ln();
        logw.iter_mut().for_each(|v| *v = uniform);
        return false;
    }
    let sum: f64 = logw
        .iter()
        .map(|&v| if v.is_nan() { 0.0 } else { (v - max).exp() })
        .sum();
    let shift = max + sum.ln();
    for v in logw.iter_mut() {
        *v = if v.is_nan() { f64::NEG_INFINITY } else { *v - shift };
    }
    true
}

/// `log N(y; obs_mean(x, u), R)`.
pub fn measurement_log_weight(model: &ModelParams, y: &[f64], x: &[f64], u: &[f64]) -> Result<f64> {
    if y.len() != model.n_y {
        return Err(Error::Dimension {
            what: "measurement",
            expected: model.n_y,
            got: y.len(),
        });
    }
    let e = Gaussian::new(&model.r, "R")?;
    let mean = model.obs_mean(x, u)?;
    let residual: Vec<f64> = y.iter().zip(mean.iter()).map(|(a, b)| a - b).collect();
    Ok(e.log_density(&residual))
}

/// Measurement density itself; may underflow to zero where the log does not.
pub fn measurement_weight(model: &ModelParams, y: &[f64], x: &[f64], u: &[f64]) -> Result<f64> {
    Ok(measurement_log_weight(model, y, x, u)?.exp())
}

fn normalized(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument(
            "weights must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

/// `count` independent categorical draws with probabilities ∝ `weights`.
pub fn multinomial_resample<R: Rng + ?Sized>(
    weights: &[f64],
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let w = normalized(weights)?;
    let cdf = cumulative(&w);
    Ok((0..count).map(|_| invert_cdf(&cdf, rng.random())).collect())
}

/// Systematic resampling: one uniform offset, `count` evenly spaced points.
pub fn systematic_resample<R: Rng + ?Sized>(
    weights: &[f64],
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let w = normalized(weights)?;
    let cdf = cumulative(&w);
    let offset: f64 = rng.random();
    Ok((0..count)
        .map(|k| invert_cdf(&cdf, (k as f64 + offset) / count as f64))
        .collect())
}

fn cumulative(w: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    w.iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

/// First index whose cumulative weight exceeds `u·total`.
fn invert_cdf(cdf: &[f64], u: f64) -> usize {
    let total = *cdf.last().expect("non-empty cdf");
    let target = u * total;
    let idx = cdf.partition_point(|&c| c <= target);
    if idx < cdf.len() {
        idx
    } else {
        // rounding at the top end: last index carrying weight
        let mut j = cdf.len() - 1;
        while j > 0 && cdf[j] == cdf[j - 1] {
            j -= 1;
        }
        j
    }
}

fn draw_from_log<R: Rng + ?Sized>(
    logw: &[f64],
    count: usize,
    resampling: Resampling,
    rng: &mut R,
    out: &mut [usize],
) {
    let w: Vec<f64> = logw.iter().map(|v| v.exp()).collect();
    let cdf = cumulative(&w);
    match resampling {
        Resampling::Multinomial => {
            for slot in out.iter_mut().take(count) {
                *slot = invert_cdf(&cdf, rng.random());
            }
        }
        Resampling::Systematic => {
            let offset: f64 = rng.random();
            for (k, slot) in out.iter_mut().take(count).enumerate() {
                *slot = invert_cdf(&cdf, (k as f64 + offset) / count as f64);
            }
        }
    }
}

/// Ancestor-sampling probabilities for the reference particle:
/// `∝ w_t⁽ʲ⁾ · N(x_next; step_mean(x_t⁽ʲ⁾, u_t), Q)`.
///
/// `particles_t` is `N × n_x`; `filter_weights_t` need not be normalized.
pub fn ancestor_weights(
    model: &ModelParams,
    particles_t: &DMatrix<f64>,
    u_t: &[f64],
    conditioned_next: &[f64],
    filter_weights_t: &[f64],
) -> Result<DVector<f64>> {
    let n = particles_t.nrows();
    if filter_weights_t.len() != n {
        return Err(Error::Dimension {
            what: "filter weights",
            expected: n,
            got: filter_weights_t.len(),
        });
    }
    if conditioned_next.len() != model.n_x {
        return Err(Error::Dimension {
            what: "conditioned state",
            expected: model.n_x,
            got: conditioned_next.len(),
        });
    }
    let w = Gaussian::new(&model.q, "Q")?;
    let mut logw = Vec::with_capacity(n);
    for j in 0..n {
        let x: Vec<f64> = particles_t.row(j).iter().copied().collect();
        let mean = model.step_mean(&x, u_t)?;
        let residual: Vec<f64> = conditioned_next.iter().zip(mean.iter()).map(|(a, b)| a - b).collect();
        logw.push(filter_weights_t[j].ln() + w.log_density(&residual));
    }
    if !normalize_log_weights(&mut logw) {
        return Err(Error::DegenerateWeights);
    }
    Ok(DVector::from_iterator(n, logw.into_iter().map(f64::exp)))
}

fn check_inputs(model: &ModelParams, data: &Dataset, conditioned: &DMatrix<f64>, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("particle count must be at least 1".into()));
    }
    if data.is_empty() {
        return Err(Error::InvalidArgument("dataset is empty".into()));
    }
    if data.n_u() != model.n_u {
        return Err(Error::Dimension {
            what: "dataset input columns",
            expected: model.n_u,
            got: data.n_u(),
        });
    }
    if data.n_y() != model.n_y {
        return Err(Error::Dimension {
            what: "dataset output columns",
            expected: model.n_y,
            got: data.n_y(),
        });
    }
    if conditioned.nrows() != data.len() || conditioned.ncols() != model.n_x {
        return Err(Error::Dimension {
            what: "conditioned trajectory length",
            expected: data.len(),
            got: conditioned.nrows(),
        });
    }
    if conditioned.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("conditioned trajectory must be finite".into()));
    }
    Ok(())
}

/// Runs one CPF-AS sweep seeded by `seed`.
///
/// Returns the drawn trajectory (`T × n_x`) and the particle system.
pub fn cpf_as(
    model: &ModelParams,
    data: &Dataset,
    conditioned: &DMatrix<f64>,
    n: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, ParticleSystem)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cpf_as_with(model, data, conditioned, n, Resampling::Multinomial, &mut rng)
}

/// [`cpf_as`] drawing from a caller-owned generator.
pub fn cpf_as_with<R: Rng + ?Sized>(
    model: &ModelParams,
    data: &Dataset,
    conditioned: &DMatrix<f64>,
    n: usize,
    resampling: Resampling,
    rng: &mut R,
) -> Result<(DMatrix<f64>, ParticleSystem)> {
    model.validate()?;
    check_inputs(model, data, conditioned, n)?;
    let (t_len, n_x, n_y) = (data.len(), model.n_x, model.n_y);
    let process = Gaussian::new(&model.q, "Q")?;
    let measurement = Gaussian::new(&model.r, "R")?;
    let prior = Gaussian::new(&model.init_cov, "init_cov")?;
    let reference = n - 1;

    let mut particles = vec![0.0; t_len * n * n_x];
    let mut ancestors = vec![0usize; t_len.saturating_sub(1) * n];
    let mut filter_weights = vec![0.0; t_len * n];
    let mut degenerate_steps = 0;

    for i in 0..reference {
        prior.sample_into(rng, model.init_mean.as_slice(), &mut particles[i * n_x..(i + 1) * n_x]);
    }
    for d in 0..n_x {
        particles[reference * n_x + d] = conditioned[(0, d)];
    }
    check_finite(&particles[..n * n_x], 0)?;

    let q = model.regressor_len();
    let mut z = vec![0.0; q];
    let mut means = vec![0.0; n * n_x];
    let mut logw = vec![0.0; n];
    let mut residual = vec![0.0; n_x.max(n_y)];
    let mut draws = vec![0usize; n];
    let mut next_ref = vec![0.0; n_x];
    let mut obs = vec![0.0; n_y];
    let mut u = vec![0.0; data.n_u()];
    let mut as_logw = vec![0.0; n];

    for t in 0..t_len {
        for (dst, &v) in u.iter_mut().zip(data.u.row(t).iter()) {
            *dst = v;
        }
        let last = t + 1 == t_len;
        let gen = t * n * n_x;
        for j in 0..n {
            let x = &particles[gen + j * n_x..gen + (j + 1) * n_x];
            model.regressor_into(x, &u, &mut z);
            mat_vec_into(&model.gamma_g, &z, &mut obs);
            for k in 0..n_y {
                residual[k] = data.y[(t, k)] - obs[k];
            }
            logw[j] = measurement.log_density(&residual[..n_y]);
            if !last {
                mat_vec_into(&model.gamma_f, &z, &mut means[j * n_x..(j + 1) * n_x]);
            }
        }
        if !normalize_log_weights(&mut logw) {
            degenerate_steps += 1;
        }
        for (dst, &lw) in filter_weights[t * n..(t + 1) * n].iter_mut().zip(&logw) {
            *dst = lw.exp();
        }
        if last {
            break;
        }

        draw_from_log(&logw, reference, resampling, rng, &mut draws);
        let next = (t + 1) * n * n_x;
        for i in 0..reference {
            let a = draws[i];
            ancestors[t * n + i] = a;
            let (_, tail) = particles.split_at_mut(next + i * n_x);
            process.sample_into(rng, &means[a * n_x..(a + 1) * n_x], &mut tail[..n_x]);
        }
        for d in 0..n_x {
            next_ref[d] = conditioned[(t + 1, d)];
        }
        particles[next + reference * n_x..next + n * n_x].copy_from_slice(&next_ref);

        // ancestor sampling for the reference particle
        for j in 0..n {
            for d in 0..n_x {
                residual[d] = next_ref[d] - means[j * n_x + d];
            }
            as_logw[j] = logw[j] + process.log_density(&residual[..n_x]);
        }
        if !normalize_log_weights(&mut as_logw) {
            degenerate_steps += 1;
        }
        draw_from_log(&as_logw, 1, Resampling::Multinomial, rng, &mut draws[..1]);
        ancestors[t * n + reference] = draws[0];

        check_finite(&particles[next..next + n * n_x], t + 1)?;
    }

    let mut lineage = vec![0usize; t_len * n];
    let last = (t_len - 1) * n;
    for i in 0..n {
        lineage[last + i] = i;
    }
    for t in (0..t_len - 1).rev() {
        for i in 0..n {
            lineage[t * n + i] = ancestors[t * n + lineage[(t + 1) * n + i]];
        }
    }

    let system = ParticleSystem {
        n,
        n_x,
        t_len,
        particles,
        ancestors,
        lineage,
        filter_weights,
        degenerate_steps,
    };
    let final_log: Vec<f64> = system.final_weights().iter().map(|w| w.ln()).collect();
    let mut pick = [0usize];
    draw_from_log(&final_log, 1, Resampling::Multinomial, rng, &mut pick);
    Ok((system.trajectory(pick[0]), system))
}

fn check_finite(values: &[f64], time: usize) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence {
            time,
            iteration: None,
        })
    }
}

/// Output of a plain bootstrap particle filter.
#[derive(Clone, Debug)]
pub struct FilterOutput {
    /// One-step-ahead predicted output mean `E[y_t | y_1:t-1]`, `T × n_y`.
    pub predicted_y: DMatrix<f64>,
    /// Filtered state mean `E[x_t | y_1:t]`, `T × n_x`.
    pub filtered_x: DMatrix<f64>,
}

/// Bootstrap particle filter with multinomial resampling at every step.
pub fn bootstrap_filter(model: &ModelParams, data: &Dataset, n: usize, seed: u64) -> Result<FilterOutput> {
    model.validate()?;
    check_inputs(model, data, &DMatrix::zeros(data.len(), model.n_x), n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (t_len, n_x, n_y) = (data.len(), model.n_x, model.n_y);
    let process = Gaussian::new(&model.q, "Q")?;
    let measurement = Gaussian::new(&model.r, "R")?;
    let prior = Gaussian::new(&model.init_cov, "init_cov")?;
    let mut x = vec![0.0; n * n_x];
    for i in 0..n {
        prior.sample_into(&mut rng, model.init_mean.as_slice(), &mut x[i * n_x..(i + 1) * n_x]);
    }
    let mut predicted_y = DMatrix::zeros(t_len, n_y);
    let mut filtered_x = DMatrix::zeros(t_len, n_x);
    let mut z = vec![0.0; model.regressor_len()];
    let mut logw = vec![0.0; n];
    let mut means = vec![0.0; n * n_x];
    let mut residual = vec![0.0; n_y];
    let mut draws = vec![0usize; n];
    for t in 0..t_len {
        check_finite(&x, t)?;
        let u: Vec<f64> = data.u.row(t).iter().copied().collect();
        for j in 0..n {
            model.regressor_into(&x[j * n_x..(j + 1) * n_x], &u, &mut z);
            let obs = mat_vec(&model.gamma_g, &z);
            for k in 0..n_y {
                predicted_y[(t, k)] += obs[k] / n as f64;
                residual[k] = data.y[(t, k)] - obs[k];
            }
            logw[j] = measurement.log_density(&residual);
            means[j * n_x..(j + 1) * n_x].copy_from_slice(&mat_vec(&model.gamma_f, &z));
        }
        normalize_log_weights(&mut logw);
        for j in 0..n {
            let w = logw[j].exp();
            for d in 0..n_x {
                filtered_x[(t, d)] += w * x[j * n_x + d];
            }
        }
        draw_from_log(&logw, n, Resampling::Multinomial, &mut rng, &mut draws);
        for i in 0..n {
            let a = draws[i];
            process.sample_into(&mut rng, &means[a * n_x..(a + 1) * n_x], &mut x[i * n_x..(i + 1) * n_x]);
        }
    }
    Ok(FilterOutput {
        predicted_y,
        filtered_x,
    })
}
