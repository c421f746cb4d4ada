//! Reference data-generating systems.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::basis::{BasisSet, BasisSpec};
use crate::error::{Error, Result};
use crate::model::{Dataset, EquationStructure, ModelParams, StructureSpec};

/// Process noise variance of the benchmark system.
pub const EXAMPLE1_Q: f64 = 0.1;
/// Measurement noise variance of the benchmark system.
pub const EXAMPLE1_R: f64 = 0.5;

/// `f(x) = −10x / (1 + 3x²)`.
pub fn example1_transition(x: f64) -> f64 {
    -10.0 * x / (1.0 + 3.0 * x * x)
}

/// Simulates `x[t+1] = f(x[t]) + w`, `y[t] = x[t] + e` with `x[1] ~ N(0, 1)`.
///
/// Returns the autonomous dataset and the latent states (`T × 1`).
pub fn generate_example1(t_len: usize, seed: u64) -> (Dataset, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Normal::new(0.0, EXAMPLE1_Q.sqrt()).unwrap();
    let e = Normal::new(0.0, EXAMPLE1_R.sqrt()).unwrap();
    let mut x = Normal::new(0.0, 1.0).unwrap().sample(&mut rng);
    let mut xs = DMatrix::zeros(t_len, 1);
    let mut ys = DMatrix::zeros(t_len, 1);
    for t in 0..t_len {
        xs[(t, 0)] = x;
        ys[(t, 0)] = x + e.sample(&mut rng);
        x = example1_transition(x) + w.sample(&mut rng);
    }
    (Dataset::autonomous(ys).expect("finite simulation"), xs)
}

/// Identification setup for the benchmark system: `f` expanded in `m`
/// Fourier functions on `[-L, L]`, with a known identity measurement
/// (`y = x + e`, `R = 0.5`).
///
/// The state basis is `[fourier(m); x]`; the trailing linear column is
/// fixed to zero in the state equation and carries the identity in the
/// measurement equation.
pub fn example1_setup(m: usize, half_width: f64, data: &Dataset) -> (ModelParams, StructureSpec) {
    let basis = BasisSet::from(BasisSpec::fourier(m, half_width)).with_block(BasisSpec::linear(1), None);
    let mut model = ModelParams::initial_guess(1, basis, BasisSet::empty(), data);
    let q = model.regressor_len();
    model.gamma_f[(0, q - 1)] = 0.0;
    model.gamma_g[(0, q - 1)] = 1.0;
    model.r[(0, 0)] = EXAMPLE1_R;
    let mut mask = DMatrix::from_element(1, q, true);
    mask[(0, q - 1)] = false;
    let structure = StructureSpec {
        state: EquationStructure::masked(&model.gamma_f, &mask, true),
        measurement: EquationStructure::known(&model.gamma_g),
    };
    (model, structure)
}

/// Simulates the scalar linear system `x' = a·x + w`, `y = c·x + e` from
/// `x[1] = x1`. Zero variances are allowed and give noise-free sequences.
///
/// Returns the autonomous dataset and the latent states (`T × 1`).
pub fn generate_linear(
    a: f64,
    q: f64,
    c: f64,
    r: f64,
    x1: f64,
    t_len: usize,
    seed: u64,
) -> Result<(Dataset, DMatrix<f64>)> {
    if !(q >= 0.0 && r >= 0.0 && q.is_finite() && r.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise variances must be finite and nonnegative, got q = {q}, r = {r}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Normal::new(0.0, q.sqrt()).expect("finite variance");
    let e = Normal::new(0.0, r.sqrt()).expect("finite variance");
    let mut x = x1;
    let mut xs = DMatrix::zeros(t_len, 1);
    let mut ys = DMatrix::zeros(t_len, 1);
    for t in 0..t_len {
        if !x.is_finite() {
            return Err(Error::Divergence {
                time: t,
                iteration: None,
            });
        }
        xs[(t, 0)] = x;
        ys[(t, 0)] = c * x + if r > 0.0 { e.sample(&mut rng) } else { 0.0 };
        x = a * x + if q > 0.0 { w.sample(&mut rng) } else { 0.0 };
    }
    Ok((Dataset::autonomous(ys)?, xs))
}

/// Block-structured model of a Hammerstein-Wiener cascade with a
/// six-dimensional state: a third-order linear block driven by `u`
/// (states 0..3), a static nonlinearity of state 2 expanded in `m` Fourier
/// functions on `[-L, L]`, and a second third-order linear block (states
/// 3..6) observed through a learned row `C`.
///
/// Regressor layout: `[x (6 columns); φ(x[2]) (m columns); u]`.
pub fn hammerstein_wiener_setup(
    m: usize,
    half_width: f64,
    data: &Dataset,
) -> Result<(ModelParams, StructureSpec)> {
    if data.n_u() != 1 || data.n_y() != 1 {
        return Err(Error::Dimension {
            what: "Hammerstein-Wiener dataset columns",
            expected: 2,
            got: data.n_u() + data.n_y(),
        });
    }
    let basis_x = BasisSet::from(BasisSpec::linear(6)).with_block(BasisSpec::fourier(m, half_width), Some(vec![2]));
    let mut model = ModelParams::initial_guess(6, basis_x, BasisSpec::linear(1).into(), data);
    let q = model.regressor_len();
    let (fourier, input) = (6, 6 + m);
    let mut f_mask = DMatrix::from_element(6, q, false);
    for r in 0..3 {
        for c in 0..3 {
            f_mask[(r, c)] = true;
        }
        f_mask[(r, input)] = true;
    }
    for r in 3..6 {
        for c in 3..6 {
            f_mask[(r, c)] = true;
        }
    }
    for c in fourier..fourier + m {
        f_mask[(3, c)] = true;
    }
    // Start from a unit input gain and a nonlinearity close to the identity
    // near zero, so that every state is excited in the first sweep.
    model.gamma_f[(0, input)] = 1.0;
    if m > 2 {
        model.gamma_f[(3, fourier + 2)] = half_width / std::f64::consts::PI;
    }
    model.gamma_g[(0, 3)] = 1.0;
    let mut g_mask = DMatrix::from_element(1, q, false);
    for c in 3..6 {
        g_mask[(0, c)] = true;
    }
    let structure = StructureSpec {
        state: EquationStructure::masked(&model.gamma_f, &f_mask, true),
        measurement: EquationStructure::masked(&model.gamma_g, &g_mask, true),
    };
    model.validate()?;
    structure.validate(&model)?;
    Ok((model, structure))
}

/// Scalar linear-Gaussian model `x' = a·x + w`, `y = c·x + e`.
pub fn linear_gaussian(a: f64, q: f64, c: f64, r: f64) -> Result<ModelParams> {
    let mut m = ModelParams::zeros(1, 0, 1, BasisSpec::linear(1).into(), BasisSet::empty());
    m.gamma_f[(0, 0)] = a;
    m.gamma_g[(0, 0)] = c;
    m.q[(0, 0)] = q;
    m.r[(0, 0)] = r;
    m.validate()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_measurement_noise_variance() {
        let (data, x) = generate_example1(1000, 2024);
        let d: Vec<f64> = (0..1000).map(|t| data.y[(t, 0)] - x[(t, 0)]).collect();
        let mean = d.iter().sum::<f64>() / 1000.0;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 999.0;
        assert!((0.4..=0.6).contains(&var), "var {var}");
    }

    #[test]
    fn noise_free_linear_is_geometric() {
        let (data, x) = generate_linear(0.5, 0.0, 2.0, 0.0, 1.0, 4, 9).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 0.5, 0.25, 0.125]);
        assert_eq!(data.y.as_slice(), &[2.0, 1.0, 0.5, 0.25]);
        assert!(generate_linear(0.5, -1.0, 1.0, 0.0, 1.0, 4, 9).is_err());
        let (noisy, _) = generate_linear(0.9, 0.1, 1.0, 0.1, 0.0, 50, 3).unwrap();
        assert_eq!(noisy, generate_linear(0.9, 0.1, 1.0, 0.1, 0.0, 50, 3).unwrap().0);
    }

    #[test]
    fn example1_is_seeded() {
        assert_eq!(generate_example1(50, 3), generate_example1(50, 3));
        assert_ne!(generate_example1(50, 3).0, generate_example1(50, 4).0);
    }

    #[test]
    fn hammerstein_wiener_structure() {
        let u = DMatrix::from_fn(50, 1, |t, _| (t as f64 * 0.3).sin());
        let y = DMatrix::from_fn(50, 1, |t, _| (t as f64 * 0.2).cos());
        let data = Dataset::new(u, y).unwrap();
        let (model, structure) = hammerstein_wiener_setup(8, 2.0, &data).unwrap();
        assert_eq!(model.regressor_len(), 15);
        let rows = &structure.state.rows;
        // the first block never sees the nonlinearity, the second never sees u
        assert!(!rows[0].learn_mask[6] && rows[0].learn_mask[14]);
        assert!(rows[3].learn_mask[6] && !rows[3].learn_mask[14]);
        assert!(!rows[4].learn_mask[6] && rows[4].learn_mask[5]);
        assert!(!rows[1].learn_mask[3]);
        let obs = &structure.measurement.rows[0].learn_mask;
        assert_eq!(obs.iter().filter(|&&b| b).count(), 3);
        // near zero the initial nonlinearity is close to the identity
        let x = [0.0, 0.0, 0.01, 0.0, 0.0, 0.0];
        let next = model.step_mean(&x, &[0.0]).unwrap();
        assert!((next[3] - 0.01).abs() < 1e-5, "{}", next[3]);
        assert!(hammerstein_wiener_setup(8, 2.0, &generate_example1(10, 1).0).is_err());
    }

    #[test]
    fn setup_measures_identity() {
        let (data, _) = generate_example1(20, 1);
        let (model, structure) = example1_setup(6, 3.0, &data);
        model.validate().unwrap();
        structure.validate(&model).unwrap();
        assert_eq!(model.obs_mean(&[1.3], &[]).unwrap()[0], 1.3);
        assert!(structure.measurement.is_known());
        assert!(!structure.state.rows[0].learn_mask[6]);
        assert_eq!(structure.state.rows[0].fixed_row[6], 0.0);
        assert_eq!(model.gamma_f[(0, 6)], 0.0);
    }
}
