//! Identification of nonlinear state-space models whose unknown functions
//! are expanded in truncated orthogonal bases.
//!
//! The model is linear in its coefficients, so with state trajectories
//! sampled by a conditional particle filter with ancestor sampling the
//! maximization step of stochastic approximation EM is a closed-form
//! (optionally ridge-regularized) regression on running second moments.
//!
//! Module map:
//!
//! * [`basis`]: basis families, feature evaluation, prior precision;
//! * [`model`]: model parameters, structure masks, simulation, error metrics;
//! * [`smc`]: CPF-AS, resampling and a bootstrap filter;
//! * [`em`]: sufficient statistics, M-step and the PSAEM driver;
//! * [`io`]: dataset, model, configuration and result files;
//! * [`systems`], [`evaluation`]: reference systems and fit measures.

pub mod basis;
pub mod em;
pub mod error;
pub mod evaluation;
mod gaussian;
pub mod io;
pub mod model;
pub mod smc;
pub mod systems;

pub use basis::{
    build_precision, clamp_to_domain, BasisBlock, BasisKind, BasisSet, BasisSpec, Composition,
    DiagonalPrecision, PriorScheme, PriorSpec,
};
pub use em::{
    blend_stats, gamma_value, iteration_stats, m_step, psaem_identify, psaem_identify_with,
    Equation, GammaSchedule, IterationRecord, MStep, PsaemConfig, PsaemResult, SuffStats,
    TraceEntry,
};
pub use error::{Error, Result};
pub use model::{
    metrics, simulate, Dataset, EquationStructure, ErrorMetrics, ModelParams, RowStructure,
    Simulation, StructureSpec,
};
pub use smc::{
    ancestor_weights, bootstrap_filter, cpf_as, cpf_as_with, measurement_log_weight,
    measurement_weight, multinomial_resample, systematic_resample, ParticleSystem, Resampling,
};
