//! Monotone alpha-divergence minimisation for mixture variational
//! families.
//!
//! The crate provides the divergence objective and its estimators, an
//! exponential-family parameter solver with Gaussian instances, mixture
//! weight/component update rules (maximisation and gradient flavours,
//! plus Student's t scale mixtures), importance-sampling estimators with
//! reproducible seeded streams, stock multimodal targets, and a
//! quadrature engine that makes the monotonicity guarantees testable.

pub mod divergence;
pub mod error;
pub mod exact;
pub mod expfam;
pub mod gaussian;
pub mod linalg;
pub mod mixture;
pub mod quad;
pub mod sampling;
pub mod schedule;
pub mod special;
pub mod stats;
pub mod student;
pub mod targets;
pub mod updates;

pub use divergence::{
    f_alpha, psi_alpha_exact, vr_bound_exact, vr_bound_mc, vr_bound_mc_proposal, AlphaValue,
};
pub use error::{Error, Result};
pub use exact::{ExactEngine, ExactStats};
pub use expfam::{
    gaussian_update, grad_g_canonical, gradient_step_canonical, gradient_step_noncanonical,
    solve_argmax_update, ExpFamily, GaussianDiag, GaussianFixedCov, GaussianFull, MomentEstimate,
};
pub use gaussian::{Covariance, GaussianParams};
pub use mixture::{
    deserialize_state, family_tag, log_responsibility, power_descent_eta_max, power_descent_step,
    serialize_state, update_weights, Component, MixtureState,
};
pub use quad::{build_gauss_hermite, build_grid, build_sinh, build_uniform, GridKind, QuadratureGrid};
pub use sampling::{
    draw_samples, estimate_stats, estimate_stats_from_evals, rng_stream, BatchEvals, SampleBatch,
    SamplerKind, StreamKey, WeightedStats,
};
pub use schedule::{Schedule, ScheduleConfig};
pub use special::{digamma, kappa_fn, kappa_inv, ln_gamma, solve_dof_stationarity, trigamma};
pub use student::{g_tau, student_update, StudentTParams, WeightedPoints};
pub use targets::{builtin_target, load_grid_target, parse_grid_target, Target, TargetKind};
pub use updates::{
    mg_update, mg_update_per_component, rgd_update_means, student_step, ComponentMoments,
    UpdateDiagnostics,
};
