//! Feature-noise models: per-error costs, their normalization, mixture
//! estimation and a-contrario scoring.

mod mixture;
mod model;
mod nfa;
mod normalizer;

pub use mixture::{amlesac_estimate, mlesac_estimate_gamma, COVARIANCE_FLOOR, EM_MAX_ITERATIONS, EM_TOLERANCE};
pub(crate) use model::log_sum_exp;
pub use model::{mixture_cost, pseudo_huber, rho, AcRansacParams, Covariance, ErrorVec, MixtureParams, NoiseModel, SqrtInformation};
pub use nfa::{alpha0_stereo, best_nfa, min_log_nfa, nfa, LogFactorials, NfaResult, MIN_ERROR};
pub use normalizer::{
    log_normalizer, normalization_per_weight, prob_of_cost, regularized_gamma_half, total_cost, unit_ball_volume, unit_sphere_area, CostBreakdown,
    Domain,
};
