//! Per-variant association statistics from individual-level data.

mod cohort;
mod glm;
mod kinship;
mod pvalue;
mod score;
mod working;

pub use cohort::{Cohort, Family};
pub use glm::{fit_glm, lrt_test, wald_test, FixedEffectModel, GlmFit};
pub use kinship::{Kinship, KinshipBlock};
pub use pvalue::{p_to_z, z_to_p, Converted, P_FLOOR};
pub use score::{
    mixed_model_null_fit, naive_null_fit, score_test, score_tests, NullModel, ScoreResult,
    VarianceComponent, PQL_MAX_ITERS, PQL_TOL,
};
