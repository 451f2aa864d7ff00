//! Knockoff-based variable selection from GWAS summary statistics.
//!
//! The pipeline takes per-variant Z-scores and a reference LD panel, draws
//! `M` knockoff copies of the Z-vector directly from its conditional
//! Gaussian law, and selects variants with the multiple-knockoff filter.
//! Supporting modules compute Z-scores from individual-level data
//! (optionally with a kinship random effect), combine studies, and simulate
//! pedigree cohorts.

pub mod assoc;
pub mod error;
pub mod filter;
pub mod knockoff;
pub mod ld_panel;
pub mod linalg;
pub mod meta;
pub mod pipeline;
pub mod rng;
pub mod sim;
pub mod sumstats;
pub mod variant;
pub mod zscore;

pub use error::{GkError, Result};
pub use variant::VariantId;
pub use zscore::{ZProvenance, ZVector};
