//! Genotype, pedigree and phenotype simulation, and replicated FDR/power
//! experiments.

pub mod config;
pub mod experiment;
pub mod haplotypes;
pub mod pedigree;
pub mod phenotype;
pub mod scheme;

pub use config::{apply_setting, parse_scenario};
pub use experiment::{
    fdr_and_power, run_experiment, ExperimentReport, ExperimentSetup, Method, ReplicateRecord,
    Relatedness, Scenario, SimulatedCohort, SummaryRow, ZSource,
};
pub use haplotypes::{HaplotypePool, SyntheticPoolSpec};
pub use pedigree::{build_pedigree_cohort, pedigree_kinship, PedigreeCohort, FAMILY_SIZE};
pub use phenotype::{simulate_phenotypes, PhenotypeModel, SimulatedPhenotype};
pub use scheme::{apply_scheme, relatedness_k, Scheme};

/// `median(χ²) / 0.4549`, the usual genomic-control inflation factor.
pub fn genomic_inflation(chi2: &[f64]) -> Option<f64> {
    if chi2.is_empty() {
        return None;
    }
    let mut v = chi2.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let med = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    Some(med / 0.454_936_423_119_572_8)
}
