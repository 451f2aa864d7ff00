//! Replicated simulation studies: empirical FDR and power per method.

use std::fmt;
use std::str::FromStr;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};

use super::haplotypes::{HaplotypePool, SyntheticPoolSpec};
use super::pedigree::{build_pedigree_cohort, genotype_matrix, sample_unrelated, FAMILY_SIZE};
use super::phenotype::{default_effect_budget, simulate_phenotypes, PhenotypeModel};
use super::scheme::{apply_scheme, relatedness_k, Scheme};
use crate::assoc::{
    Cohort, Family, FixedEffectModel, Kinship, NullModel, VarianceComponent, score_test,
};
use crate::error::{GkError, Result};
use crate::filter::{feature_stats, knockoff_threshold};
use crate::knockoff::{build_transform, solve_diag, DiagMethod, KnockoffTransform, DEFAULT_COPIES};
use crate::ld_panel::{cluster_variants, LdPanel, DEFAULT_CLUSTER_CUTOFF};
use crate::meta::{fisher_z, meta_z, optimal_weights, Study, StudyPanel};
use crate::rng::{derive_seed, rng_from_seed};

/// Shrinkage applied to LD matrices inside simulations.
pub const SIM_LD_SHRINKAGE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relatedness {
    Unrelated,
    Pedigree,
}

impl FromStr for Relatedness {
    type Err = GkError;
    fn from_str(s: &str) -> Result<Relatedness> {
        match s {
            "unrelated" => Ok(Relatedness::Unrelated),
            "pedigree" | "related" => Ok(Relatedness::Pedigree),
            _ => Err(GkError::Format(format!("unknown relatedness '{s}'"))),
        }
    }
}

impl fmt::Display for Relatedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relatedness::Unrelated => "unrelated",
            Relatedness::Pedigree => "pedigree",
        })
    }
}

/// Where the input Z-scores come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ZSource {
    /// Score test with the kinship random effect.
    Mixed,
    /// Score test ignoring relatedness.
    Naive,
    Wald,
    Lrt,
    /// Optimal-weight meta-analysis of two half cohorts (mixed score).
    Meta,
    /// Fisher combination of two half cohorts (mixed score).
    Fisher,
}

/// A knockoff construction paired with an input Z-score source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ghost(ZSource),
    /// Second-order knockoff genotypes built from the sample itself.
    Individual(ZSource),
}

impl Method {
    pub const PRIMARY: [Method; 4] = [
        Method::Ghost(ZSource::Mixed),
        Method::Ghost(ZSource::Naive),
        Method::Individual(ZSource::Mixed),
        Method::Individual(ZSource::Naive),
    ];

    fn source(&self) -> ZSource {
        match self {
            Method::Ghost(s) | Method::Individual(s) => *s,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, src) = match self {
            Method::Ghost(s) => ("ghost", s),
            Method::Individual(s) => ("individual", s),
        };
        let src = match src {
            ZSource::Mixed => "mixed",
            ZSource::Naive => "naive",
            ZSource::Wald => "wald",
            ZSource::Lrt => "lrt",
            ZSource::Meta => "meta",
            ZSource::Fisher => "fisher",
        };
        write!(f, "{kind}-{src}")
    }
}

impl FromStr for Method {
    type Err = GkError;
    fn from_str(s: &str) -> Result<Method> {
        let (kind, src) = s
            .split_once('-')
            .ok_or_else(|| GkError::Format(format!("unknown method '{s}'")))?;
        let src = match src {
            "mixed" => ZSource::Mixed,
            "naive" | "score" => ZSource::Naive,
            "wald" => ZSource::Wald,
            "lrt" => ZSource::Lrt,
            "meta" => ZSource::Meta,
            "fisher" => ZSource::Fisher,
            _ => return Err(GkError::Format(format!("unknown method '{s}'"))),
        };
        match (kind, src) {
            ("ghost", s) => Ok(Method::Ghost(s)),
            ("individual", ZSource::Mixed | ZSource::Naive) => Ok(Method::Individual(src)),
            _ => Err(GkError::Format(format!("unknown method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub phenotype: Family,
    pub relatedness: Relatedness,
    pub theta: f64,
    pub scheme: Scheme,
    /// Analysed sample size.
    pub n: usize,
    /// Families simulated before case-control sampling.
    pub foundation_families: usize,
    pub replicates: usize,
    pub seed: u64,
    pub fdr_targets: Vec<f64>,
    pub methods: Vec<Method>,
    pub copies: usize,
    pub n_causal: usize,
    pub effect_budget: Option<f64>,
    pub prevalence: f64,
    pub null_effects: bool,
    pub pool: SyntheticPoolSpec,
    pub haplotypes: Option<PathBuf>,
    pub cluster_cutoff: f64,
    pub ld_shrinkage: f64,
    pub diag_method: DiagMethod,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            phenotype: Family::Gaussian,
            relatedness: Relatedness::Unrelated,
            theta: 0.0,
            scheme: Scheme::None,
            n: 2000,
            foundation_families: 1500,
            replicates: 20,
            seed: 1,
            fdr_targets: vec![0.1, 0.2],
            methods: Method::PRIMARY.to_vec(),
            copies: DEFAULT_COPIES,
            n_causal: 10,
            effect_budget: None,
            prevalence: 0.10,
            null_effects: false,
            pool: SyntheticPoolSpec::default(),
            haplotypes: None,
            cluster_cutoff: DEFAULT_CLUSTER_CUTOFF,
            ld_shrinkage: SIM_LD_SHRINKAGE,
            diag_method: DiagMethod::SdpAscent,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GkError::Scenario(m));
        if self.replicates == 0 {
            return bad("replicates must be positive".into());
        }
        if self.fdr_targets.is_empty() || self.fdr_targets.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
            return bad("FDR targets must lie in (0, 1)".into());
        }
        if self.methods.is_empty() {
            return bad("no methods requested".into());
        }
        if self.n < 4 {
            return bad(format!("sample size {} is too small", self.n));
        }
        if self.theta < 0.0 {
            return bad("theta must be non-negative".into());
        }
        if self.relatedness == Relatedness::Pedigree {
            if self
                .methods
                .iter()
                .any(|m| matches!(m.source(), ZSource::Wald | ZSource::Lrt))
            {
                return bad("Wald and likelihood-ratio inputs need unrelated samples".into());
            }
            if self.scheme == Scheme::None && self.n % FAMILY_SIZE != 0 {
                return bad(format!("n must be a multiple of {FAMILY_SIZE} for pedigrees"));
            }
            if self.phenotype == Family::Gaussian && self.theta >= 8.0 {
                return bad("theta must be below 8 for quantitative traits".into());
            }
        }
        if self.scheme != Scheme::None
            && (self.phenotype != Family::Binomial || self.relatedness != Relatedness::Pedigree)
        {
            return bad("sampling schemes apply to dichotomous pedigree cohorts".into());
        }
        if !(0.0 < self.prevalence && self.prevalence < 1.0) {
            return bad("prevalence must lie in (0, 1)".into());
        }
        Ok(())
    }

    fn phenotype_model(&self) -> PhenotypeModel {
        PhenotypeModel {
            family: self.phenotype,
            theta: self.theta,
            effect_budget: self
                .effect_budget
                .unwrap_or_else(|| default_effect_budget(self.phenotype)),
            prevalence: self.prevalence,
            n_causal: self.n_causal,
            null_effects: self.null_effects,
        }
    }
}

/// One simulated, sampled cohort restricted to the cluster representatives.
#[derive(Debug, Clone)]
pub struct SimulatedCohort {
    pub cohort: Cohort,
    pub family: Vec<usize>,
    /// Indices (into the representatives) of the causal variants.
    pub causal: Vec<usize>,
    pub relatedness_k: Option<f64>,
}

/// Everything fixed across replicates: the haplotype pool restricted to
/// cluster representatives, their reference LD and the knockoff sampler.
#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    scenario: Scenario,
    pool: HaplotypePool,
    reference_ld: LdPanel,
    transform: KnockoffTransform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub method: Method,
    pub fdr_target: f64,
    pub n_selected: usize,
    pub n_false: usize,
    pub fdr: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub fdr_target: f64,
    pub fdr: f64,
    pub fdr_se: f64,
    pub power: f64,
    pub power_se: f64,
    pub replicates_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<SummaryRow>,
    pub records: Vec<ReplicateRecord>,
    pub failures: Vec<(usize, String)>,
    pub mean_k: Option<f64>,
    pub n_variants: usize,
}

impl ExperimentReport {
    pub fn row(&self, method: Method, fdr_target: f64) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.fdr_target == fdr_target)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("method\ttarget\tFDR\tFDR_se\tpower\tpower_se\treplicates_used\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\n",
                r.method, r.fdr_target, r.fdr, r.fdr_se, r.power, r.power_se, r.replicates_used
            ));
        }
        out
    }

    pub fn replicate_log(&self) -> String {
        let mut out = String::from("replicate\tmethod\ttarget\tselected\tfalse\tFDR\tpower\n");
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\n",
                r.replicate, r.method, r.fdr_target, r.n_selected, r.n_false, r.fdr, r.power
            ));
        }
        for (rep, msg) in &self.failures {
            out.push_str(&format!("# replicate {rep} failed: {msg}\n"));
        }
        out
    }
}

/// `(FDR, power)` of one selection against the causal set; power is 0
/// when there is nothing to find.
pub fn fdr_and_power(selected: &[usize], causal: &[usize]) -> (f64, f64) {
    let hits = selected.iter().filter(|j| causal.contains(j)).count();
    let fdr = if selected.is_empty() {
        0.0
    } else {
        (selected.len() - hits) as f64 / selected.len() as f64
    };
    let power = if causal.is_empty() {
        0.0
    } else {
        hits as f64 / causal.len() as f64
    };
    (fdr, power)
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Z-score of every column of `g` under a fitted null; monomorphic columns
/// get 0.
fn score_columns(null: &NullModel, g: &DMatrix<f64>) -> Result<Vec<f64>> {
    g.column_iter()
        .map(|c| match score_test(null, &c.into_owned()) {
            Ok(r) => Ok(r.z),
            Err(GkError::DegenerateVariant(_)) => Ok(0.0),
            Err(e) => Err(e),
        })
        .collect()
}

fn null_model(cohort: &Cohort, family: Family, source: ZSource) -> Result<NullModel> {
    match source {
        ZSource::Naive => NullModel::fit(
            &cohort.y,
            &cohort.x,
            &Kinship::identity(cohort.n()),
            family,
            VarianceComponent::Fixed(0.0),
        ),
        _ => NullModel::fit(
            &cohort.y,
            &cohort.x,
            &cohort.kinship_or_identity(),
            family,
            VarianceComponent::Estimate,
        ),
    }
}

const GHOST_STREAM: u64 = 1 << 32;
const INDIVIDUAL_STREAM: u64 = 2 << 32;

impl ExperimentSetup {
    pub fn new(scenario: &Scenario) -> Result<ExperimentSetup> {
        scenario.validate()?;
        let full = match &scenario.haplotypes {
            Some(path) => HaplotypePool::load(path)?,
            None => HaplotypePool::synthetic(&scenario.pool)?,
        };
        let ld = full.ld_panel()?;
        let clusters = cluster_variants(&ld, scenario.cluster_cutoff);
        let mut reps = clusters.representatives().to_vec();
        reps.sort_unstable();
        let pool = full.select_sites(&reps);
        let reference_ld = ld.subset(&reps).regularize(scenario.ld_shrinkage);
        let diag = solve_diag(&reference_ld, scenario.diag_method, scenario.copies)?;
        let transform = build_transform(&reference_ld, &diag, scenario.copies)?;
        Ok(ExperimentSetup {
            scenario: scenario.clone(),
            pool,
            reference_ld,
            transform,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn n_variants(&self) -> usize {
        self.pool.n_sites()
    }

    pub fn reference_ld(&self) -> &LdPanel {
        &self.reference_ld
    }

    pub fn transform(&self) -> &KnockoffTransform {
        &self.transform
    }

    pub fn replicate_seed(&self, replicate: usize) -> u64 {
        derive_seed(self.scenario.seed, replicate as u64)
    }

    pub fn simulate_cohort(&self, replicate: usize) -> Result<SimulatedCohort> {
        let sc = &self.scenario;
        let mut rng = rng_from_seed(self.replicate_seed(replicate));
        let (people, family, kinship) = match sc.relatedness {
            Relatedness::Unrelated => {
                let people = sample_unrelated(&self.pool, sc.n, &mut rng);
                (people, (0..sc.n).collect::<Vec<_>>(), None)
            }
            Relatedness::Pedigree => {
                let fams = if sc.scheme == Scheme::None {
                    sc.n / FAMILY_SIZE
                } else {
                    sc.foundation_families
                };
                let c = build_pedigree_cohort(&self.pool, fams, &mut rng);
                (c.people, c.family, Some(c.kinship))
            }
        };
        let g = genotype_matrix(&self.pool, &people);
        let ph = simulate_phenotypes(&g, kinship.as_ref(), &sc.phenotype_model(), &mut rng)?;
        let idx = apply_scheme(sc.scheme, ph.y.as_slice(), &family, sc.n, &mut rng)?;
        let y = DVector::from_iterator(idx.len(), idx.iter().map(|&i| ph.y[i]));
        let x = ph.x.select_rows(idx.iter());
        let gs = g.select_rows(idx.iter());
        let fam: Vec<usize> = idx.iter().map(|&i| family[i]).collect();
        let kin = kinship.map(|k| k.subset(&idx));
        let k = if sc.relatedness == Relatedness::Pedigree && sc.phenotype == Family::Binomial {
            relatedness_k(y.as_slice(), &fam)
        } else {
            None
        };
        Ok(SimulatedCohort {
            cohort: Cohort::new(y, x, gs, kin)?,
            family: fam,
            causal: ph.causal,
            relatedness_k: k,
        })
    }

    /// Input Z-scores of one source for a simulated cohort.
    pub fn z_scores(&self, sim: &SimulatedCohort, source: ZSource) -> Result<Vec<f64>> {
        let family = self.scenario.phenotype;
        let cohort = &sim.cohort;
        match source {
            ZSource::Mixed | ZSource::Naive => {
                score_columns(&null_model(cohort, family, source)?, &cohort.g)
            }
            ZSource::Wald | ZSource::Lrt => {
                let m = FixedEffectModel::fit(&cohort.y, &cohort.x, family)?;
                cohort
                    .g
                    .column_iter()
                    .map(|c| {
                        let g = c.into_owned();
                        let r = if source == ZSource::Wald { m.wald(&g) } else { m.lrt(&g) };
                        match r {
                            Ok(r) => Ok(r.z),
                            Err(GkError::DegenerateVariant(_)) => Ok(0.0),
                            Err(e) => Err(e),
                        }
                    })
                    .collect()
            }
            ZSource::Meta | ZSource::Fisher => {
                let panel = self.half_cohort_panel(sim)?;
                let z = if source == ZSource::Meta {
                    let w = optimal_weights(&panel)?;
                    meta_z(&panel, &w)?.z
                } else {
                    fisher_z(&panel)?
                };
                Ok(z.z)
            }
        }
    }

    /// Two studies from alternating families, each analysed with the mixed
    /// score test.
    pub fn half_cohort_panel(&self, sim: &SimulatedCohort) -> Result<StudyPanel> {
        let mut labels = sim.family.clone();
        labels.sort_unstable();
        labels.dedup();
        let rank = |f: usize| labels.binary_search(&f).expect("label present");
        let mut halves: [Vec<usize>; 2] = [vec![], vec![]];
        for (i, &f) in sim.family.iter().enumerate() {
            halves[rank(f) % 2].push(i);
        }
        let mut studies = Vec::with_capacity(2);
        for (h, idx) in halves.iter().enumerate() {
            let c = &sim.cohort;
            let part = Cohort::new(
                DVector::from_iterator(idx.len(), idx.iter().map(|&i| c.y[i])),
                c.x.select_rows(idx.iter()),
                c.g.select_rows(idx.iter()),
                c.kinship.as_ref().map(|k| k.subset(idx)),
            )?;
            let half = SimulatedCohort {
                cohort: part,
                family: idx.iter().map(|&i| sim.family[i]).collect(),
                causal: sim.causal.clone(),
                relatedness_k: None,
            };
            let z = self.z_scores(&half, ZSource::Mixed)?;
            studies.push(Study {
                name: format!("half{}", h + 1),
                n: idx.len() as f64,
                z: crate::zscore::ZVector::new(self.reference_ld.variants().to_vec(), z)?,
            });
        }
        // The halves share no samples, so their correlation is known. A
        // data-driven estimate on a couple of hundred linked variants is
        // dominated by shared signal.
        StudyPanel::new(studies, DMatrix::identity(2, 2))
    }

    /// `M` knockoff genotype matrices drawn from the sample's own
    /// correlation, row by row with i.i.d. noise.
    pub fn individual_knockoffs(&self, g: &DMatrix<f64>, seed: u64) -> Result<Vec<DMatrix<f64>>> {
        let (n, p) = g.shape();
        let mut std = g.clone();
        for j in 0..p {
            let mut col = std.column_mut(j);
            let m = col.sum() / n as f64;
            col.add_scalar_mut(-m);
            let sd = (col.norm_squared() / (n as f64 - 1.0)).sqrt();
            if sd > 0.0 {
                col /= sd;
            }
        }
        let mut cor = std.transpose() * &std / (n as f64 - 1.0);
        for j in 0..p {
            if cor[(j, j)] == 0.0 {
                // monomorphic in this sample: treat as independent
                cor[(j, j)] = 1.0;
            }
            for k in 0..p {
                cor[(j, k)] = cor[(j, k)].clamp(-1.0, 1.0);
            }
            cor[(j, j)] = 1.0;
        }
        let panel = LdPanel::new(self.reference_ld.variants().to_vec(), cor)?
            .regularize(self.scenario.ld_shrinkage);
        let diag = solve_diag(&panel, self.scenario.diag_method, self.scenario.copies)?;
        let transform = build_transform(&panel, &diag, self.scenario.copies)?;
        let mut rng = rng_from_seed(seed);
        let mut out = vec![DMatrix::zeros(n, p); self.scenario.copies];
        let mut row = vec![0.0; p];
        for i in 0..n {
            for j in 0..p {
                row[j] = std[(i, j)];
            }
            let copies = transform.sample_with(&row, &mut rng)?;
            for (m, c) in copies.iter().enumerate() {
                for j in 0..p {
                    out[m][(i, j)] = c[j];
                }
            }
        }
        Ok(out)
    }

    pub fn run_replicate(&self, replicate: usize) -> Result<(Vec<ReplicateRecord>, Option<f64>)> {
        let sc = &self.scenario;
        let sim = self.simulate_cohort(replicate)?;
        let rseed = self.replicate_seed(replicate);
        let mut records = Vec::new();
        let mut individual: Option<Vec<DMatrix<f64>>> = None;
        for (k, &method) in sc.methods.iter().enumerate() {
            let source = method.source();
            let (z, knock) = match method {
                Method::Ghost(_) => {
                    let z = self.z_scores(&sim, source)?;
                    let knock = crate::knockoff::sample_knockoffs(
                        &self.transform,
                        &z,
                        derive_seed(rseed, GHOST_STREAM + k as u64),
                    )?;
                    (z, knock)
                }
                Method::Individual(_) => {
                    if individual.is_none() {
                        individual = Some(
                            self.individual_knockoffs(&sim.cohort.g, derive_seed(rseed, INDIVIDUAL_STREAM))?,
                        );
                    }
                    let null = null_model(&sim.cohort, sc.phenotype, source)?;
                    let z = score_columns(&null, &sim.cohort.g)?;
                    let knock = individual
                        .as_ref()
                        .expect("drawn above")
                        .iter()
                        .map(|gk| score_columns(&null, gk))
                        .collect::<Result<Vec<_>>>()?;
                    (z, knock)
                }
            };
            let stats = feature_stats(&z, &knock)?;
            for &q in &sc.fdr_targets {
                let sel = knockoff_threshold(&stats, q)?;
                let selected: Vec<usize> = sel.selected.iter().copied().collect();
                let (fdr, power) = fdr_and_power(&selected, &sim.causal);
                records.push(ReplicateRecord {
                    replicate,
                    method,
                    fdr_target: q,
                    n_selected: selected.len(),
                    n_false: selected.iter().filter(|j| !sim.causal.contains(j)).count(),
                    fdr,
                    power,
                });
            }
        }
        Ok((records, sim.relatedness_k))
    }
}

#[cfg(feature = "parallel")]
fn run_all(setup: &ExperimentSetup) -> Vec<Result<(Vec<ReplicateRecord>, Option<f64>)>> {
    use rayon::prelude::*;
    (0..setup.scenario.replicates)
        .into_par_iter()
        .map(|r| setup.run_replicate(r))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn run_all(setup: &ExperimentSetup) -> Vec<Result<(Vec<ReplicateRecord>, Option<f64>)>> {
    (0..setup.scenario.replicates)
        .map(|r| setup.run_replicate(r))
        .collect()
}

/// Run every replicate and summarise FDR and power as mean ± standard error.
/// Failed replicates are excluded and listed.
pub fn run_experiment(scenario: &Scenario) -> Result<ExperimentReport> {
    let setup = ExperimentSetup::new(scenario)?;
    Ok(summarize(&setup, run_all(&setup)))
}

fn summarize(
    setup: &ExperimentSetup,
    results: Vec<Result<(Vec<ReplicateRecord>, Option<f64>)>>,
) -> ExperimentReport {
    let sc = &setup.scenario;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut ks = Vec::new();
    for (rep, r) in results.into_iter().enumerate() {
        match r {
            Ok((rec, k)) => {
                records.extend(rec);
                ks.extend(k);
            }
            Err(e) => failures.push((rep, e.to_string())),
        }
    }
    let mut rows = Vec::new();
    for &method in &sc.methods {
        for &q in &sc.fdr_targets {
            let cell: Vec<&ReplicateRecord> = records
                .iter()
                .filter(|r| r.method == method && r.fdr_target == q)
                .collect();
            let (fdr, fdr_se) = mean_se(&cell.iter().map(|r| r.fdr).collect::<Vec<_>>());
            let (power, power_se) = mean_se(&cell.iter().map(|r| r.power).collect::<Vec<_>>());
            rows.push(SummaryRow {
                method,
                fdr_target: q,
                fdr,
                fdr_se,
                power,
                power_se,
                replicates_used: cell.len(),
            });
        }
    }
    ExperimentReport {
        rows,
        records,
        failures,
        mean_k: (!ks.is_empty()).then(|| ks.iter().sum::<f64>() / ks.len() as f64),
        n_variants: setup.n_variants(),
    }
}
