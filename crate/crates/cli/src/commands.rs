use anyhow::{Context, Result};
use gk_core::assoc::{mixed_model_null_fit, naive_null_fit, score_test, Family, FixedEffectModel, ScoreResult};
use gk_core::knockoff::{solve_diag, DiagMethod};
use gk_core::ld_panel::LdPanel;
use gk_core::meta::{estimate_study_correlation, fisher_z, meta_z, optimal_weights, StudyPanel};
use gk_core::pipeline::{combine_blocks, run_block, FilterOptions, FilterResult};
use gk_core::sim::{parse_scenario, run_experiment};
use gk_core::sumstats::{format_sumstats, load_sumstats};
use gk_core::{GkError, ZProvenance, ZVector};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::args::*;
use crate::io::{load_cohort, load_ld, load_studies};
use crate::manifest::Manifest;

fn diag_method(c: DiagChoice) -> DiagMethod {
    match c {
        DiagChoice::Sdp => DiagMethod::SdpAscent,
        DiagChoice::Equi => DiagMethod::Equi,
    }
}

fn family(t: Trait) -> Family {
    match t {
        Trait::Gaussian => Family::Gaussian,
        Trait::Binomial => Family::Binomial,
    }
}

fn model_name(m: Model) -> &'static str {
    match m {
        Model::Mixed => "mixed",
        Model::Naive => "naive",
        Model::Wald => "wald",
        Model::Lrt => "lrt",
    }
}

pub fn solve_d(a: &SolveDArgs) -> Result<()> {
    let panel = load_ld(&a.ld, a.format)?;
    let d = solve_diag(&panel, diag_method(a.method), a.m)?;
    let mut out = String::from("variant\ts\n");
    for (id, s) in panel.variants().iter().zip(&d.s) {
        out.push_str(&format!("{id}\t{s}\n"));
    }
    let mut m = Manifest::new("solve-d");
    m.set("method", d.method.to_string());
    m.set("m", a.m);
    m.set("objective", d.objective());
    m.input(&a.ld);
    m.output("diag.tsv", out);
    m.write(&a.common.out)?;
    log::info!("solved {} diagonal entries, objective {}", d.s.len(), d.objective());
    Ok(())
}

fn filter_options(k: &KnockoffOpts) -> FilterOptions {
    FilterOptions {
        copies: k.m,
        fdr: k.fdr,
        seed: k.seed,
        diag_method: diag_method(k.method),
        regularization: k.regularization,
        cluster_cutoff: k.cluster_cutoff,
    }
}

fn record_knockoff(m: &mut Manifest, k: &KnockoffOpts) {
    m.set("m", k.m);
    m.set("fdr", k.fdr);
    m.set("method", diag_method(k.method).to_string());
    m.set("regularization", k.regularization);
    m.set("cluster_cutoff", k.cluster_cutoff);
    m.seed(k.seed);
    for p in &k.ld {
        m.input(p);
    }
}

/// Blocks run in parallel; each has its own derived seed and the results
/// are merged in block order, so the worker count never changes the output.
fn run_filter(k: &KnockoffOpts, z: &ZVector) -> Result<FilterResult> {
    let opts = filter_options(k);
    opts.validate()?;
    let panels: Vec<LdPanel> = k
        .ld
        .par_iter()
        .map(|p| load_ld(p, k.format))
        .collect::<Result<_>>()?;
    let blocks = panels
        .par_iter()
        .enumerate()
        .map(|(b, p)| run_block(b, p, z, &opts).with_context(|| format!("LD block {}", k.ld[b].display())))
        .collect::<Result<Vec<_>>>()?;
    let blocks: Vec<_> = blocks.into_iter().flatten().collect();
    Ok(combine_blocks(&blocks, opts.fdr)?)
}

fn record_filter(m: &mut Manifest, r: &FilterResult) {
    m.set("threshold", if r.threshold.is_finite() { r.threshold.into() } else { serde_json::Value::Null });
    m.set("representatives", r.n_representatives);
    m.set("selected_representatives", r.selected_representatives);
    m.set("selected_variants", r.rows.iter().filter(|v| v.selected).count());
    m.set("dropped_sumstats", r.dropped_sumstats);
    m.set("dropped_panel", r.dropped_panel);
    m.set("block_seeds", r.block_seeds.clone());
    m.output("selection.tsv", r.selection_table());
    m.output("manhattan.tsv", r.manhattan_table());
}

fn report_filter(r: &FilterResult) {
    let n_sel = r.rows.iter().filter(|v| v.selected).count();
    println!(
        "selected {n_sel} of {} variants ({} of {} cluster representatives)",
        r.rows.len(),
        r.selected_representatives,
        r.n_representatives
    );
    if r.dropped_sumstats > 0 || r.dropped_panel > 0 {
        log::warn!(
            "{} summary-statistic rows had no LD panel entry; {} panel variants had no summary statistic",
            r.dropped_sumstats,
            r.dropped_panel
        );
    }
}

pub fn knockoff_filter(a: &FilterArgs) -> Result<()> {
    let s = load_sumstats(&a.sumstats)?;
    if !s.clamped.is_empty() {
        log::warn!("{} p-values were clamped at the floor", s.clamped.len());
    }
    let r = run_filter(&a.knockoff, &s.z)?;
    let mut m = Manifest::new("knockoff-filter");
    record_knockoff(&mut m, &a.knockoff);
    m.input(&a.sumstats);
    record_filter(&mut m, &r);
    m.write(&a.common.out)?;
    report_filter(&r);
    Ok(())
}

/// Z-scores for every genotype column; degenerate variants are dropped.
fn association(c: &CohortOpts, m: &mut Manifest) -> Result<ZVector> {
    let file = load_cohort(&c.cohort, c.kinship.as_deref())?;
    let cohort = &file.cohort;
    let fam = family(c.trait_);
    let p = cohort.n_variants();
    let results: Vec<gk_core::Result<ScoreResult>> = match c.model {
        Model::Mixed | Model::Naive => {
            let null = if c.model == Model::Mixed {
                mixed_model_null_fit(cohort, fam)?
            } else {
                naive_null_fit(cohort, fam)?
            };
            (0..p).into_par_iter().map(|j| score_test(&null, &cohort.genotype(j))).collect()
        }
        Model::Wald | Model::Lrt => {
            if cohort.kinship.as_ref().is_some_and(|k| !k.is_identity()) {
                return Err(GkError::Precondition(
                    "Wald and likelihood-ratio tests need unrelated samples; drop --kinship or use --model mixed"
                        .into(),
                )
                .into());
            }
            let fe = FixedEffectModel::fit(&cohort.y, &cohort.x, fam)?;
            let wald = c.model == Model::Wald;
            (0..p)
                .into_par_iter()
                .map(|j| {
                    let g = cohort.genotype(j);
                    if wald {
                        fe.wald(&g)
                    } else {
                        fe.lrt(&g)
                    }
                })
                .collect()
        }
    };
    let mut ids = Vec::with_capacity(p);
    let mut z = Vec::with_capacity(p);
    let mut degenerate = 0usize;
    for (id, r) in file.variants.iter().zip(results) {
        match r {
            Ok(r) => {
                ids.push(id.clone());
                z.push(r.z);
            }
            Err(GkError::DegenerateVariant(msg)) => {
                log::warn!("{id}: {msg}; dropped");
                degenerate += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
    if ids.is_empty() {
        return Err(GkError::Degenerate("every variant is degenerate".into()).into());
    }
    m.set("model", model_name(c.model));
    m.set("trait", fam.to_string());
    m.set("individuals", cohort.n());
    m.set("degenerate_variants", degenerate);
    m.input(&c.cohort);
    if let Some(k) = &c.kinship {
        m.input(k);
    }
    let n = vec![cohort.n() as f64; ids.len()];
    Ok(ZVector::with_provenance(ids, z, Some(n), ZProvenance::Direct)?)
}

pub fn assoc(a: &AssocArgs) -> Result<()> {
    let mut m = Manifest::new("assoc");
    let z = association(&a.cohort, &mut m)?;
    m.output("sumstats.tsv", format_sumstats(&z));
    m.write(&a.common.out)?;
    println!("{} variants tested", z.len());
    Ok(())
}

fn meta_analysis(s: &StudyOpts, m: &mut Manifest) -> Result<ZVector> {
    let (studies, files) = load_studies(&s.manifest)?;
    let l = studies.len();
    let cor = if s.independent || l == 1 {
        DMatrix::identity(l, l)
    } else {
        estimate_study_correlation(&studies, None)?
    };
    let panel = StudyPanel::new(studies, cor)?;
    let mut weights_tsv = String::from("study\tn\tweight\n");
    let z = match s.combine {
        Combine::Weighted => {
            let w = optimal_weights(&panel)?;
            for (st, w) in panel.studies().iter().zip(&w) {
                weights_tsv.push_str(&format!("{}\t{}\t{}\n", st.name, st.n, w));
            }
            meta_z(&panel, &w)?.z
        }
        Combine::Fisher => fisher_z(&panel)?,
    };
    m.set("combine", if s.combine == Combine::Weighted { "weighted" } else { "fisher" });
    m.set("independent", s.independent);
    m.set("studies", l);
    m.set(
        "study_correlation",
        (0..l)
            .map(|i| (0..l).map(|j| panel.cor_s()[(i, j)]).collect::<Vec<f64>>())
            .collect::<Vec<_>>(),
    );
    m.input(&s.manifest);
    for f in &files {
        m.input(f);
    }
    if s.combine == Combine::Weighted {
        m.output("weights.tsv", weights_tsv);
    }
    Ok(z)
}

pub fn meta(a: &MetaArgs) -> Result<()> {
    let mut m = Manifest::new("meta");
    let z = meta_analysis(&a.studies, &mut m)?;
    m.output("sumstats.tsv", format_sumstats(&z));
    m.write(&a.common.out)?;
    println!("{} variants combined", z.len());
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.scenario).map_err(|e| GkError::io(&a.scenario, e))?;
    let mut sc = parse_scenario(&text).with_context(|| format!("scenario {}", a.scenario.display()))?;
    if let Some(s) = a.seed {
        sc.seed = s;
    }
    if let Some(r) = a.replicates {
        sc.replicates = r;
    }
    let report = run_experiment(&sc)?;
    let mut m = Manifest::new("simulate");
    m.seed(sc.seed);
    m.set("replicates", sc.replicates);
    m.set("variants", report.n_variants);
    m.set("failed_replicates", report.failures.len());
    m.set("mean_k", report.mean_k);
    m.set("scenario", format!("{sc:?}"));
    m.input(&a.scenario);
    if let Some(h) = &sc.haplotypes {
        m.input(h);
    }
    m.output("summary.tsv", report.to_tsv());
    m.output("replicates.tsv", report.replicate_log());
    m.write(&a.common.out)?;
    for (rep, msg) in &report.failures {
        log::warn!("replicate {rep} failed: {msg}");
    }
    print!("{}", report.to_tsv());
    Ok(())
}

pub fn pipeline(a: &PipelineArgs) -> Result<()> {
    let mut m = Manifest::new("pipeline");
    let z = match (&a.cohort, &a.studies) {
        (Some(cohort), None) => {
            let c = CohortOpts {
                cohort: cohort.clone(),
                kinship: a.kinship.clone(),
                model: a.model,
                trait_: a.trait_,
            };
            association(&c, &mut m)?
        }
        (None, Some(studies)) => {
            let s = StudyOpts {
                manifest: studies.clone(),
                combine: a.combine,
                independent: a.independent,
            };
            meta_analysis(&s, &mut m)?
        }
        _ => unreachable!("clap enforces exactly one source"),
    };
    // the filter sees exactly what a separate filter run would read back
    let text = format_sumstats(&z);
    let z = gk_core::sumstats::parse_sumstats(&text)?.z;
    let r = run_filter(&a.knockoff, &z)?;
    record_knockoff(&mut m, &a.knockoff);
    m.output("sumstats.tsv", text);
    record_filter(&mut m, &r);
    m.write(&a.common.out)?;
    report_filter(&r);
    Ok(())
}

/// Exit status for an error: 2 input or usage, 3 nothing to work on,
/// 4 numerical failure.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let Some(g) = err.chain().find_map(|e| e.downcast_ref::<GkError>()) else {
        return 2;
    };
    match g {
        GkError::NoOverlap(_) => 3,
        GkError::Degenerate(_) | GkError::DegenerateVariant(_) => 4,
        e if e.is_numerical() => 4,
        _ => 2,
    }
}

