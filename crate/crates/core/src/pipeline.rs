//! Block-wise knockoff selection from summary statistics.
//!
//! Each LD block is matched to the Z-scores, clustered, and knocked off on
//! its cluster representatives with its own seed. The threshold is then
//! taken over all blocks jointly and selections are expanded within
//! clusters.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::assoc::z_to_p;
use crate::error::{GkError, Result};
use crate::filter::{feature_stats, knockoff_threshold, q_values, FeatureStats};
use crate::knockoff::{build_transform, sample_knockoffs, solve_diag, DiagMethod, DEFAULT_COPIES};
use crate::ld_panel::{cluster_variants, expand_selection, ClusterAssignment, LdPanel};
use crate::ld_panel::{DEFAULT_CLUSTER_CUTOFF, DEFAULT_REGULARIZATION};
use crate::rng::derive_seed;
use crate::sumstats::match_to_panel;
use crate::variant::VariantId;
use crate::zscore::ZVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterOptions {
    pub copies: usize,
    pub fdr: f64,
    pub seed: u64,
    pub diag_method: DiagMethod,
    pub regularization: f64,
    pub cluster_cutoff: f64,
}

impl Default for FilterOptions {
    fn default() -> Self {
        FilterOptions {
            copies: DEFAULT_COPIES,
            fdr: 0.1,
            seed: 1,
            diag_method: DiagMethod::SdpAscent,
            regularization: DEFAULT_REGULARIZATION,
            cluster_cutoff: DEFAULT_CLUSTER_CUTOFF,
        }
    }
}

impl FilterOptions {
    pub fn validate(&self) -> Result<()> {
        if self.copies == 0 {
            return Err(GkError::Precondition("need at least one knockoff copy".into()));
        }
        if !(self.fdr > 0.0 && self.fdr < 1.0) {
            return Err(GkError::Precondition(format!("FDR target {} is outside (0, 1)", self.fdr)));
        }
        if !(0.0..1.0).contains(&self.regularization) {
            return Err(GkError::Precondition("regularization must lie in [0, 1)".into()));
        }
        if !(self.cluster_cutoff > 0.0 && self.cluster_cutoff <= 1.0) {
            return Err(GkError::Precondition("cluster cutoff must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// One LD block after knockoff sampling, before the joint threshold.
#[derive(Debug, Clone)]
pub struct BlockResult {
    pub block: usize,
    pub panel: LdPanel,
    pub z: ZVector,
    pub clusters: ClusterAssignment,
    /// Panel indices of the representatives, in the order of `stats`.
    pub reps: Vec<usize>,
    pub knockoffs: Vec<Vec<f64>>,
    pub stats: FeatureStats,
    pub seed: u64,
    /// Rows in the summary statistics the block was matched against.
    pub n_sumstats: usize,
    pub dropped_panel: usize,
}

/// Match, cluster and sample knockoffs for block number `block`; `None`
/// when the block shares no variant with `z`.
pub fn run_block(block: usize, panel: &LdPanel, z: &ZVector, opts: &FilterOptions) -> Result<Option<BlockResult>> {
    opts.validate()?;
    let m = match match_to_panel(panel, z) {
        Ok(m) => m,
        Err(GkError::NoOverlap(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let clusters = cluster_variants(&m.panel, opts.cluster_cutoff);
    let mut reps = clusters.representatives().to_vec();
    reps.sort_unstable();
    let rep_panel = m.panel.subset(&reps).regularize(opts.regularization);
    let diag = solve_diag(&rep_panel, opts.diag_method, opts.copies)?;
    let transform = build_transform(&rep_panel, &diag, opts.copies)?;
    let rep_z: Vec<f64> = reps.iter().map(|&i| m.z.z[i]).collect();
    let seed = derive_seed(opts.seed, block as u64);
    let knockoffs = sample_knockoffs(&transform, &rep_z, seed)?;
    let stats = feature_stats(&rep_z, &knockoffs)?;
    Ok(Some(BlockResult {
        block,
        panel: m.panel,
        z: m.z,
        clusters,
        reps,
        knockoffs,
        stats,
        seed,
        n_sumstats: z.len(),
        dropped_panel: m.dropped_panel,
    }))
}

/// Per-variant row of the selection table.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantRow {
    pub id: VariantId,
    pub block: usize,
    pub cluster: usize,
    pub representative: bool,
    pub z: f64,
    /// Filled for representatives only.
    pub kappa: Option<usize>,
    pub tau: Option<f64>,
    pub w: Option<f64>,
    /// q-value of the variant's cluster representative.
    pub q: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub threshold: f64,
    pub fdr: f64,
    pub copies: usize,
    pub n_representatives: usize,
    pub selected_representatives: usize,
    pub rows: Vec<VariantRow>,
    pub block_seeds: Vec<u64>,
    pub dropped_sumstats: usize,
    pub dropped_panel: usize,
}

/// Joint threshold over blocks (given in block order) and cluster
/// expansion of the selected representatives.
pub fn combine_blocks(blocks: &[BlockResult], fdr: f64) -> Result<FilterResult> {
    if blocks.is_empty() {
        return Err(GkError::NoOverlap(
            "no variant is shared by the summary statistics and the LD panels".into(),
        ));
    }
    let stats = FeatureStats::concat(&blocks.iter().map(|b| b.stats.clone()).collect::<Vec<_>>())?;
    let sel = knockoff_threshold(&stats, fdr)?;
    let q = q_values(&stats);
    let mut rows = Vec::new();
    let mut offset = 0;
    for b in blocks {
        let mut rep_pos = vec![None; b.panel.len()];
        for (k, &i) in b.reps.iter().enumerate() {
            rep_pos[i] = Some(offset + k);
        }
        let chosen: BTreeSet<VariantId> = b
            .reps
            .iter()
            .enumerate()
            .filter(|(k, _)| sel.selected.contains(&(offset + k)))
            .map(|(_, &i)| b.panel.variants()[i].clone())
            .collect();
        let expanded = expand_selection(&b.clusters, &b.panel, &chosen, &b.z)?;
        for (i, id) in b.panel.variants().iter().enumerate() {
            let c = b.clusters.cluster_of(i);
            let rep = b.clusters.representative(c);
            let g = rep_pos[rep].expect("every representative has statistics");
            let own = rep_pos[i];
            rows.push(VariantRow {
                id: id.clone(),
                block: b.block,
                cluster: c,
                representative: own.is_some(),
                z: b.z.z[i],
                kappa: own.map(|g| stats.kappa[g]),
                tau: own.map(|g| stats.tau[g]),
                w: own.map(|g| stats.w[g]),
                q: q[g],
                selected: expanded.contains(id),
            });
        }
        offset += b.reps.len();
    }
    Ok(FilterResult {
        threshold: sel.threshold,
        fdr,
        copies: stats.copies,
        n_representatives: stats.len(),
        selected_representatives: sel.selected.len(),
        rows,
        block_seeds: blocks.iter().map(|b| b.seed).collect(),
        dropped_sumstats: blocks[0]
            .n_sumstats
            .saturating_sub(blocks.iter().map(|b| b.panel.len()).sum()),
        dropped_panel: blocks.iter().map(|b| b.dropped_panel).sum(),
    })
}

/// Sequential convenience wrapper over [`run_block`] and [`combine_blocks`].
pub fn knockoff_filter(panels: &[LdPanel], z: &ZVector, opts: &FilterOptions) -> Result<FilterResult> {
    let blocks = panels
        .iter()
        .enumerate()
        .filter_map(|(b, p)| run_block(b, p, z, opts).transpose())
        .collect::<Result<Vec<_>>>()?;
    combine_blocks(&blocks, opts.fdr)
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

impl FilterResult {
    pub fn selected(&self) -> Vec<&VariantId> {
        self.rows.iter().filter(|r| r.selected).map(|r| &r.id).collect()
    }

    /// variant, Z, T, kappa, tau, W, q, selected, cluster, representative
    pub fn selection_table(&self) -> String {
        let mut out = String::from("variant\tz\tT\tkappa\ttau\tW\tq\tselected\tcluster\trepresentative\n");
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}:{}\t{}",
                r.id,
                r.z,
                r.z * r.z,
                opt(r.kappa),
                opt(r.tau),
                opt(r.w),
                r.q,
                u8::from(r.selected),
                r.block,
                r.cluster,
                u8::from(r.representative)
            )
            .unwrap();
        }
        out
    }

    /// variant, chrom, pos, W, q, -log10 p; W and q are the cluster
    /// representative's.
    pub fn manhattan_table(&self) -> String {
        let mut out = String::from("variant\tchrom\tpos\tW\tq\tneg_log10_p\n");
        let mut rep_w = std::collections::HashMap::new();
        for r in self.rows.iter().filter(|r| r.representative) {
            rep_w.insert((r.block, r.cluster), r.w.unwrap_or(0.0));
        }
        for r in &self.rows {
            let p = z_to_p(r.z).max(f64::MIN_POSITIVE);
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.id,
                r.id.chrom,
                r.id.pos,
                rep_w[&(r.block, r.cluster)],
                r.q,
                -p.log10()
            )
            .unwrap();
        }
        out
    }
}
