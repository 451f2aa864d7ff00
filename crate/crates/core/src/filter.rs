//! Multiple-knockoff feature statistics and the FDR-controlling threshold.
//!
//! Importance is the squared Z-score. For each variant, `kappa` names the
//! largest of the `M + 1` importances (0 = original, ties favour the
//! original then the lowest copy) and `tau` is the gap between that maximum
//! and the median of the values that remain once every copy of the maximum
//! is removed. Selection uses `(kappa, tau)` with the multiple-knockoff
//! threshold
//!
//! ```text
//! min { t : (1/M + #{kappa ≥ 1, tau ≥ t}/M) / max(1, #{kappa = 0, tau ≥ t}) ≤ q }
//! ```

use std::collections::BTreeSet;

use crate::error::{GkError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub copies: usize,
    pub kappa: Vec<usize>,
    pub tau: Vec<f64>,
    pub w: Vec<f64>,
}

impl FeatureStats {
    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    /// Concatenate per-block statistics in block order.
    pub fn concat(blocks: &[FeatureStats]) -> Result<FeatureStats> {
        let copies = blocks.first().map_or(1, |b| b.copies);
        if blocks.iter().any(|b| b.copies != copies) {
            return Err(GkError::Data("blocks used different numbers of copies".into()));
        }
        let mut out = FeatureStats {
            copies,
            kappa: vec![],
            tau: vec![],
            w: vec![],
        };
        for b in blocks {
            out.kappa.extend_from_slice(&b.kappa);
            out.tau.extend_from_slice(&b.tau);
            out.w.extend_from_slice(&b.w);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub threshold: f64,
    pub selected: BTreeSet<usize>,
    pub fdr_target: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// `kappa`, `tau` and `W` for one variant from its importances
/// (index 0 = original).
fn stats_for(importance: &[f64]) -> (usize, f64, f64) {
    let mut kappa = 0;
    for (m, &t) in importance.iter().enumerate().skip(1) {
        if t > importance[kappa] {
            kappa = m;
        }
    }
    let t_max = importance[kappa];
    let mut rest: Vec<f64> = importance.iter().copied().filter(|&t| t != t_max).collect();
    let tau = if rest.is_empty() {
        0.0
    } else {
        t_max - median(&mut rest)
    };
    let mut knock: Vec<f64> = importance[1..].to_vec();
    let k_max = knock.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w = if importance[0] >= k_max {
        importance[0] - median(&mut knock)
    } else {
        0.0
    };
    (kappa, tau, w)
}

/// Statistics from original `z` and `M` knockoff vectors of the same length.
pub fn feature_stats(z: &[f64], knockoffs: &[Vec<f64>]) -> Result<FeatureStats> {
    let copies = knockoffs.len();
    if copies == 0 {
        return Err(GkError::Precondition("need at least one knockoff copy".into()));
    }
    if let Some(k) = knockoffs.iter().find(|k| k.len() != z.len()) {
        return Err(GkError::Data(format!(
            "knockoff vector of length {} for {} variants",
            k.len(),
            z.len()
        )));
    }
    let mut out = FeatureStats {
        copies,
        kappa: Vec::with_capacity(z.len()),
        tau: Vec::with_capacity(z.len()),
        w: Vec::with_capacity(z.len()),
    };
    let mut imp = vec![0.0; copies + 1];
    for j in 0..z.len() {
        imp[0] = z[j] * z[j];
        for (m, k) in knockoffs.iter().enumerate() {
            imp[m + 1] = k[j] * k[j];
        }
        let (kappa, tau, w) = stats_for(&imp);
        out.kappa.push(kappa);
        out.tau.push(tau);
        out.w.push(w);
    }
    Ok(out)
}

/// Candidate thresholds in descending order with the filter ratio at each.
fn ratio_path(stats: &FeatureStats) -> Vec<(f64, f64)> {
    let m = stats.copies as f64;
    let mut order: Vec<usize> = (0..stats.len()).filter(|&j| stats.tau[j] > 0.0).collect();
    order.sort_by(|&a, &b| stats.tau[b].total_cmp(&stats.tau[a]));
    let mut path = Vec::new();
    let (mut pos, mut neg) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let t = stats.tau[order[k]];
        while k < order.len() && stats.tau[order[k]] == t {
            if stats.kappa[order[k]] == 0 {
                pos += 1;
            } else {
                neg += 1;
            }
            k += 1;
        }
        // one rounding, so a ratio that equals the target exactly in
        // rational arithmetic compares equal to it
        let ratio = (1 + neg) as f64 / (m * pos.max(1) as f64);
        path.push((t, ratio));
    }
    path
}

/// Smallest feasible threshold at level `fdr_target`; `+∞` and no
/// selections if none qualifies.
pub fn knockoff_threshold(stats: &FeatureStats, fdr_target: f64) -> Result<SelectionResult> {
    if !(fdr_target > 0.0 && fdr_target < 1.0) {
        return Err(GkError::Precondition(format!(
            "FDR target {fdr_target} is not in (0, 1)"
        )));
    }
    let threshold = ratio_path(stats)
        .into_iter()
        .filter(|&(_, r)| r <= fdr_target)
        .map(|(t, _)| t)
        .fold(f64::INFINITY, f64::min);
    let selected = if threshold.is_finite() {
        (0..stats.len())
            .filter(|&j| stats.kappa[j] == 0 && stats.tau[j] >= threshold)
            .collect()
    } else {
        BTreeSet::new()
    };
    Ok(SelectionResult {
        threshold,
        selected,
        fdr_target,
    })
}

/// Smallest target at which each variant is selected (1 if never).
///
/// Variant `j` is selected at level `q` iff some candidate `t ≤ tau_j` has
/// ratio `≤ q`, so its q-value is the running minimum of the ratio over
/// candidates at or below `tau_j`.
pub fn q_values(stats: &FeatureStats) -> Vec<f64> {
    let path = ratio_path(stats);
    // path is descending in t; suffix minima give min over t' ≤ t
    let mut suffix_min = vec![f64::INFINITY; path.len()];
    let mut best = f64::INFINITY;
    for k in (0..path.len()).rev() {
        best = best.min(path[k].1);
        suffix_min[k] = best;
    }
    (0..stats.len())
        .map(|j| {
            if stats.kappa[j] != 0 || stats.tau[j] <= 0.0 {
                return 1.0;
            }
            let tau = stats.tau[j];
            let k = path.partition_point(|&(t, _)| t > tau);
            suffix_min.get(k).copied().unwrap_or(f64::INFINITY).min(1.0)
        })
        .collect()
}
