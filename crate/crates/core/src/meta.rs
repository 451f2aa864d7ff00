//! Combining Z-scores from several, possibly overlapping, studies.
//!
//! Weights minimise `wᵀ C w` subject to `Σ w_l √n_l = 1, w ≥ 0`, where `C`
//! is the between-study null correlation induced by shared samples. The
//! combined score is `Σ w_l z_l / √(wᵀ C w)`, which is standard normal under
//! the null and has mean `δ / √(wᵀ C w)` when `E z_l = δ √n_l`, so the
//! weights maximise power.

use nalgebra::{DMatrix, DVector};

use crate::assoc::{p_to_z, z_to_p, P_FLOOR};
use crate::error::{GkError, Result};
use crate::ld_panel::LdPanel;
use crate::linalg::{min_eigenvalue, nearest_correlation_clip};
use crate::zscore::{ZProvenance, ZVector};

pub const MAX_STUDIES: usize = 20;
pub const NULL_Z_CUTOFF: f64 = 2.0;
pub const MIN_NULL_VARIANTS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub name: String,
    pub n: f64,
    pub z: ZVector,
}

#[derive(Debug, Clone)]
pub struct StudyPanel {
    studies: Vec<Study>,
    cor_s: DMatrix<f64>,
}

impl StudyPanel {
    pub fn new(studies: Vec<Study>, cor_s: DMatrix<f64>) -> Result<StudyPanel> {
        let l = studies.len();
        if l == 0 {
            return Err(GkError::Data("no studies".into()));
        }
        if cor_s.nrows() != l || cor_s.ncols() != l {
            return Err(GkError::Data(format!("study correlation is not {l}×{l}")));
        }
        for s in &studies {
            if !(s.n > 0.0 && s.n.is_finite()) {
                return Err(GkError::Data(format!("study '{}' has sample size {}", s.name, s.n)));
            }
            if s.z.variants != studies[0].z.variants {
                return Err(GkError::Data(format!(
                    "study '{}' is not aligned to the shared variant order",
                    s.name
                )));
            }
        }
        for i in 0..l {
            if (cor_s[(i, i)] - 1.0).abs() > 1e-8 {
                return Err(GkError::Data("study correlation diagonal must be 1".into()));
            }
            for j in 0..l {
                if (cor_s[(i, j)] - cor_s[(j, i)]).abs() > 1e-8 || !cor_s[(i, j)].is_finite() {
                    return Err(GkError::Data("study correlation must be symmetric".into()));
                }
            }
        }
        if min_eigenvalue(&cor_s) < -1e-8 {
            return Err(GkError::Data("study correlation is not PSD".into()));
        }
        Ok(StudyPanel { studies, cor_s })
    }

    pub fn studies(&self) -> &[Study] {
        &self.studies
    }

    pub fn cor_s(&self) -> &DMatrix<f64> {
        &self.cor_s
    }

    pub fn len(&self) -> usize {
        self.studies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.studies.is_empty()
    }

    fn sqrt_n(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.studies.iter().map(|s| s.n.sqrt()))
    }
}

/// Empirical correlation of the studies' Z-scores over variants that look
/// null in every study (`|z| < 2`), after LD whitening when a panel is given.
pub fn estimate_study_correlation(studies: &[Study], ld: Option<&LdPanel>) -> Result<DMatrix<f64>> {
    let l = studies.len();
    if l == 0 {
        return Err(GkError::Data("no studies".into()));
    }
    if l == 1 {
        return Ok(DMatrix::identity(1, 1));
    }
    let variants = &studies[0].z.variants;
    if studies.iter().any(|s| &s.z.variants != variants) {
        return Err(GkError::Data("studies are not aligned to one variant order".into()));
    }
    let mut eligible: Vec<usize> = (0..variants.len())
        .filter(|&j| studies.iter().all(|s| s.z.z[j].abs() < NULL_Z_CUTOFF))
        .collect();
    let ld_pos: Option<Vec<usize>> = ld.map(|panel| {
        let idx = panel.index();
        eligible.retain(|&j| idx.contains_key(&variants[j]));
        eligible.iter().map(|&j| idx[&variants[j]]).collect()
    });
    if eligible.len() < MIN_NULL_VARIANTS {
        return Err(GkError::Estimation(format!(
            "{} null-eligible variants, need at least {MIN_NULL_VARIANTS}",
            eligible.len()
        )));
    }
    let k = eligible.len();
    let mut zs = DMatrix::from_fn(k, l, |r, c| studies[c].z.z[eligible[r]]);
    if let (Some(panel), Some(pos)) = (ld, ld_pos) {
        let sub = panel.subset(&pos);
        let chol = sub.sigma().clone().cholesky().ok_or_else(|| {
            GkError::Numerical("LD submatrix of null variants is singular; regularize it".into())
        })?;
        zs = chol
            .l()
            .solve_lower_triangular(&zs)
            .ok_or_else(|| GkError::Numerical("LD whitening failed".into()))?;
    }
    let means: Vec<f64> = (0..l).map(|c| zs.column(c).mean()).collect();
    let mut cov = DMatrix::zeros(l, l);
    for a in 0..l {
        for b in a..l {
            let v: f64 = (0..k)
                .map(|r| (zs[(r, a)] - means[a]) * (zs[(r, b)] - means[b]))
                .sum();
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let mut cor = DMatrix::from_fn(l, l, |a, b| cov[(a, b)] / (cov[(a, a)] * cov[(b, b)]).sqrt());
    if cor.iter().any(|v| !v.is_finite()) {
        return Err(GkError::Estimation("a study has constant null Z-scores".into()));
    }
    for i in 0..l {
        cor[(i, i)] = 1.0;
    }
    Ok(nearest_correlation_clip(&cor))
}

/// Minimum-variance non-negative weights by enumerating active sets.
///
/// Each support solves its equality-constrained QP through the KKT system
/// (pseudo-inverse, so rank-deficient correlation picks the minimum-norm
/// point). Ties within `1e-12` go to the larger support.
pub fn optimal_weights(panel: &StudyPanel) -> Result<Vec<f64>> {
    let l = panel.len();
    if l > MAX_STUDIES {
        return Err(GkError::UnsupportedSize(format!(
            "{l} studies; at most {MAX_STUDIES} are supported"
        )));
    }
    let a = panel.sqrt_n();
    if l == 1 {
        return Ok(vec![1.0 / a[0]]);
    }
    let c = panel.cor_s();
    let mut best: Option<(f64, usize, DVector<f64>)> = None;
    for mask in 1u32..(1u32 << l) {
        let support: Vec<usize> = (0..l).filter(|&i| mask & (1 << i) != 0).collect();
        let k = support.len();
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        for (r, &i) in support.iter().enumerate() {
            for (s, &j) in support.iter().enumerate() {
                kkt[(r, s)] = 2.0 * c[(i, j)];
            }
            kkt[(r, k)] = a[i];
            kkt[(k, r)] = a[i];
        }
        let mut rhs = DVector::zeros(k + 1);
        rhs[k] = 1.0;
        let Ok(pinv) = kkt.pseudo_inverse(1e-12) else {
            continue;
        };
        let sol = pinv * rhs;
        let mut w = DVector::zeros(l);
        for (r, &i) in support.iter().enumerate() {
            w[i] = sol[r];
        }
        if w.iter().any(|&v| v < -1e-12) || (a.dot(&w) - 1.0).abs() > 1e-10 {
            continue;
        }
        let obj = w.dot(&(c * &w));
        let better = match &best {
            None => true,
            Some((b_obj, b_k, _)) => {
                let tol = 1e-12 * (1.0 + b_obj.abs());
                obj < b_obj - tol || ((obj - b_obj).abs() <= tol && k > *b_k)
            }
        };
        if better {
            best = Some((obj, k, w));
        }
    }
    let (_, _, mut w) =
        best.ok_or_else(|| GkError::Numerical("no feasible meta-analysis weights".into()))?;
    w.iter_mut().for_each(|v| *v = v.max(0.0));
    let scale = a.dot(&w);
    Ok(w.iter().map(|v| v / scale).collect())
}

pub fn weight_objective(panel: &StudyPanel, w: &[f64]) -> f64 {
    let w = DVector::from_column_slice(w);
    w.dot(&(panel.cor_s() * &w))
}

#[derive(Debug, Clone)]
pub struct MetaResult {
    pub z: ZVector,
    pub weights: Vec<f64>,
    /// `wᵀ C w`, the null variance of the unnormalised combination.
    pub normalization: f64,
}

pub fn meta_z(panel: &StudyPanel, weights: &[f64]) -> Result<MetaResult> {
    if weights.len() != panel.len() {
        return Err(GkError::Data(format!(
            "{} weights for {} studies",
            weights.len(),
            panel.len()
        )));
    }
    let normalization = weight_objective(panel, weights);
    if !(normalization > 0.0) {
        return Err(GkError::Degenerate("combined null variance is zero".into()));
    }
    let sd = normalization.sqrt();
    let first = &panel.studies()[0].z;
    let z: Vec<f64> = (0..first.len())
        .map(|j| {
            if panel.len() == 1 {
                // w z / |w| is z exactly; skip the roundoff
                return first.z[j];
            }
            panel
                .studies()
                .iter()
                .zip(weights)
                .map(|(s, w)| w * s.z.z[j])
                .sum::<f64>()
                / sd
        })
        .collect();
    let n_total = panel.studies().iter().map(|s| s.n).sum::<f64>();
    let z = ZVector::with_provenance(
        first.variants.clone(),
        z,
        Some(vec![n_total; first.len()]),
        ZProvenance::MetaCombined,
    )?;
    Ok(MetaResult {
        z,
        weights: weights.to_vec(),
        normalization,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherResult {
    pub statistic: f64,
    pub p: f64,
    pub clamped: bool,
}

/// Upper tail of `χ²` with `2k` degrees of freedom:
/// `e^{-x/2} Σ_{i<k} (x/2)^i / i!`.
fn chi2_even_upper_tail(x: f64, k: usize) -> f64 {
    let h = 0.5 * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 1..k {
        term *= h / i as f64;
        sum += term;
    }
    ((-h).exp() * sum).min(1.0)
}

pub fn fisher_combine(p_values: &[f64]) -> Result<FisherResult> {
    if p_values.is_empty() {
        return Err(GkError::Data("no p-values to combine".into()));
    }
    let mut clamped = false;
    let mut stat = 0.0;
    for &p in p_values {
        if !(0.0..=1.0).contains(&p) {
            return Err(GkError::Data(format!("p-value {p} is outside [0, 1]")));
        }
        if p < P_FLOOR {
            clamped = true;
        }
        stat -= 2.0 * p.max(P_FLOOR).ln();
    }
    Ok(FisherResult {
        statistic: stat,
        p: chi2_even_upper_tail(stat, p_values.len()),
        clamped,
    })
}

/// Fisher-combined Z per variant, signed by `Σ n_l z_l`.
pub fn fisher_z(panel: &StudyPanel) -> Result<ZVector> {
    let first = &panel.studies()[0].z;
    let mut z = Vec::with_capacity(first.len());
    for j in 0..first.len() {
        let ps: Vec<f64> = panel.studies().iter().map(|s| z_to_p(s.z.z[j])).collect();
        let combined = fisher_combine(&ps)?;
        let direction: f64 = panel.studies().iter().map(|s| s.n * s.z.z[j]).sum();
        let sign = if direction > 0.0 {
            1
        } else if direction < 0.0 {
            -1
        } else {
            0
        };
        z.push(p_to_z(combined.p, sign)?.z);
    }
    ZVector::with_provenance(first.variants.clone(), z, None, ZProvenance::MetaCombined)
}
