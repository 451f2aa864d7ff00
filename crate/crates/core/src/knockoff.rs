//! Knockoff Z-scores from summary statistics.
//!
//! For an LD block with correlation `Σ` and diagonal `D = diag(s)`, the `M`
//! knockoff copies are drawn as `Z̃ = P Z + E` with `E ~ N(0, V)`, where
//! every copy shares the conditional mean `(I - DΣ⁻¹) Z` and
//!
//! ```text
//! V = I_M ⊗ D + J_M ⊗ (D - DΣ⁻¹D)
//! ```
//!
//! so the joint Gram of `(Z, Z̃¹, …, Z̃ᴹ)` has `Σ` on every diagonal block
//! and `Σ - D` everywhere else. That Gram is PSD exactly when
//! `(M+1)/M · Σ - D ⪰ 0`, which is the constraint the diagonal solvers
//! enforce (it reduces to `2Σ - D ⪰ 0` for a single copy).
//!
//! `V` has only two distinct eigen-blocks: `D` (multiplicity `M-1`, on
//! contrasts between copies) and `(M+1)D - M·DΣ⁻¹D` (on the copy average).
//! Sampling uses that structure, so only `p × p` factorisations are needed:
//!
//! ```text
//! E^m = D^{1/2} (u_m - ū) + F ξ / √M,   F Fᵀ = (M+1)D - M·DΣ⁻¹D
//! ```

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{GkError, Result};
use crate::ld_panel::LdPanel;
use crate::linalg::{clip_psd, min_eigenvalue, psd_cholesky, spd_inverse};
use crate::rng::rng_from_seed;

pub const DEFAULT_COPIES: usize = 5;
pub const DEFAULT_SDP_MAX_ITERS: usize = 500;
pub const DEFAULT_SDP_TOL: f64 = 1e-8;

/// Distance kept from the PSD boundary by the coordinate ascent.
const SDP_MARGIN: f64 = 1e-9;
/// Negative eigenvalue mass tolerated in `V`, relative to its trace.
const CLIP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagMethod {
    Equi,
    SdpAscent,
}

impl std::str::FromStr for DiagMethod {
    type Err = GkError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equi" => Ok(DiagMethod::Equi),
            "sdp" | "sdp-ascent" => Ok(DiagMethod::SdpAscent),
            other => Err(GkError::Format(format!("unknown diagonal method `{other}`"))),
        }
    }
}

impl std::fmt::Display for DiagMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DiagMethod::Equi => "equi",
            DiagMethod::SdpAscent => "sdp",
        })
    }
}

/// Diagonal of `D`, solved for a given number of knockoff copies.
#[derive(Debug, Clone, PartialEq)]
pub struct KnockoffDiag {
    pub s: Vec<f64>,
    pub method: DiagMethod,
    pub copies: usize,
}

impl KnockoffDiag {
    /// `Σ_j |1 - s_j|`
    pub fn objective(&self) -> f64 {
        self.s.iter().map(|s| (1.0 - s).abs()).sum()
    }
}

/// `(M+1)/M`: the largest `c` with `c·Σ - D ⪰ 0` required for `M` copies.
pub fn constraint_factor(copies: usize) -> f64 {
    (copies as f64 + 1.0) / copies as f64
}

fn check_copies(copies: usize) -> Result<()> {
    if copies == 0 {
        return Err(GkError::Precondition("need at least one knockoff copy".into()));
    }
    Ok(())
}

fn positive_min_eigenvalue(panel: &LdPanel) -> Result<f64> {
    let lmin = min_eigenvalue(panel.sigma());
    if !(lmin > 0.0) {
        return Err(GkError::Precondition(format!(
            "LD matrix is not positive definite (min eigenvalue {lmin:e}); regularize it first"
        )));
    }
    Ok(lmin)
}

/// Equicorrelated diagonal: `s_j = min(1, (M+1)/M · λ_min(Σ))`.
pub fn solve_diag_equi(panel: &LdPanel, copies: usize) -> Result<KnockoffDiag> {
    check_copies(copies)?;
    if panel.is_empty() {
        return Ok(KnockoffDiag { s: vec![], method: DiagMethod::Equi, copies });
    }
    let lmin = positive_min_eigenvalue(panel)?;
    let s = (constraint_factor(copies) * lmin).min(1.0);
    Ok(KnockoffDiag {
        s: vec![s; panel.len()],
        method: DiagMethod::Equi,
        copies,
    })
}

/// Minimise `Σ_j |1 - s_j|` subject to `c·Σ - D ⪰ 0`, `0 ≤ s_j ≤ 1` by cyclic
/// coordinate ascent.
///
/// Starting from the equicorrelated point, each coordinate is raised to the
/// largest feasible value. For `A = c·Σ - D` the bound on `s_j` is the Schur
/// complement of `A_jj`, which equals `1 / (A⁻¹)_jj`; `A⁻¹` is kept current
/// with rank-one updates and refactored after every sweep.
pub fn solve_diag_sdp(
    panel: &LdPanel,
    copies: usize,
    max_iters: usize,
    tol: f64,
) -> Result<KnockoffDiag> {
    check_copies(copies)?;
    let p = panel.len();
    if p == 0 {
        return Ok(KnockoffDiag { s: vec![], method: DiagMethod::SdpAscent, copies });
    }
    let c = constraint_factor(copies);
    let lmin = positive_min_eigenvalue(panel)?;
    let scaled = panel.sigma() * c;
    let constraint = |s: &[f64]| {
        let mut a = scaled.clone();
        for (j, sj) in s.iter().enumerate() {
            a[(j, j)] -= sj;
        }
        a
    };

    let start = ((c * lmin).min(1.0) - SDP_MARGIN).max(0.0);
    let mut s = vec![start; p];
    let mut a_inv = spd_inverse(&constraint(&s))
        .map_err(|_| GkError::Solver("equicorrelated start is infeasible".into()))?;
    let mut objective: f64 = s.iter().map(|v| 1.0 - v).sum();

    for _ in 0..max_iters {
        let sweep_start = s.clone();
        for j in 0..p {
            let ajj = a_inv[(j, j)];
            if !(ajj > 0.0) {
                continue;
            }
            let target = (s[j] + 1.0 / ajj - SDP_MARGIN).min(1.0);
            let delta = target - s[j];
            if delta <= 0.0 {
                continue;
            }
            let denom = 1.0 - delta * ajj;
            if !(denom > 0.0) {
                continue;
            }
            let col: DVector<f64> = a_inv.column(j).into_owned();
            a_inv += (&col * col.transpose()) * (delta / denom);
            s[j] = target;
        }
        match spd_inverse(&constraint(&s)) {
            Ok(inv) => a_inv = inv,
            Err(_) => {
                s = sweep_start;
                break;
            }
        }
        let next: f64 = s.iter().map(|v| 1.0 - v).sum();
        let improvement = objective - next;
        objective = next;
        if improvement < tol {
            break;
        }
    }

    let slack = min_eigenvalue(&constraint(&s));
    if slack < -1e-10 {
        return Err(GkError::Solver(format!(
            "coordinate ascent ended infeasible (min eigenvalue {slack:e})"
        )));
    }
    Ok(KnockoffDiag {
        s,
        method: DiagMethod::SdpAscent,
        copies,
    })
}

pub fn solve_diag(panel: &LdPanel, method: DiagMethod, copies: usize) -> Result<KnockoffDiag> {
    match method {
        DiagMethod::Equi => solve_diag_equi(panel, copies),
        DiagMethod::SdpAscent => {
            solve_diag_sdp(panel, copies, DEFAULT_SDP_MAX_ITERS, DEFAULT_SDP_TOL)
        }
    }
}

/// Precomputed sampler for one LD block.
#[derive(Debug, Clone)]
pub struct KnockoffTransform {
    p: usize,
    copies: usize,
    sigma: DMatrix<f64>,
    s: Vec<f64>,
    /// `I - DΣ⁻¹`, the per-copy block of `P`.
    cond_mean: DMatrix<f64>,
    /// `D - DΣ⁻¹D`, the off-diagonal block of `V`.
    cross_cov: DMatrix<f64>,
    /// Lower-triangular factor of `(M+1)D - M·DΣ⁻¹D` after clipping.
    mean_factor: DMatrix<f64>,
}

/// Build `(P, V)` for `copies` knockoffs of the block.
pub fn build_transform(
    panel: &LdPanel,
    diag: &KnockoffDiag,
    copies: usize,
) -> Result<KnockoffTransform> {
    check_copies(copies)?;
    let p = panel.len();
    if diag.s.len() != p {
        return Err(GkError::Precondition(format!(
            "diagonal has {} entries for a panel of {p}",
            diag.s.len()
        )));
    }
    if let Some(bad) = diag.s.iter().find(|&&v| !(0.0..=1.0 + 1e-8).contains(&v)) {
        return Err(GkError::Precondition(format!("diagonal entry {bad} outside [0, 1]")));
    }
    let sigma = panel.sigma().clone();
    let sigma_inv = spd_inverse(&sigma).map_err(|_| {
        GkError::Numerical("LD matrix is singular; regularize it before building knockoffs".into())
    })?;
    let s = &diag.s;
    let d_sinv = DMatrix::from_fn(p, p, |i, j| s[i] * sigma_inv[(i, j)]);
    let cond_mean = DMatrix::identity(p, p) - &d_sinv;
    let d_sinv_d = DMatrix::from_fn(p, p, |i, j| d_sinv[(i, j)] * s[j]);
    let cross_cov = DMatrix::from_diagonal(&DVector::from_column_slice(s)) - &d_sinv_d;
    let cross_cov = (&cross_cov + cross_cov.transpose()) * 0.5;

    let m = copies as f64;
    let mut average_cov = &cross_cov * m;
    for j in 0..p {
        average_cov[(j, j)] += s[j];
    }
    let trace_v: f64 = m * (0..p).map(|j| s[j] + cross_cov[(j, j)]).sum::<f64>();
    let mean_factor = match average_cov.clone().cholesky() {
        Some(ch) => ch.l(),
        None => {
            let (clipped, removed) = clip_psd(&average_cov);
            if removed > CLIP_TOL * trace_v.abs().max(f64::MIN_POSITIVE) {
                return Err(GkError::Numerical(format!(
                    "knockoff covariance has negative eigenvalue mass {removed:e} \
                     (trace {trace_v:e}); the diagonal is infeasible for {copies} copies \
                     or the LD matrix is under-regularized"
                )));
            }
            psd_cholesky(&clipped, 1e-14)
        }
    };

    Ok(KnockoffTransform {
        p,
        copies,
        sigma,
        s: s.clone(),
        cond_mean,
        cross_cov,
        mean_factor,
    })
}

impl KnockoffTransform {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn diag(&self) -> &[f64] {
        &self.s
    }

    /// `I - DΣ⁻¹`
    pub fn conditional_mean(&self) -> &DMatrix<f64> {
        &self.cond_mean
    }

    /// The stacked `pM × p` matrix `P = 1_M ⊗ (I - DΣ⁻¹)`.
    pub fn p_matrix(&self) -> DMatrix<f64> {
        let (p, m) = (self.p, self.copies);
        DMatrix::from_fn(p * m, p, |r, c| self.cond_mean[(r % p, c)])
    }

    /// The dense `pM × pM` covariance `V`.
    pub fn v_matrix(&self) -> DMatrix<f64> {
        let (p, m) = (self.p, self.copies);
        DMatrix::from_fn(p * m, p * m, |r, c| {
            let (i, j) = (r % p, c % p);
            let mut v = self.cross_cov[(i, j)];
            if r / p == c / p && i == j {
                v += self.s[i];
            }
            v
        })
    }

    /// Dense lower-triangular factor of `V` (zero pivots allowed).
    pub fn v_chol(&self) -> DMatrix<f64> {
        let (v, _) = clip_psd(&self.v_matrix());
        psd_cholesky(&v, 1e-12)
    }

    /// Gram of `(Z, Z̃¹, …, Z̃ᴹ)`: `Σ` on diagonal blocks, `Σ - D` elsewhere.
    pub fn joint_gram(&self) -> DMatrix<f64> {
        let p = self.p;
        let k = self.copies + 1;
        DMatrix::from_fn(p * k, p * k, |r, c| {
            let (i, j) = (r % p, c % p);
            let mut v = self.sigma[(i, j)];
            if r / p != c / p && i == j {
                v -= self.s[i];
            }
            v
        })
    }

    /// One set of `M` knockoff vectors for `z`.
    ///
    /// Draw order: `ξ` (p normals), then `u_1 … u_M` (p each) when `M > 1`.
    pub fn sample_with<R: Rng + ?Sized>(&self, z: &[f64], rng: &mut R) -> Result<Vec<Vec<f64>>> {
        if z.len() != self.p {
            return Err(GkError::Data(format!(
                "z has {} entries, transform expects {}",
                z.len(),
                self.p
            )));
        }
        let p = self.p;
        let m = self.copies;
        let zv = DVector::from_column_slice(z);
        let mean = &self.cond_mean * zv;
        let xi = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let common = (&self.mean_factor * xi) / (m as f64).sqrt();

        let mut out: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..p).map(|j| mean[j] + common[j]).collect())
            .collect();
        if m > 1 {
            let u: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                .collect();
            for j in 0..p {
                let ubar = u.iter().map(|row| row[j]).sum::<f64>() / m as f64;
                let sd = self.s[j].sqrt();
                for (copy, row) in out.iter_mut().zip(&u) {
                    copy[j] += sd * (row[j] - ubar);
                }
            }
        }
        Ok(out)
    }
}

/// `M` knockoff copies of `z`, reproducible from `seed`.
pub fn sample_knockoffs(
    transform: &KnockoffTransform,
    z: &[f64],
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut rng = rng_from_seed(seed);
    transform.sample_with(z, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::variant::VariantId;

    fn ids(p: usize) -> Vec<VariantId> {
        (0..p)
            .map(|i| VariantId::new(1, 1 + i as u64, "A", "C").unwrap())
            .collect()
    }

    fn panel2(rho: f64) -> LdPanel {
        LdPanel::new(ids(2), DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0])).unwrap()
    }

    #[test]
    fn equi_on_identity() {
        let d = solve_diag_equi(&LdPanel::identity(ids(4)).unwrap(), 1).unwrap();
        assert_eq!(d.s, vec![1.0; 4]);
    }

    #[test]
    fn equi_moderate_correlation_caps_at_one() {
        let d = solve_diag_equi(&panel2(0.5), 1).unwrap();
        assert!((d.s[0] - 1.0).abs() < 1e-12 && (d.s[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equi_strong_correlation_sits_on_boundary() {
        let panel = panel2(0.9);
        let d = solve_diag_equi(&panel, 1).unwrap();
        assert!((d.s[0] - 0.2).abs() < 1e-12 && (d.s[1] - 0.2).abs() < 1e-12);
        // 2Σ - D = [[1.8, 1.8], [1.8, 1.8]] has eigenvalues 3.6 and 0
        let a = panel.sigma() * 2.0 - DMatrix::from_diagonal_element(2, 2, 0.2);
        assert!(min_eigenvalue(&a).abs() < 1e-12);
    }

    #[test]
    fn equi_rejects_singular_sigma() {
        let panel = panel2(1.0);
        assert!(matches!(
            solve_diag_equi(&panel, 1),
            Err(GkError::Precondition(_))
        ));
    }

    #[test]
    fn sdp_identity_is_all_ones() {
        let d = solve_diag_sdp(&LdPanel::identity(ids(3)).unwrap(), 1, 10, 1e-10).unwrap();
        for s in &d.s {
            assert!((s - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn transform_identity_single_copy_is_pure_noise() {
        let panel = LdPanel::identity(ids(3)).unwrap();
        let diag = solve_diag_equi(&panel, 1).unwrap();
        let t = build_transform(&panel, &diag, 1).unwrap();
        assert!(t.p_matrix().iter().all(|v| v.abs() < 1e-15));
        assert!(max_abs_diff(&t.v_matrix(), &DMatrix::identity(3, 3)) < 1e-15);
    }

    #[test]
    fn transform_identity_three_copies_independent() {
        let panel = LdPanel::identity(ids(2)).unwrap();
        let diag = KnockoffDiag { s: vec![1.0, 1.0], method: DiagMethod::Equi, copies: 3 };
        let t = build_transform(&panel, &diag, 3).unwrap();
        assert!(max_abs_diff(&t.v_matrix(), &DMatrix::identity(6, 6)) < 1e-15);
    }

    #[test]
    fn infeasible_diag_for_many_copies_is_a_numerical_error() {
        // s = 0.2 is on the 2Σ - D boundary, far outside 1.2Σ - D ⪰ 0
        let panel = panel2(0.9);
        let diag = solve_diag_equi(&panel, 1).unwrap();
        assert!(matches!(
            build_transform(&panel, &diag, 5),
            Err(GkError::Numerical(_))
        ));
    }

    #[test]
    fn dimension_mismatch_is_data_error() {
        let panel = LdPanel::identity(ids(2)).unwrap();
        let diag = solve_diag_equi(&panel, 1).unwrap();
        let t = build_transform(&panel, &diag, 1).unwrap();
        assert!(matches!(sample_knockoffs(&t, &[1.0], 1), Err(GkError::Data(_))));
    }

    #[test]
    fn sampling_is_deterministic() {
        let panel = panel2(0.3);
        let diag = solve_diag_equi(&panel, 5).unwrap();
        let t = build_transform(&panel, &diag, 5).unwrap();
        let a = sample_knockoffs(&t, &[1.0, -2.0], 99).unwrap();
        let b = sample_knockoffs(&t, &[1.0, -2.0], 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        let c = sample_knockoffs(&t, &[1.0, -2.0], 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn identity_output_ignores_z() {
        let panel = LdPanel::identity(ids(3)).unwrap();
        let diag = solve_diag_equi(&panel, 1).unwrap();
        let t = build_transform(&panel, &diag, 1).unwrap();
        let a = sample_knockoffs(&t, &[0.0, 0.0, 0.0], 5).unwrap();
        let b = sample_knockoffs(&t, &[10.0, -3.0, 7.0], 5).unwrap();
        assert_eq!(a, b);
    }
}
