//! Block-diagonal working covariance `Ω = diag(r) + θΦ` and the projection
//! `Ψ = Ω⁻¹ − Ω⁻¹X(XᵀΩ⁻¹X)⁻¹XᵀΩ⁻¹` built on it.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::kinship::Kinship;
use crate::error::{GkError, Result};

#[derive(Debug, Clone)]
struct DenseBlock {
    members: Vec<usize>,
    inv: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct WorkingCov {
    n: usize,
    singles: Vec<(usize, f64)>,
    dense: Vec<DenseBlock>,
    logdet: f64,
}

impl WorkingCov {
    pub fn new(r: &[f64], theta: f64, kinship: &Kinship) -> Result<WorkingCov> {
        let mut singles = Vec::new();
        let mut dense = Vec::new();
        let mut logdet = 0.0;
        for b in kinship.blocks() {
            if b.members.len() == 1 || theta == 0.0 {
                for &i in &b.members {
                    let v = r[i] + theta;
                    if !(v > 0.0) {
                        return Err(GkError::Numerical("working covariance is not positive".into()));
                    }
                    singles.push((i, 1.0 / v));
                    logdet += v.ln();
                }
                continue;
            }
            let k = b.members.len();
            let mut om = &b.matrix * theta;
            for a in 0..k {
                om[(a, a)] += r[b.members[a]];
            }
            let ch = Cholesky::new(om)
                .ok_or_else(|| GkError::Numerical("working covariance block is not PD".into()))?;
            logdet += 2.0 * ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            dense.push(DenseBlock {
                members: b.members.clone(),
                inv: ch.inverse(),
            });
        }
        Ok(WorkingCov {
            n: kinship.n(),
            singles,
            dense,
            logdet,
        })
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// `Ω⁻¹ v`
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for &(i, w) in &self.singles {
            out[i] = w * v[i];
        }
        for b in &self.dense {
            let sub = DVector::from_iterator(b.members.len(), b.members.iter().map(|&i| v[i]));
            let s = &b.inv * sub;
            for (a, &i) in b.members.iter().enumerate() {
                out[i] = s[a];
            }
        }
        out
    }

    /// `Ω⁻¹ M`
    pub fn solve_mat(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, m.ncols());
        for &(i, w) in &self.singles {
            for c in 0..m.ncols() {
                out[(i, c)] = w * m[(i, c)];
            }
        }
        for b in &self.dense {
            let sub = m.select_rows(b.members.iter());
            let s = &b.inv * sub;
            for (a, &i) in b.members.iter().enumerate() {
                out.row_mut(i).copy_from(&s.row(a));
            }
        }
        out
    }

    pub fn to_dense_inverse(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for &(i, w) in &self.singles {
            out[(i, i)] = w;
        }
        for b in &self.dense {
            for (a, &i) in b.members.iter().enumerate() {
                for (c, &j) in b.members.iter().enumerate() {
                    out[(i, j)] = b.inv[(a, c)];
                }
            }
        }
        out
    }
}

/// `Φ v` for a block-diagonal kinship.
pub(crate) fn kinship_apply(kinship: &Kinship, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(kinship.n());
    for b in kinship.blocks() {
        for (a, &i) in b.members.iter().enumerate() {
            out[i] = b
                .members
                .iter()
                .enumerate()
                .map(|(c, &j)| b.matrix[(a, c)] * v[j])
                .sum();
        }
    }
    out
}

#[derive(Debug, Clone)]
pub(crate) struct Projection {
    pub cov: WorkingCov,
    pub oinv_x: DMatrix<f64>,
    /// `(XᵀΩ⁻¹X)⁻¹`
    pub xtox_inv: DMatrix<f64>,
    pub logdet_xtox: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct GlsFit {
    pub alpha: DVector<f64>,
    /// `Ψ y = Ω⁻¹(y − Xα̂)`
    pub psi_y: DVector<f64>,
    /// `yᵀΨy`
    pub quad: f64,
}

impl Projection {
    pub fn new(cov: WorkingCov, x: &DMatrix<f64>) -> Result<Projection> {
        let oinv_x = cov.solve_mat(x);
        let xtox = x.transpose() * &oinv_x;
        let ch = Cholesky::new(xtox).ok_or_else(|| {
            GkError::Numerical("covariate matrix is rank deficient under the working covariance".into())
        })?;
        let logdet_xtox = 2.0 * ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Projection {
            cov,
            oinv_x,
            xtox_inv: ch.inverse(),
            logdet_xtox,
        })
    }

    pub fn gls(&self, y: &DVector<f64>) -> GlsFit {
        let oiy = self.cov.solve(y);
        let alpha = &self.xtox_inv * (self.oinv_x.transpose() * y);
        let psi_y = oiy - &self.oinv_x * &alpha;
        let quad = y.dot(&psi_y);
        GlsFit { alpha, psi_y, quad }
    }

    /// `(Ω⁻¹ g, gᵀΨg)`
    pub fn quad_form(&self, g: &DVector<f64>) -> (DVector<f64>, f64) {
        let oig = self.cov.solve(g);
        let xg = self.oinv_x.transpose() * g;
        let v = g.dot(&oig) - xg.dot(&(&self.xtox_inv * &xg));
        (oig, v)
    }

    pub fn psi_dense(&self) -> DMatrix<f64> {
        self.cov.to_dense_inverse() - &self.oinv_x * &self.xtox_inv * self.oinv_x.transpose()
    }

    /// Restricted log-likelihood of the working model, up to a constant.
    pub fn reml(&self, fit: &GlsFit) -> f64 {
        -0.5 * (self.cov.logdet() + self.logdet_xtox + fit.quad)
    }
}

/// Maximise `f` on `[a, b]` by golden-section search, also checking both
/// endpoints so boundary maxima are found exactly.
pub(crate) fn golden_max(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    let mut best = (mid, f(mid));
    for x in [a, b] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best.0
}
