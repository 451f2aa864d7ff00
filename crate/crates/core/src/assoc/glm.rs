//! Fixed-effect GLMs for unrelated samples: the Wald and likelihood-ratio
//! tests, and the starting values of the logistic mixed model.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::cohort::{check_response, Cohort, Family};
use super::pvalue::z_to_p;
use super::score::ScoreResult;
use crate::error::{GkError, Result};

const IRLS_MAX_ITERS: usize = 50;
const IRLS_TOL: f64 = 1e-10;

pub(crate) fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
pub struct GlmFit {
    pub beta: DVector<f64>,
    pub mu: DVector<f64>,
    /// `(XᵀWX)⁻¹` at the fit (`W = I` for gaussian).
    pub unscaled_cov: DMatrix<f64>,
    /// Residual sum of squares (gaussian) or deviance (binomial).
    pub deviance: f64,
}

fn weighted_solve(x: &DMatrix<f64>, w: &DVector<f64>, z: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let mut xw = x.clone();
    for (i, mut row) in xw.row_iter_mut().enumerate() {
        row *= w[i];
    }
    let xtwx = x.transpose() * &xw;
    let ch = Cholesky::new(xtwx)
        .ok_or_else(|| GkError::Fit("design matrix is rank deficient".into()))?;
    let beta = ch.solve(&(xw.transpose() * z));
    Ok((beta, ch.inverse()))
}

fn binomial_deviance(y: &DVector<f64>, mu: &DVector<f64>) -> f64 {
    -2.0 * y
        .iter()
        .zip(mu.iter())
        .map(|(&yi, &m)| if yi == 1.0 { m.ln() } else { (1.0 - m).ln() })
        .sum::<f64>()
}

pub fn fit_glm(y: &DVector<f64>, x: &DMatrix<f64>, family: Family) -> Result<GlmFit> {
    match family {
        Family::Gaussian => {
            let w = DVector::from_element(y.len(), 1.0);
            let (beta, unscaled_cov) = weighted_solve(x, &w, y)?;
            let mu = x * &beta;
            let deviance = (y - &mu).norm_squared();
            Ok(GlmFit {
                beta,
                mu,
                unscaled_cov,
                deviance,
            })
        }
        Family::Binomial => {
            let n = y.len();
            let mut beta = DVector::zeros(x.ncols());
            for _ in 0..IRLS_MAX_ITERS {
                let eta = x * &beta;
                let mu = eta.map(expit);
                if mu.iter().any(|&m| m < 1e-10 || m > 1.0 - 1e-10) {
                    return Err(GkError::Fit("logistic fit separates the classes".into()));
                }
                let w = mu.map(|m| m * (1.0 - m));
                let z = DVector::from_fn(n, |i, _| eta[i] + (y[i] - mu[i]) / w[i]);
                let (next, _) = weighted_solve(x, &w, &z)?;
                let step = (&next - &beta).amax();
                beta = next;
                if step < IRLS_TOL * (1.0 + beta.amax()) {
                    let mu = (x * &beta).map(expit);
                    let w = mu.map(|m| m * (1.0 - m));
                    let (_, unscaled_cov) = weighted_solve(x, &w, &z)?;
                    return Ok(GlmFit {
                        deviance: binomial_deviance(y, &mu),
                        beta,
                        mu,
                        unscaled_cov,
                    });
                }
            }
            Err(GkError::Fit(format!(
                "logistic regression did not converge in {IRLS_MAX_ITERS} iterations"
            )))
        }
    }
}

/// Null GLM shared by per-variant Wald and likelihood-ratio tests.
///
/// For the gaussian family both tests use the null-model dispersion
/// `RSS₀ / (n − q)`, so score, Wald and LRT Z-scores coincide exactly.
#[derive(Debug, Clone)]
pub struct FixedEffectModel {
    family: Family,
    y: DVector<f64>,
    x: DMatrix<f64>,
    null: GlmFit,
    dispersion: f64,
}

impl FixedEffectModel {
    pub fn fit(y: &DVector<f64>, x: &DMatrix<f64>, family: Family) -> Result<FixedEffectModel> {
        check_response(y, family)?;
        let null = fit_glm(y, x, family)?;
        let dispersion = match family {
            Family::Gaussian => null.deviance / (y.len() - x.ncols()) as f64,
            Family::Binomial => 1.0,
        };
        Ok(FixedEffectModel {
            family,
            y: y.clone(),
            x: x.clone(),
            null,
            dispersion,
        })
    }

    pub fn null_fit(&self) -> &GlmFit {
        &self.null
    }

    fn full_fit(&self, g: &DVector<f64>) -> Result<GlmFit> {
        // residual of g after projecting on X; a (near) zero residual means
        // g carries no information beyond the covariates
        let h = fit_glm(g, &self.x, Family::Gaussian)?;
        if h.deviance <= 1e-12 * g.norm_squared().max(1.0) {
            return Err(GkError::DegenerateVariant(
                "genotype is collinear with the covariates".into(),
            ));
        }
        let q = self.x.ncols();
        let mut x1 = self.x.clone().insert_column(q, 0.0);
        x1.set_column(q, g);
        fit_glm(&self.y, &x1, self.family)
    }

    pub fn wald(&self, g: &DVector<f64>) -> Result<ScoreResult> {
        let full = self.full_fit(g)?;
        let q = self.x.ncols();
        let beta = full.beta[q];
        let var = self.dispersion * full.unscaled_cov[(q, q)];
        let z = beta / var.sqrt();
        Ok(ScoreResult::from_z(beta, var, z))
    }

    pub fn lrt(&self, g: &DVector<f64>) -> Result<ScoreResult> {
        let full = self.full_fit(g)?;
        let q = self.x.ncols();
        let beta = full.beta[q];
        let stat = ((self.null.deviance - full.deviance) / self.dispersion).max(0.0);
        let z = beta.signum() * stat.sqrt();
        let z = if beta == 0.0 { 0.0 } else { z };
        let p = z_to_p(z);
        Ok(ScoreResult {
            t_stat: beta,
            var_t: full.unscaled_cov[(q, q)] * self.dispersion,
            z,
            p,
            beta_sign: sign_of(beta),
        })
    }
}

pub(crate) fn sign_of(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn require_unrelated(cohort: &Cohort) -> Result<()> {
    match &cohort.kinship {
        Some(k) if !k.is_identity() => Err(GkError::Precondition(
            "Wald and likelihood-ratio tests need an unrelated cohort".into(),
        )),
        _ => Ok(()),
    }
}

pub fn wald_test(cohort: &Cohort, g: &DVector<f64>, family: Family) -> Result<ScoreResult> {
    require_unrelated(cohort)?;
    FixedEffectModel::fit(&cohort.y, &cohort.x, family)?.wald(g)
}

pub fn lrt_test(cohort: &Cohort, g: &DVector<f64>, family: Family) -> Result<ScoreResult> {
    require_unrelated(cohort)?;
    FixedEffectModel::fit(&cohort.y, &cohort.x, family)?.lrt(g)
}
