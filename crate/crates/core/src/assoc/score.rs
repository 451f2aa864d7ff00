use nalgebra::{DMatrix, DVector};

use super::cohort::{check_response, Cohort, Family};
use super::glm::{expit, fit_glm, sign_of};
use super::kinship::Kinship;
use super::pvalue::z_to_p;
use super::working::{golden_max, kinship_apply, Projection, WorkingCov};
use crate::error::{GkError, Result};

pub const PQL_MAX_ITERS: usize = 100;
pub const PQL_TOL: f64 = 1e-6;
const SEPARATION_EPS: f64 = 1e-10;
/// Upper end of the heritability-ratio search.
const H_MAX: f64 = 0.999;
/// Upper end of the `θ/(1+θ)` search for the logistic model.
const U_MAX: f64 = 0.95;
const SEARCH_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreResult {
    pub t_stat: f64,
    pub var_t: f64,
    pub z: f64,
    pub p: f64,
    pub beta_sign: i8,
}

impl ScoreResult {
    pub(crate) fn from_z(t_stat: f64, var_t: f64, z: f64) -> ScoreResult {
        ScoreResult {
            t_stat,
            var_t,
            z,
            p: z_to_p(z),
            beta_sign: sign_of(t_stat),
        }
    }
}

/// How the random-effect variance `θ` is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarianceComponent {
    Estimate,
    Fixed(f64),
}

/// Fitted null model with the projection `Ψ` used by every score test.
#[derive(Debug, Clone)]
pub struct NullModel {
    pub family: Family,
    pub alpha: DVector<f64>,
    pub b: DVector<f64>,
    pub theta: f64,
    pub phi: f64,
    pub mu: DVector<f64>,
    pub working_y: DVector<f64>,
    pub iterations: usize,
    proj: Projection,
    psi_y: DVector<f64>,
}

impl NullModel {
    pub fn fit(
        y: &DVector<f64>,
        x: &DMatrix<f64>,
        kinship: &Kinship,
        family: Family,
        theta: VarianceComponent,
    ) -> Result<NullModel> {
        if x.nrows() != y.len() || kinship.n() != y.len() {
            return Err(GkError::Data("null model inputs disagree on n".into()));
        }
        if y.len() <= x.ncols() {
            return Err(GkError::Data("fewer individuals than covariates".into()));
        }
        check_response(y, family)?;
        if let VarianceComponent::Fixed(t) = theta {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(GkError::Precondition(format!("theta {t} must be ≥ 0")));
            }
        }
        match family {
            Family::Gaussian => fit_gaussian(y, x, kinship, theta),
            Family::Binomial => fit_binomial(y, x, kinship, theta),
        }
    }

    pub fn n(&self) -> usize {
        self.psi_y.len()
    }

    /// `Ψ Ỹ`
    pub fn psi_y(&self) -> &DVector<f64> {
        &self.psi_y
    }

    /// Dense `Ψ`; `O(n²)` memory, meant for small cohorts and checks.
    pub fn psi(&self) -> DMatrix<f64> {
        self.proj.psi_dense()
    }

    /// `(Ω⁻¹ g, gᵀΨg)` for one genotype vector.
    fn quad(&self, g: &DVector<f64>) -> (DVector<f64>, f64) {
        self.proj.quad_form(g)
    }
}

fn fit_gaussian(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    kinship: &Kinship,
    theta: VarianceComponent,
) -> Result<NullModel> {
    let n = y.len();
    let dof = (n - x.ncols()) as f64;
    let (theta, phi) = match theta {
        VarianceComponent::Fixed(0.0) => {
            let proj = Projection::new(WorkingCov::new(&vec![1.0; n], 0.0, kinship)?, x)?;
            (0.0, proj.gls(y).quad / dof)
        }
        VarianceComponent::Estimate if kinship.is_identity() => {
            // θ and φ are confounded when Φ = I; all the variance goes to φ
            let proj = Projection::new(WorkingCov::new(&vec![1.0; n], 0.0, kinship)?, x)?;
            (0.0, proj.gls(y).quad / dof)
        }
        VarianceComponent::Estimate => {
            // REML with total variance profiled out: Ω = σ²((1−h)I + hΦ)
            let profile = |h: f64| -> f64 {
                let cov = match WorkingCov::new(&vec![1.0 - h; n], h, kinship) {
                    Ok(c) => c,
                    Err(_) => return f64::NEG_INFINITY,
                };
                let Ok(proj) = Projection::new(cov, x) else {
                    return f64::NEG_INFINITY;
                };
                let s2 = proj.gls(y).quad / dof;
                -0.5 * (dof * s2.ln() + proj.cov.logdet() + proj.logdet_xtox)
            };
            let h = golden_max(profile, 0.0, H_MAX, SEARCH_TOL);
            let proj = Projection::new(WorkingCov::new(&vec![1.0 - h; n], h, kinship)?, x)?;
            let s2 = proj.gls(y).quad / dof;
            (h * s2, (1.0 - h) * s2)
        }
        VarianceComponent::Fixed(t) => {
            // θ given; φ by REML over a log-scale bracket
            let scale = (y.variance() * n as f64 / dof).max(1e-12);
            let reml = |log_phi: f64| -> f64 {
                let phi = log_phi.exp();
                WorkingCov::new(&vec![phi; n], t, kinship)
                    .and_then(|c| Projection::new(c, x))
                    .map(|p| p.reml(&p.gls(y)))
                    .unwrap_or(f64::NEG_INFINITY)
            };
            let lp = golden_max(reml, (1e-6 * scale).ln(), (10.0 * scale).ln(), SEARCH_TOL);
            (t, lp.exp())
        }
    };
    let proj = Projection::new(WorkingCov::new(&vec![phi; n], theta, kinship)?, x)?;
    let fit = proj.gls(y);
    // Ω⁻¹(y − Xα̂) = Ψy
    let b = kinship_apply(kinship, &fit.psi_y) * theta;
    let mu = x * &fit.alpha + &b;
    Ok(NullModel {
        family: Family::Gaussian,
        alpha: fit.alpha,
        b,
        theta,
        phi,
        mu,
        working_y: y.clone(),
        iterations: 1,
        proj,
        psi_y: fit.psi_y,
    })
}

fn fit_binomial(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    kinship: &Kinship,
    theta_spec: VarianceComponent,
) -> Result<NullModel> {
    let n = y.len();
    let glm = fit_glm(y, x, Family::Binomial)?;
    let mut alpha = glm.beta;
    let mut b = DVector::zeros(n);
    let mut theta = match theta_spec {
        VarianceComponent::Fixed(t) => t,
        VarianceComponent::Estimate => 0.0,
    };
    // with Φ = I a binary outcome cannot identify θ
    let estimate = theta_spec == VarianceComponent::Estimate && !kinship.is_identity();

    for iter in 1..=PQL_MAX_ITERS {
        let eta = x * &alpha + &b;
        let mu = eta.map(expit);
        if mu.iter().any(|&m| m < SEPARATION_EPS || m > 1.0 - SEPARATION_EPS) {
            return Err(GkError::Fit("fitted probabilities reached 0 or 1".into()));
        }
        let w = mu.map(|m| m * (1.0 - m));
        let r: Vec<f64> = w.iter().map(|&wi| 1.0 / wi).collect();
        let ytilde = DVector::from_fn(n, |i, _| eta[i] + (y[i] - mu[i]) / w[i]);

        let next_theta = if estimate {
            let reml = |u: f64| -> f64 {
                let t = u / (1.0 - u);
                WorkingCov::new(&r, t, kinship)
                    .and_then(|c| Projection::new(c, x))
                    .map(|p| p.reml(&p.gls(&ytilde)))
                    .unwrap_or(f64::NEG_INFINITY)
            };
            let u = golden_max(reml, 0.0, U_MAX, SEARCH_TOL);
            u / (1.0 - u)
        } else {
            theta
        };
        let proj = Projection::new(WorkingCov::new(&r, next_theta, kinship)?, x)?;
        let fit = proj.gls(&ytilde);
        let next_b = kinship_apply(kinship, &fit.psi_y) * next_theta;
        let step = (&fit.alpha - &alpha).amax();
        let theta_step = (next_theta - theta).abs();
        alpha = fit.alpha.clone();
        b = next_b;
        theta = next_theta;
        if step < PQL_TOL && theta_step < 1e-4 * (1.0 + theta) {
            // Ψ, Ỹ and μ all taken at the converged working model
            let eta = x * &alpha + &b;
            let mu = eta.map(expit);
            if mu.iter().any(|&m| m < SEPARATION_EPS || m > 1.0 - SEPARATION_EPS) {
                return Err(GkError::Fit("fitted probabilities reached 0 or 1".into()));
            }
            let w = mu.map(|m| m * (1.0 - m));
            let r: Vec<f64> = w.iter().map(|&wi| 1.0 / wi).collect();
            let ytilde = DVector::from_fn(n, |i, _| eta[i] + (y[i] - mu[i]) / w[i]);
            let proj = Projection::new(WorkingCov::new(&r, theta, kinship)?, x)?;
            let fit = proj.gls(&ytilde);
            return Ok(NullModel {
                family: Family::Binomial,
                alpha,
                b,
                theta,
                phi: 1.0,
                mu,
                working_y: ytilde,
                iterations: iter,
                proj,
                psi_y: fit.psi_y,
            });
        }
    }
    Err(GkError::Fit(format!(
        "PQL did not converge in {PQL_MAX_ITERS} iterations"
    )))
}

/// Null fit with `θ` estimated (Φ = I for unrelated cohorts).
pub fn mixed_model_null_fit(cohort: &Cohort, family: Family) -> Result<NullModel> {
    NullModel::fit(
        &cohort.y,
        &cohort.x,
        &cohort.kinship_or_identity(),
        family,
        VarianceComponent::Estimate,
    )
}

/// Null fit ignoring relatedness (`θ = 0`), the naive score test.
pub fn naive_null_fit(cohort: &Cohort, family: Family) -> Result<NullModel> {
    NullModel::fit(
        &cohort.y,
        &cohort.x,
        &Kinship::identity(cohort.n()),
        family,
        VarianceComponent::Fixed(0.0),
    )
}

/// `T = gᵀΨỸ`, `Var(T) = gᵀΨg`.
pub fn score_test(null: &NullModel, g: &DVector<f64>) -> Result<ScoreResult> {
    if g.len() != null.n() {
        return Err(GkError::Data(format!(
            "genotype of length {} for a null model on {} individuals",
            g.len(),
            null.n()
        )));
    }
    let (oig, var) = null.quad(g);
    // relative to gᵀΩ⁻¹g so that roundoff on a constant column is caught
    // regardless of phenotype scale
    if !(var > 1e-12 * g.dot(&oig).max(1.0)) {
        return Err(GkError::DegenerateVariant(format!(
            "score variance {var:.3e} is not positive"
        )));
    }
    let t = g.dot(null.psi_y());
    Ok(ScoreResult::from_z(t, var, t / var.sqrt()))
}

/// Score tests for every column of `g`.
pub fn score_tests(null: &NullModel, g: &DMatrix<f64>) -> Vec<Result<ScoreResult>> {
    g.column_iter()
        .map(|c| score_test(null, &c.into_owned()))
        .collect()
}
