use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::assoc::{Family, Kinship};
use crate::error::{GkError, Result};

/// Total residual-plus-random-effect variance of the quantitative trait.
pub const QUANTITATIVE_NOISE: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypeModel {
    pub family: Family,
    /// Random-effect variance `θ`; used only when a kinship is supplied.
    pub theta: f64,
    /// Variance explained by the causal variants, `a`.
    pub effect_budget: f64,
    pub prevalence: f64,
    pub n_causal: usize,
    /// All effects zero (the causal set is still reported, but empty).
    pub null_effects: bool,
}

impl PhenotypeModel {
    pub fn new(family: Family, theta: f64) -> PhenotypeModel {
        PhenotypeModel {
            family,
            theta,
            effect_budget: default_effect_budget(family),
            prevalence: 0.10,
            n_causal: 10,
            null_effects: false,
        }
    }
}

pub fn default_effect_budget(family: Family) -> f64 {
    match family {
        Family::Gaussian => 1.0,
        Family::Binomial => 2.5,
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedPhenotype {
    pub y: DVector<f64>,
    /// Intercept and one standard-normal covariate.
    pub x: DMatrix<f64>,
    pub causal: Vec<usize>,
    pub beta: Vec<f64>,
    pub intercept: f64,
}

fn column_variance(g: &DMatrix<f64>, j: usize) -> f64 {
    let c = g.column(j);
    let n = c.len() as f64;
    let m = c.sum() / n;
    c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
}

/// `b ~ N(0, θΦ)` drawn block by block.
pub fn random_effects<R: Rng + ?Sized>(kinship: &Kinship, theta: f64, rng: &mut R) -> DVector<f64> {
    let mut b = DVector::zeros(kinship.n());
    let sd = theta.sqrt();
    for block in kinship.blocks() {
        let k = block.members.len();
        let u = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let draw = if k == 1 {
            u
        } else {
            let l = block
                .matrix
                .clone()
                .cholesky()
                .expect("kinship blocks are positive definite")
                .l();
            l * u
        };
        for (a, &i) in block.members.iter().enumerate() {
            b[i] = sd * draw[a];
        }
    }
    b
}

fn expit(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Intercept giving mean risk `prevalence` over the linear predictors.
pub fn calibrate_intercept(lp: &[f64], prevalence: f64) -> f64 {
    let mean_risk = |b0: f64| lp.iter().map(|&v| expit(b0 + v)).sum::<f64>() / lp.len() as f64;
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_risk(mid) < prevalence {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Phenotypes for genotypes `g` (n × p candidate variants).
///
/// Draw order: covariate, causal set, effect signs, random effect or
/// noise, then (binary) the outcomes.
pub fn simulate_phenotypes<R: Rng + ?Sized>(
    g: &DMatrix<f64>,
    kinship: Option<&Kinship>,
    model: &PhenotypeModel,
    rng: &mut R,
) -> Result<SimulatedPhenotype> {
    let (n, p) = g.shape();
    if let Some(k) = kinship {
        if k.n() != n {
            return Err(GkError::Scenario("kinship does not match the genotypes".into()));
        }
    }
    let x1 = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut x = DMatrix::from_element(n, 2, 1.0);
    x.set_column(1, &x1);

    let (causal, beta) = if model.null_effects {
        (vec![], vec![])
    } else {
        if p < model.n_causal {
            return Err(GkError::Scenario(format!(
                "{} causal variants requested from {p} clusters",
                model.n_causal
            )));
        }
        let mut causal = sample(rng, p, model.n_causal).into_vec();
        causal.sort_unstable();
        let mut signs: Vec<f64> = (0..model.n_causal)
            .map(|k| if k < model.n_causal / 2 { -1.0 } else { 1.0 })
            .collect();
        signs.shuffle(rng);
        let mut beta = Vec::with_capacity(causal.len());
        for (&j, s) in causal.iter().zip(&signs) {
            let v = column_variance(g, j);
            if !(v > 0.0) {
                return Err(GkError::Scenario(format!("causal site {j} is monomorphic")));
            }
            beta.push(s * (model.effect_budget / (model.n_causal as f64 * v)).sqrt());
        }
        (causal, beta)
    };
    let mut lp = x1.clone();
    for (&j, &b) in causal.iter().zip(&beta) {
        lp.axpy(b, &g.column(j), 1.0);
    }

    let y = match model.family {
        Family::Gaussian => {
            let noise_var = match kinship {
                Some(k) => {
                    if model.theta >= QUANTITATIVE_NOISE {
                        return Err(GkError::Scenario(format!(
                            "theta {} leaves no residual variance",
                            model.theta
                        )));
                    }
                    lp += random_effects(k, model.theta, rng);
                    QUANTITATIVE_NOISE - model.theta
                }
                None => QUANTITATIVE_NOISE,
            };
            let sd = noise_var.sqrt();
            lp.map(|v| v + sd * rng.sample::<f64, _>(StandardNormal))
        }
        Family::Binomial => {
            match kinship {
                Some(k) => lp += random_effects(k, model.theta, rng),
                None => lp.iter_mut().for_each(|v| *v += rng.sample::<f64, _>(StandardNormal)),
            }
            let b0 = calibrate_intercept(lp.as_slice(), model.prevalence);
            let y = lp.map(|v| if rng.random::<f64>() < expit(b0 + v) { 1.0 } else { 0.0 });
            return Ok(SimulatedPhenotype {
                y,
                x,
                causal,
                beta,
                intercept: b0,
            });
        }
    };
    Ok(SimulatedPhenotype {
        y,
        x,
        causal,
        beta,
        intercept: 0.0,
    })
}
