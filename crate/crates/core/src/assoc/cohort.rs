use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use super::kinship::Kinship;
use crate::error::{GkError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Gaussian,
    Binomial,
}

impl FromStr for Family {
    type Err = GkError;
    fn from_str(s: &str) -> Result<Family> {
        match s {
            "gaussian" | "quantitative" => Ok(Family::Gaussian),
            "binomial" | "dichotomous" => Ok(Family::Binomial),
            _ => Err(GkError::Format(format!("unknown family '{s}'"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
        })
    }
}

/// Individual-level data: phenotype, covariates (with intercept column),
/// genotype dosages and optional kinship.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub kinship: Option<Kinship>,
}

impl Cohort {
    pub fn new(
        y: DVector<f64>,
        x: DMatrix<f64>,
        g: DMatrix<f64>,
        kinship: Option<Kinship>,
    ) -> Result<Cohort> {
        let n = y.len();
        if x.nrows() != n || g.nrows() != n {
            return Err(GkError::Data(format!(
                "{} phenotypes, {} covariate rows, {} genotype rows",
                n,
                x.nrows(),
                g.nrows()
            )));
        }
        if let Some(k) = &kinship {
            if k.n() != n {
                return Err(GkError::Data(format!("kinship covers {} of {n} individuals", k.n())));
            }
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(GkError::Data("missing or non-finite phenotype/covariate".into()));
        }
        if g.iter().any(|&v| v != 0.0 && v != 1.0 && v != 2.0) {
            return Err(GkError::Data("genotype dosages must be 0, 1 or 2".into()));
        }
        Ok(Cohort { y, x, g, kinship })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_variants(&self) -> usize {
        self.g.ncols()
    }

    pub fn kinship_or_identity(&self) -> Kinship {
        self.kinship
            .clone()
            .unwrap_or_else(|| Kinship::identity(self.n()))
    }

    pub fn genotype(&self, j: usize) -> DVector<f64> {
        self.g.column(j).into_owned()
    }
}

/// Checks that `y` suits `family`.
pub(crate) fn check_response(y: &DVector<f64>, family: Family) -> Result<()> {
    match family {
        Family::Binomial => {
            if y.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(GkError::Data("binomial phenotype must be 0/1".into()));
            }
            let cases = y.iter().filter(|&&v| v == 1.0).count();
            if cases == 0 || cases == y.len() {
                return Err(GkError::Data("binomial phenotype needs both classes".into()));
            }
        }
        Family::Gaussian => {
            let first = y.get(0).copied().unwrap_or(0.0);
            if y.iter().all(|&v| v == first) {
                return Err(GkError::Data("phenotype is constant".into()));
            }
        }
    }
    Ok(())
}
