//! Case-control family sampling from a simulated foundation population.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{GkError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Keep the foundation as simulated.
    None,
    /// Random cases and random controls.
    A,
    /// Whole case families (≥ 1 case) and whole control families.
    B,
    /// Every case of the case families, controls from control families.
    C,
}

impl FromStr for Scheme {
    type Err = GkError;
    fn from_str(s: &str) -> Result<Scheme> {
        match s.to_ascii_uppercase().as_str() {
            "NONE" => Ok(Scheme::None),
            "A" => Ok(Scheme::A),
            "B" => Ok(Scheme::B),
            "C" => Ok(Scheme::C),
            _ => Err(GkError::Format(format!("unknown sampling scheme '{s}'"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::None => "none",
            Scheme::A => "A",
            Scheme::B => "B",
            Scheme::C => "C",
        })
    }
}

fn families(family: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &f) in family.iter().enumerate() {
        out.entry(f).or_default().push(i);
    }
    out
}

fn pick<R: Rng + ?Sized>(pool: &[usize], k: usize, what: &str, rng: &mut R) -> Result<Vec<usize>> {
    if pool.len() < k {
        return Err(GkError::Sampling(format!(
            "need {k} {what}, the foundation has {}; enlarge it",
            pool.len()
        )));
    }
    Ok(sample(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect())
}

/// Indices (ascending) of the sampled individuals.
///
/// `n_target` is split evenly between cases and controls; scheme B takes
/// `n_target / (2 · family size)` families of each kind.
pub fn apply_scheme<R: Rng + ?Sized>(
    scheme: Scheme,
    y: &[f64],
    family: &[usize],
    n_target: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if y.len() != family.len() {
        return Err(GkError::Data("phenotype and family labels differ in length".into()));
    }
    let half = n_target / 2;
    let mut out = match scheme {
        Scheme::None => (0..y.len()).collect(),
        Scheme::A => {
            let cases: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 1.0).collect();
            let controls: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 0.0).collect();
            let mut out = pick(&cases, half, "cases", rng)?;
            out.extend(pick(&controls, n_target - half, "controls", rng)?);
            out
        }
        Scheme::B => {
            let fams = families(family);
            let size = fams.values().map(Vec::len).max().unwrap_or(1);
            let per_kind = n_target / (2 * size);
            let (case_f, control_f): (Vec<_>, Vec<_>) = fams
                .values()
                .partition(|m| m.iter().any(|&i| y[i] == 1.0));
            let case_f: Vec<&Vec<usize>> = case_f;
            let control_f: Vec<&Vec<usize>> = control_f;
            let ci = pick(&(0..case_f.len()).collect::<Vec<_>>(), per_kind, "case families", rng)?;
            let ki = pick(&(0..control_f.len()).collect::<Vec<_>>(), per_kind, "control families", rng)?;
            let mut out: Vec<usize> = ci.iter().flat_map(|&f| case_f[f].iter().copied()).collect();
            out.extend(ki.iter().flat_map(|&f| control_f[f].iter().copied()));
            out
        }
        Scheme::C => {
            let fams = families(family);
            let mut case_f: Vec<&Vec<usize>> = Vec::new();
            let mut control_members: Vec<usize> = Vec::new();
            for m in fams.values() {
                if m.iter().any(|&i| y[i] == 1.0) {
                    case_f.push(m);
                } else {
                    control_members.extend(m.iter().copied());
                }
            }
            case_f.shuffle(rng);
            let mut out = Vec::with_capacity(n_target);
            'fill: for m in case_f {
                for &i in m {
                    if y[i] == 1.0 {
                        if out.len() == half {
                            break 'fill;
                        }
                        out.push(i);
                    }
                }
            }
            if out.len() < half {
                return Err(GkError::Sampling(format!(
                    "need {half} cases, the foundation has {}; enlarge it",
                    out.len()
                )));
            }
            out.extend(pick(&control_members, n_target - half, "controls from control families", rng)?);
            out
        }
    };
    out.sort_unstable();
    Ok(out)
}

/// Mean over families with at least one sampled pair of the fraction of
/// within-family pairs that share case status. `None` when no family has
/// two sampled members.
pub fn relatedness_k(y: &[f64], family: &[usize]) -> Option<f64> {
    let mut total = 0.0;
    let mut counted = 0usize;
    for members in families(family).values() {
        let k = members.len();
        if k < 2 {
            continue;
        }
        let cases = members.iter().filter(|&&i| y[i] == 1.0).count();
        let controls = k - cases;
        let pairs = k * (k - 1) / 2;
        let concordant = cases * cases.saturating_sub(1) / 2 + controls * controls.saturating_sub(1) / 2;
        total += concordant as f64 / pairs as f64;
        counted += 1;
    }
    (counted > 0).then(|| total / counted as f64)
}
