//! `key = value` scenario files. Blank lines and `#` comments are skipped;
//! list values are comma separated.

use std::path::PathBuf;
use std::str::FromStr;

use super::experiment::{Method, Relatedness, Scenario};
use crate::error::{GkError, Result};

fn config_err(key: &str, reason: impl Into<String>) -> GkError {
    GkError::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| config_err(key, format!("'{value}': {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

/// Apply one setting on top of `sc`.
pub fn apply_setting(sc: &mut Scenario, key: &str, value: &str) -> Result<()> {
    let (key, v) = (key.trim(), value.trim());
    match key {
        "phenotype" | "family" => sc.phenotype = parse(key, v)?,
        "relatedness" => sc.relatedness = parse::<Relatedness>(key, v)?,
        "theta" => sc.theta = parse(key, v)?,
        "scheme" => sc.scheme = parse(key, v)?,
        "n" => sc.n = parse(key, v)?,
        "foundation_families" => sc.foundation_families = parse(key, v)?,
        "replicates" => sc.replicates = parse(key, v)?,
        "seed" => sc.seed = parse(key, v)?,
        "fdr" | "fdr_targets" => sc.fdr_targets = parse_list(key, v)?,
        "methods" => sc.methods = parse_list::<Method>(key, v)?,
        "copies" | "m" => sc.copies = parse(key, v)?,
        "n_causal" => sc.n_causal = parse(key, v)?,
        "effect_budget" => sc.effect_budget = Some(parse(key, v)?),
        "prevalence" => sc.prevalence = parse(key, v)?,
        "null_effects" => sc.null_effects = parse(key, v)?,
        "pool_haplotypes" => sc.pool.n_haps = parse(key, v)?,
        "pool_sites" => sc.pool.n_sites = parse(key, v)?,
        "pool_rho" => sc.pool.rho = parse(key, v)?,
        "pool_min_freq" => sc.pool.min_freq = parse(key, v)?,
        "pool_max_freq" => sc.pool.max_freq = parse(key, v)?,
        "pool_seed" => sc.pool.seed = parse(key, v)?,
        "haplotypes" => sc.haplotypes = Some(PathBuf::from(v)),
        "cluster_cutoff" => sc.cluster_cutoff = parse(key, v)?,
        "ld_shrinkage" => sc.ld_shrinkage = parse(key, v)?,
        "diag_method" => sc.diag_method = parse(key, v)?,
        other => return Err(config_err(other, "unknown key")),
    }
    Ok(())
}

/// Scenario from defaults overridden by the settings in `text`.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut sc = Scenario::default();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(line, format!("line {}: expected key = value", k + 1)))?;
        apply_setting(&mut sc, key, value)?;
    }
    Ok(sc)
}
