//! Input files that only the command line reads.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gk_core::assoc::{Cohort, Kinship, KinshipBlock};
use gk_core::ld_panel::{LdFormat, LdPanel};
use gk_core::meta::Study;
use gk_core::sumstats::load_sumstats;
use gk_core::{GkError, VariantId};
use nalgebra::{DMatrix, DVector};

use crate::args::LdFileFormat;

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    Ok(std::fs::read(path).map_err(|e| GkError::io(path, e))?)
}

fn read_text(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path).map_err(|e| GkError::io(path, e))?)
}

pub fn load_ld(path: &Path, format: LdFileFormat) -> Result<LdPanel> {
    let bytes = read_bytes(path)?;
    let format = match format {
        LdFileFormat::Text => LdFormat::DenseText,
        LdFileFormat::Binary => LdFormat::DenseBinary,
        LdFileFormat::Auto if bytes.starts_with(b"GKLD") => LdFormat::DenseBinary,
        LdFileFormat::Auto => LdFormat::DenseText,
    };
    let panel = match format {
        LdFormat::DenseBinary => LdPanel::parse_binary(&bytes),
        LdFormat::DenseText => {
            let text = String::from_utf8(bytes)
                .map_err(|_| GkError::Format(format!("{} is not UTF-8 text", path.display())))?;
            LdPanel::parse_text(&text)
        }
    };
    Ok(panel.with_context(|| format!("reading LD panel {}", path.display()))?)
}

/// Data lines split on tabs, skipping blanks and `#` comments; the first is
/// the header.
fn table(text: &str) -> Vec<(usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i + 1, l.split('\t').map(str::trim).collect()))
        .collect()
}

fn bad(path: &Path, msg: String) -> anyhow::Error {
    GkError::Format(format!("{}: {msg}", path.display())).into()
}

/// Cohort table: an `iid` column, a `y` column, optional `fid`, genotype
/// dosage columns headed by variant ids (`chrom:pos:ref:alt`), and any other
/// columns as covariates. An intercept is added.
pub struct CohortFile {
    pub cohort: Cohort,
    pub variants: Vec<VariantId>,
}

pub fn load_cohort(path: &Path, kinship: Option<&Path>) -> Result<CohortFile> {
    let text = read_text(path)?;
    let rows = table(&text);
    let Some(((_, head), body)) = rows.split_first() else {
        return Err(bad(path, "empty cohort table".into()));
    };
    let find = |name: &str| head.iter().position(|h| h.eq_ignore_ascii_case(name));
    let c_iid = find("iid").ok_or_else(|| bad(path, "missing column `iid`".into()))?;
    let c_y = find("y").ok_or_else(|| bad(path, "missing column `y`".into()))?;
    let c_fid = find("fid");
    let mut geno = Vec::new();
    let mut covs = Vec::new();
    for (c, h) in head.iter().enumerate() {
        if c == c_iid || c == c_y || Some(c) == c_fid {
            continue;
        }
        match h.parse::<VariantId>() {
            Ok(id) => geno.push((c, id)),
            Err(_) => covs.push(c),
        }
    }
    if geno.is_empty() {
        return Err(bad(path, "no genotype columns (headers of the form chrom:pos:ref:alt)".into()));
    }
    let n = body.len();
    let mut iids = Vec::with_capacity(n);
    let mut y = DVector::zeros(n);
    let mut x = DMatrix::from_element(n, 1 + covs.len(), 1.0);
    let mut g = DMatrix::zeros(n, geno.len());
    let num = |cells: &[&str], c: usize, line: usize| -> Result<f64> {
        let s = cells.get(c).copied().unwrap_or("");
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(path, format!("line {line}: `{s}` in column `{}` is not a number", head[c])))
    };
    for (i, (line, cells)) in body.iter().enumerate() {
        if cells.len() != head.len() {
            return Err(bad(path, format!("line {line}: {} fields, header has {}", cells.len(), head.len())));
        }
        iids.push(cells[c_iid].to_string());
        y[i] = num(cells, c_y, *line)?;
        for (k, &c) in covs.iter().enumerate() {
            x[(i, k + 1)] = num(cells, c, *line)?;
        }
        for (k, (c, _)) in geno.iter().enumerate() {
            g[(i, k)] = num(cells, *c, *line)?;
        }
    }
    let kin = match kinship {
        Some(kp) => Some(load_kinship(kp, &iids)?),
        None => None,
    };
    let cohort = Cohort::new(y, x, g, kin).with_context(|| format!("building cohort from {}", path.display()))?;
    Ok(CohortFile {
        cohort,
        variants: geno.into_iter().map(|(_, id)| id).collect(),
    })
}

fn find_root(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Kinship from `iid1 iid2 phi` rows; unlisted pairs are unrelated and the
/// diagonal is 1.
pub fn load_kinship(path: &Path, iids: &[String]) -> Result<Kinship> {
    let text = read_text(path)?;
    let index: HashMap<&str, usize> = iids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let n = iids.len();
    let mut pairs = Vec::new();
    for (k, (line, cells)) in table(&text).into_iter().enumerate() {
        if cells.len() < 3 {
            return Err(bad(path, format!("line {line}: expected iid1, iid2, phi")));
        }
        let phi = match cells[2].parse::<f64>() {
            Ok(v) => v,
            // a header row
            Err(_) if k == 0 => continue,
            Err(_) => return Err(bad(path, format!("line {line}: `{}` is not a number", cells[2]))),
        };
        let look = |s: &str| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| bad(path, format!("line {line}: individual `{s}` is not in the cohort")))
        };
        let (a, b) = (look(cells[0])?, look(cells[1])?);
        if a != b {
            pairs.push((a, b, phi));
        }
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for &(a, b, _) in &pairs {
        let (ra, rb) = (find_root(&mut parent, a), find_root(&mut parent, b));
        parent[ra.max(rb)] = ra.min(rb);
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..n {
        let r = find_root(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut members: Vec<Vec<usize>> = groups.into_values().collect();
    members.sort_unstable();
    let mut pos = vec![0usize; n];
    for m in &members {
        for (k, &i) in m.iter().enumerate() {
            pos[i] = k;
        }
    }
    let mut mats: Vec<DMatrix<f64>> = members.iter().map(|m| DMatrix::identity(m.len(), m.len())).collect();
    let block_of: HashMap<usize, usize> = members
        .iter()
        .enumerate()
        .flat_map(|(b, m)| m.iter().map(move |&i| (i, b)))
        .collect();
    for &(a, b, phi) in &pairs {
        let blk = block_of[&a];
        mats[blk][(pos[a], pos[b])] = phi;
        mats[blk][(pos[b], pos[a])] = phi;
    }
    let blocks = members
        .into_iter()
        .zip(mats)
        .map(|(members, matrix)| KinshipBlock { members, matrix })
        .collect();
    Ok(Kinship::block_diagonal(n, blocks).with_context(|| format!("kinship {}", path.display()))?)
}

/// Study list: `name`, `n`, `path` columns; relative paths are resolved
/// against the list's directory.
pub fn load_studies(path: &Path) -> Result<(Vec<Study>, Vec<PathBuf>)> {
    let text = read_text(path)?;
    let rows = table(&text);
    let Some(((_, head), body)) = rows.split_first() else {
        return Err(bad(path, "empty study list".into()));
    };
    let col = |name: &str| {
        head.iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| bad(path, format!("missing column `{name}`")))
    };
    let (c_name, c_n, c_path) = (col("name")?, col("n")?, col("path")?);
    let base = path.parent().unwrap_or(Path::new("."));
    let mut studies = Vec::new();
    let mut files = Vec::new();
    for (line, cells) in body {
        let get = |c: usize| cells.get(c).copied().unwrap_or("");
        let n: f64 = get(c_n)
            .parse()
            .ok()
            .filter(|v: &f64| *v > 0.0)
            .ok_or_else(|| bad(path, format!("line {line}: sample size `{}` is not positive", get(c_n))))?;
        let file = base.join(get(c_path));
        let s = load_sumstats(&file)?;
        files.push(file);
        studies.push(Study {
            name: get(c_name).to_string(),
            n,
            z: s.z,
        });
    }
    if studies.is_empty() {
        return Err(bad(path, "no studies listed".into()));
    }
    Ok((align_studies(studies)?, files))
}

/// Restrict every study to the variants all of them share, in the first
/// study's order.
fn align_studies(studies: Vec<Study>) -> Result<Vec<Study>> {
    let indexes: Vec<_> = studies.iter().map(|s| s.z.index()).collect();
    let shared: Vec<VariantId> = studies[0]
        .z
        .variants
        .iter()
        .filter(|v| indexes.iter().all(|ix| ix.contains_key(v)))
        .cloned()
        .collect();
    if shared.is_empty() {
        return Err(GkError::NoOverlap("the studies share no variant".into()).into());
    }
    let dropped = studies[0].z.len() - shared.len();
    if dropped > 0 {
        log::warn!("{dropped} variants are missing from at least one study and were dropped");
    }
    drop(indexes);
    studies
        .into_iter()
        .map(|s| {
            let z = s.z.aligned_to(&shared)?;
            Ok(Study { z, ..s })
        })
        .collect()
}
