//! Summary-statistics tables.
//!
//! Tab-separated with a header naming the columns; `chrom`, `pos`, `ref`,
//! `alt` are required, plus either `z` or the pair `p`/`beta_sign` on every
//! row. `n` is optional. Other columns are ignored.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::assoc::{p_to_z, z_to_p};
use crate::error::{GkError, Result};
use crate::ld_panel::LdPanel;
use crate::variant::VariantId;
use crate::zscore::{ZProvenance, ZVector};

#[derive(Debug, Clone, PartialEq)]
pub struct SumStats {
    pub z: ZVector,
    /// Rows whose p-value was below the floor and got clamped.
    pub clamped: Vec<VariantId>,
}

fn column(header: &HashMap<&str, usize>, names: &[&str]) -> Option<usize> {
    names.iter().find_map(|n| header.get(n).copied())
}

fn field<'a>(cells: &[&'a str], col: usize, line: usize) -> Result<&'a str> {
    cells
        .get(col)
        .map(|s| s.trim())
        .filter(|s| !s.is_empty() && *s != "NA" && *s != ".")
        .ok_or_else(|| GkError::Format(format!("line {line}: missing field {}", col + 1)))
}

fn number(s: &str, what: &str, line: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| GkError::Format(format!("line {line}: {what} `{s}` is not a number")))
}

pub fn parse_sumstats(text: &str) -> Result<SumStats> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (_, head) = lines
        .next()
        .ok_or_else(|| GkError::Format("summary statistics file is empty".into()))?;
    let names: Vec<String> = head.split('\t').map(|s| s.trim().to_ascii_lowercase()).collect();
    let header: HashMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let need = |n: &[&str]| {
        column(&header, n).ok_or_else(|| GkError::Format(format!("missing column `{}`", n[0])))
    };
    let (c_chrom, c_pos) = (need(&["chrom", "chr"])?, need(&["pos", "bp"])?);
    let (c_ref, c_alt) = (need(&["ref"])?, need(&["alt"])?);
    let c_z = column(&header, &["z"]);
    let c_p = column(&header, &["p", "pvalue"]);
    let c_sign = column(&header, &["beta_sign", "sign"]);
    let c_n = column(&header, &["n"]);
    if c_z.is_none() && (c_p.is_none() || c_sign.is_none()) {
        return Err(GkError::Format("need a `z` column or `p` and `beta_sign` columns".into()));
    }

    let mut variants = Vec::new();
    let mut z = Vec::new();
    let mut n = Vec::new();
    let mut clamped = Vec::new();
    let mut any_converted = false;
    for (k, raw) in lines {
        let line = k + 1;
        let cells: Vec<&str> = raw.split('\t').collect();
        let chrom = field(&cells, c_chrom, line)?
            .trim_start_matches("chr")
            .parse::<u8>()
            .map_err(|_| GkError::Format(format!("line {line}: bad chromosome")))?;
        let pos = field(&cells, c_pos, line)?
            .parse::<u64>()
            .map_err(|_| GkError::Format(format!("line {line}: bad position")))?;
        let id = VariantId::new(chrom, pos, field(&cells, c_ref, line)?, field(&cells, c_alt, line)?)?;
        let direct = c_z.and_then(|c| field(&cells, c, line).ok());
        let value = match direct {
            Some(s) => number(s, "z", line)?,
            None => {
                let (Some(cp), Some(cs)) = (c_p, c_sign) else {
                    return Err(GkError::Format(format!("line {line}: no z and no p-value")));
                };
                let p = number(field(&cells, cp, line)?, "p", line)?;
                let sign = number(field(&cells, cs, line)?, "beta_sign", line)?;
                let conv = p_to_z(p, sign.signum() as i8)?;
                if conv.clamped {
                    clamped.push(id.clone());
                }
                any_converted = true;
                conv.z
            }
        };
        if let Some(cn) = c_n {
            n.push(number(field(&cells, cn, line)?, "n", line)?);
        }
        variants.push(id);
        z.push(value);
    }
    let provenance = if any_converted {
        ZProvenance::FromPValue
    } else {
        ZProvenance::Direct
    };
    let n_eff = c_n.map(|_| n);
    Ok(SumStats {
        z: ZVector::with_provenance(variants, z, n_eff, provenance)?,
        clamped,
    })
}

pub fn load_sumstats(path: &Path) -> Result<SumStats> {
    let text = std::fs::read_to_string(path).map_err(|e| GkError::io(path, e))?;
    parse_sumstats(&text)
}

/// `chrom pos ref alt z p [n]`, one row per variant.
pub fn format_sumstats(z: &ZVector) -> String {
    let mut out = String::from("chrom\tpos\tref\talt\tz\tp");
    if z.n_eff.is_some() {
        out.push_str("\tn");
    }
    out.push('\n');
    for (i, v) in z.variants.iter().enumerate() {
        write!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{:e}",
            v.chrom, v.pos, v.ref_allele, v.alt_allele, z.z[i], z_to_p(z.z[i])
        )
        .unwrap();
        if let Some(n) = &z.n_eff {
            write!(out, "\t{}", n[i]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Summary statistics matched to an LD panel by full variant id.
#[derive(Debug, Clone)]
pub struct Matched {
    pub panel: LdPanel,
    pub z: ZVector,
    /// Summary-statistics rows with no panel match (including allele
    /// mismatches; strands are never flipped).
    pub dropped_sumstats: usize,
    /// Panel variants without summary statistics.
    pub dropped_panel: usize,
}

/// Restrict both inputs to their shared variants, in panel order.
pub fn match_to_panel(panel: &LdPanel, z: &ZVector) -> Result<Matched> {
    let zidx = z.index();
    let keep: Vec<usize> = (0..panel.len())
        .filter(|&i| zidx.contains_key(&panel.variants()[i]))
        .collect();
    if keep.is_empty() {
        return Err(GkError::NoOverlap(
            "no variant is shared by the summary statistics and the LD panel".into(),
        ));
    }
    let sub = panel.subset(&keep);
    let aligned = z.aligned_to(sub.variants())?;
    Ok(Matched {
        dropped_sumstats: z.len() - keep.len(),
        dropped_panel: panel.len() - keep.len(),
        panel: sub,
        z: aligned,
    })
}
