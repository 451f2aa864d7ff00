use std::fmt;
use std::str::FromStr;

use crate::error::GkError;

/// A biallelic variant, written `chrom:pos:ref:alt` (e.g. `1:20883276:T:C`).
///
/// Ordering is lexicographic on `(chrom, pos, ref, alt)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VariantId {
    pub chrom: u8,
    pub pos: u64,
    pub ref_allele: String,
    pub alt_allele: String,
}

impl VariantId {
    pub fn new(
        chrom: u8,
        pos: u64,
        ref_allele: impl Into<String>,
        alt_allele: impl Into<String>,
    ) -> Result<Self, GkError> {
        let ref_allele = ref_allele.into();
        let alt_allele = alt_allele.into();
        if pos == 0 {
            return Err(GkError::Format("variant position must be positive".into()));
        }
        if ref_allele.is_empty() || alt_allele.is_empty() {
            return Err(GkError::Format("empty allele".into()));
        }
        if ref_allele == alt_allele {
            return Err(GkError::Format(format!(
                "ref and alt alleles are identical ({ref_allele})"
            )));
        }
        if ref_allele.contains([':', '\t', ' ']) || alt_allele.contains([':', '\t', ' ']) {
            return Err(GkError::Format("allele contains a separator".into()));
        }
        Ok(VariantId {
            chrom,
            pos,
            ref_allele,
            alt_allele,
        })
    }
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}:{}",
            self.chrom, self.pos, self.ref_allele, self.alt_allele
        )
    }
}

impl FromStr for VariantId {
    type Err = GkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        if parts.len() != 4 {
            return Err(GkError::Format(format!(
                "variant id `{s}` is not chrom:pos:ref:alt"
            )));
        }
        let chrom = parts[0]
            .parse::<u8>()
            .map_err(|_| GkError::Format(format!("bad chromosome in `{s}`")))?;
        let pos = parts[1]
            .parse::<u64>()
            .map_err(|_| GkError::Format(format!("bad position in `{s}`")))?;
        VariantId::new(chrom, pos, parts[2], parts[3])
    }
}
