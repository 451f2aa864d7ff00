use std::collections::HashMap;

use crate::error::{GkError, Result};
use crate::variant::VariantId;

/// How a Z-score vector was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZProvenance {
    Direct,
    FromPValue,
    MetaCombined,
}

/// Signed per-variant Z-scores in a fixed variant order.
#[derive(Debug, Clone, PartialEq)]
pub struct ZVector {
    pub variants: Vec<VariantId>,
    pub z: Vec<f64>,
    pub n_eff: Option<Vec<f64>>,
    pub provenance: ZProvenance,
}

impl ZVector {
    pub fn new(variants: Vec<VariantId>, z: Vec<f64>) -> Result<Self> {
        Self::with_provenance(variants, z, None, ZProvenance::Direct)
    }

    pub fn with_provenance(
        variants: Vec<VariantId>,
        z: Vec<f64>,
        n_eff: Option<Vec<f64>>,
        provenance: ZProvenance,
    ) -> Result<Self> {
        if variants.len() != z.len() {
            return Err(GkError::Data(format!(
                "{} variants but {} z-scores",
                variants.len(),
                z.len()
            )));
        }
        if let Some(n) = &n_eff {
            if n.len() != z.len() {
                return Err(GkError::Data("sample-size column length mismatch".into()));
            }
        }
        if let Some(i) = z.iter().position(|v| !v.is_finite()) {
            return Err(GkError::Data(format!(
                "non-finite z-score for {}",
                variants[i]
            )));
        }
        Ok(ZVector {
            variants,
            z,
            n_eff,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn index(&self) -> HashMap<&VariantId, usize> {
        self.variants
            .iter()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect()
    }

    pub fn get(&self, id: &VariantId) -> Option<f64> {
        self.variants.iter().position(|v| v == id).map(|i| self.z[i])
    }

    /// Reorder to `order`; every id in `order` must be present.
    pub fn aligned_to(&self, order: &[VariantId]) -> Result<ZVector> {
        let idx = self.index();
        let mut z = Vec::with_capacity(order.len());
        let mut n = self.n_eff.as_ref().map(|_| Vec::with_capacity(order.len()));
        for id in order {
            let i = *idx
                .get(id)
                .ok_or_else(|| GkError::Data(format!("no z-score for {id}")))?;
            z.push(self.z[i]);
            if let (Some(dst), Some(src)) = (n.as_mut(), self.n_eff.as_ref()) {
                dst.push(src[i]);
            }
        }
        ZVector::with_provenance(order.to_vec(), z, n, self.provenance)
    }
}
