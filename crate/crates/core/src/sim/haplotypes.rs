use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{GkError, Result};
use crate::ld_panel::LdPanel;
use crate::rng::rng_from_seed;
use crate::variant::VariantId;

/// Sites whose derived genotype MAF does not exceed this are dropped.
pub const MIN_MAF: f64 = 0.01;

/// Binary haplotypes (`H × p`, row-major) with their site ids.
#[derive(Debug, Clone, PartialEq)]
pub struct HaplotypePool {
    variants: Vec<VariantId>,
    haps: Vec<u8>,
    n_haps: usize,
    site_maf: Vec<f64>,
}

/// Settings for the synthetic pool: latent AR(1) Gaussian haplotypes
/// thresholded at per-site allele frequencies drawn uniformly from
/// `[min_freq, max_freq]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticPoolSpec {
    pub n_haps: usize,
    pub n_sites: usize,
    pub rho: f64,
    pub min_freq: f64,
    pub max_freq: f64,
    pub seed: u64,
}

impl Default for SyntheticPoolSpec {
    fn default() -> Self {
        SyntheticPoolSpec {
            n_haps: 10_000,
            n_sites: 260,
            rho: 0.95,
            min_freq: 0.02,
            max_freq: 0.5,
            seed: 20_240_101,
        }
    }
}

fn site_ids(n: usize) -> Vec<VariantId> {
    const ALLELES: [(&str, &str); 4] = [("A", "G"), ("C", "T"), ("G", "A"), ("T", "C")];
    (0..n)
        .map(|j| {
            let (r, a) = ALLELES[j % 4];
            VariantId::new(1, 100_000 + 500 * j as u64, r, a).expect("valid synthetic id")
        })
        .collect()
}

impl HaplotypePool {
    /// Pool from raw rows, keeping sites with genotype MAF above [`MIN_MAF`].
    pub fn new(variants: Vec<VariantId>, rows: Vec<Vec<u8>>) -> Result<HaplotypePool> {
        let p = variants.len();
        if rows.is_empty() {
            return Err(GkError::Data("haplotype pool is empty".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != p) {
            return Err(GkError::Data(format!(
                "haplotype of length {} for {p} sites",
                r.len()
            )));
        }
        if rows.iter().flatten().any(|&a| a > 1) {
            return Err(GkError::Data("haplotype entries must be 0 or 1".into()));
        }
        let h = rows.len();
        let freq: Vec<f64> = (0..p)
            .map(|j| rows.iter().filter(|r| r[j] == 1).count() as f64 / h as f64)
            .collect();
        let keep: Vec<usize> = (0..p)
            .filter(|&j| freq[j].min(1.0 - freq[j]) > MIN_MAF)
            .collect();
        Ok(Self::from_kept(variants, &rows, &keep, &freq))
    }

    /// Pool kept as given, no MAF filter; for tiny hand-built pools.
    pub fn unfiltered(variants: Vec<VariantId>, rows: Vec<Vec<u8>>) -> Result<HaplotypePool> {
        let p = variants.len();
        if rows.is_empty() || rows.iter().any(|r| r.len() != p || r.iter().any(|&a| a > 1)) {
            return Err(GkError::Data("malformed haplotype rows".into()));
        }
        let h = rows.len();
        let freq: Vec<f64> = (0..p)
            .map(|j| rows.iter().filter(|r| r[j] == 1).count() as f64 / h as f64)
            .collect();
        let keep: Vec<usize> = (0..p).collect();
        Ok(Self::from_kept(variants, &rows, &keep, &freq))
    }

    fn from_kept(variants: Vec<VariantId>, rows: &[Vec<u8>], keep: &[usize], freq: &[f64]) -> HaplotypePool {
        let mut haps = Vec::with_capacity(rows.len() * keep.len());
        for r in rows {
            haps.extend(keep.iter().map(|&j| r[j]));
        }
        HaplotypePool {
            variants: keep.iter().map(|&j| variants[j].clone()).collect(),
            haps,
            n_haps: rows.len(),
            site_maf: keep.iter().map(|&j| freq[j].min(1.0 - freq[j])).collect(),
        }
    }

    pub fn synthetic(spec: &SyntheticPoolSpec) -> Result<HaplotypePool> {
        if spec.n_haps == 0 || spec.n_sites == 0 {
            return Err(GkError::Precondition("synthetic pool needs haplotypes and sites".into()));
        }
        if !(spec.rho.abs() < 1.0) || !(0.0 < spec.min_freq && spec.min_freq <= spec.max_freq && spec.max_freq <= 0.5) {
            return Err(GkError::Precondition("invalid synthetic pool settings".into()));
        }
        let mut rng = rng_from_seed(spec.seed);
        let normal = Normal::standard();
        let cut: Vec<f64> = (0..spec.n_sites)
            .map(|_| {
                let f = rng.random_range(spec.min_freq..=spec.max_freq);
                normal.inverse_cdf(1.0 - f)
            })
            .collect();
        let innov = (1.0 - spec.rho * spec.rho).sqrt();
        let rows: Vec<Vec<u8>> = (0..spec.n_haps)
            .map(|_| {
                let mut x: f64 = rng.sample(StandardNormal);
                (0..spec.n_sites)
                    .map(|j| {
                        if j > 0 {
                            x = spec.rho * x + innov * rng.sample::<f64, _>(StandardNormal);
                        }
                        u8::from(x > cut[j])
                    })
                    .collect()
            })
            .collect();
        HaplotypePool::new(site_ids(spec.n_sites), rows)
    }

    pub fn variants(&self) -> &[VariantId] {
        &self.variants
    }

    pub fn n_haps(&self) -> usize {
        self.n_haps
    }

    pub fn n_sites(&self) -> usize {
        self.variants.len()
    }

    pub fn site_maf(&self) -> &[f64] {
        &self.site_maf
    }

    pub fn allele(&self, hap: usize, site: usize) -> u8 {
        self.haps[hap * self.n_sites() + site]
    }

    pub fn haplotype(&self, hap: usize) -> &[u8] {
        let p = self.n_sites();
        &self.haps[hap * p..(hap + 1) * p]
    }

    /// Pool restricted to `sites`, in that order (no re-filtering).
    pub fn select_sites(&self, sites: &[usize]) -> HaplotypePool {
        let mut haps = Vec::with_capacity(self.n_haps * sites.len());
        for h in 0..self.n_haps {
            let row = self.haplotype(h);
            haps.extend(sites.iter().map(|&j| row[j]));
        }
        HaplotypePool {
            variants: sites.iter().map(|&j| self.variants[j].clone()).collect(),
            haps,
            n_haps: self.n_haps,
            site_maf: sites.iter().map(|&j| self.site_maf[j]).collect(),
        }
    }

    /// Allele correlation between sites across the pool; equals genotype
    /// correlation for individuals made of two random haplotypes.
    pub fn ld_panel(&self) -> Result<LdPanel> {
        let p = self.n_sites();
        let h = self.n_haps as f64;
        let mut x = DMatrix::zeros(self.n_haps, p);
        for i in 0..self.n_haps {
            for j in 0..p {
                x[(i, j)] = self.allele(i, j) as f64;
            }
        }
        let means: Vec<f64> = (0..p).map(|j| x.column(j).sum() / h).collect();
        for j in 0..p {
            x.column_mut(j).add_scalar_mut(-means[j]);
        }
        let cov = x.transpose() * &x;
        let mut sigma = DMatrix::from_fn(p, p, |a, b| cov[(a, b)] / (cov[(a, a)] * cov[(b, b)]).sqrt());
        for a in 0..p {
            sigma[(a, a)] = 1.0;
            for b in 0..p {
                sigma[(a, b)] = sigma[(a, b)].clamp(-1.0, 1.0);
            }
        }
        LdPanel::new(self.variants.clone(), sigma)
    }

    /// Tab-separated text: a header of site ids, then one 0/1 row per
    /// haplotype.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.variants.iter().map(|v| v.to_string()).collect();
        out.push_str(&header.join("\t"));
        out.push('\n');
        for h in 0..self.n_haps {
            let row: Vec<&str> = self
                .haplotype(h)
                .iter()
                .map(|&a| if a == 1 { "1" } else { "0" })
                .collect();
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<HaplotypePool> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| GkError::Format("haplotype file is empty".into()))?;
        let variants = header
            .split('\t')
            .map(|s| s.trim().parse::<VariantId>())
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let row = line
                .split('\t')
                .map(|s| match s.trim() {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(GkError::Format(format!(
                        "haplotype row {}: '{other}' is not 0 or 1",
                        k + 1
                    ))),
                })
                .collect::<Result<Vec<u8>>>()?;
            rows.push(row);
        }
        HaplotypePool::new(variants, rows)
    }

    pub fn load(path: &Path) -> Result<HaplotypePool> {
        let text = std::fs::read_to_string(path).map_err(|e| GkError::io(path, e))?;
        HaplotypePool::parse_tsv(&text)
    }
}
