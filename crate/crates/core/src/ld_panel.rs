//! LD correlation panels: loading, shrinkage, and tight-LD clustering.
//!
//! One panel holds one LD block. Two on-disk layouts are supported:
//!
//! * dense text: a `p=<int>` line, `p` variant ids, then `p` rows of `p`
//!   whitespace-separated decimals;
//! * dense binary: the 16-byte header `GKLD`, version (u32), `p` (u32),
//!   reserved (u32), then `p*p` little-endian f64 in row-major order,
//!   followed by the `p` variant ids as newline-terminated UTF-8 lines.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{GkError, Result};
use crate::variant::VariantId;
use crate::zscore::ZVector;

pub const DEFAULT_REGULARIZATION: f64 = 0.05;
pub const DEFAULT_CLUSTER_CUTOFF: f64 = 0.75;

const BINARY_MAGIC: &[u8; 4] = b"GKLD";
const BINARY_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdFormat {
    DenseText,
    DenseBinary,
}

impl FromStr for LdFormat {
    type Err = GkError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense-text" | "text" => Ok(LdFormat::DenseText),
            "dense-binary" | "binary" => Ok(LdFormat::DenseBinary),
            other => Err(GkError::Format(format!("unknown LD format `{other}`"))),
        }
    }
}

/// Variant metadata plus the correlation matrix of one LD block.
#[derive(Debug, Clone, PartialEq)]
pub struct LdPanel {
    variants: Vec<VariantId>,
    sigma: DMatrix<f64>,
}

impl LdPanel {
    /// Validate and symmetrize `(Σ + Σᵀ)/2`.
    pub fn new(variants: Vec<VariantId>, sigma: DMatrix<f64>) -> Result<Self> {
        let p = variants.len();
        if sigma.nrows() != p || sigma.ncols() != p {
            return Err(GkError::Format(format!(
                "{p} variants but a {}x{} matrix",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        let mut seen = HashSet::with_capacity(p);
        for v in &variants {
            if !seen.insert(v) {
                return Err(GkError::Format(format!("duplicate variant {v}")));
            }
        }
        for ((i, j), &x) in sigma.iter().enumerate().map(|(k, x)| ((k % p, k / p), x)) {
            if !x.is_finite() {
                return Err(GkError::Data(format!("non-finite LD entry at ({i}, {j})")));
            }
            if x.abs() > 1.0 + 1e-6 {
                return Err(GkError::Data(format!(
                    "LD entry {x} at ({i}, {j}) is outside [-1, 1]"
                )));
            }
        }
        for i in 0..p {
            if (sigma[(i, i)] - 1.0).abs() > 1e-6 {
                return Err(GkError::Data(format!(
                    "LD diagonal entry {} for {} is not 1",
                    sigma[(i, i)],
                    variants[i]
                )));
            }
        }
        let mut sym = (&sigma + sigma.transpose()) * 0.5;
        for i in 0..p {
            for j in 0..p {
                sym[(i, j)] = if i == j { 1.0 } else { sym[(i, j)].clamp(-1.0, 1.0) };
            }
        }
        Ok(LdPanel {
            variants,
            sigma: sym,
        })
    }

    pub fn identity(variants: Vec<VariantId>) -> Result<Self> {
        let p = variants.len();
        LdPanel::new(variants, DMatrix::identity(p, p))
    }

    pub fn variants(&self) -> &[VariantId] {
        &self.variants
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    pub fn position(&self, id: &VariantId) -> Option<usize> {
        self.variants.iter().position(|v| v == id)
    }

    pub fn index(&self) -> HashMap<&VariantId, usize> {
        self.variants
            .iter()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect()
    }

    /// Panel restricted to `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> LdPanel {
        let variants = idx.iter().map(|&i| self.variants[i].clone()).collect();
        let sigma = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.sigma[(idx[a], idx[b])]);
        LdPanel { variants, sigma }
    }

    /// Drop variants named in a user-supplied exclusion list.
    pub fn exclude(&self, excluded: &HashSet<VariantId>) -> LdPanel {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| !excluded.contains(&self.variants[i]))
            .collect();
        self.subset(&keep)
    }

    /// Shrink toward the identity: `(1 - eps) Σ + eps I`.
    pub fn regularize(&self, eps: f64) -> LdPanel {
        let p = self.len();
        let mut sigma = &self.sigma * (1.0 - eps);
        for i in 0..p {
            sigma[(i, i)] = 1.0;
        }
        LdPanel {
            variants: self.variants.clone(),
            sigma,
        }
    }

    pub fn load(path: &Path, format: LdFormat) -> Result<LdPanel> {
        match format {
            LdFormat::DenseText => {
                let text = fs::read_to_string(path).map_err(|e| GkError::io(path, e))?;
                Self::parse_text(&text)
            }
            LdFormat::DenseBinary => {
                let bytes = fs::read(path).map_err(|e| GkError::io(path, e))?;
                Self::parse_binary(&bytes)
            }
        }
    }

    pub fn save(&self, path: &Path, format: LdFormat) -> Result<()> {
        let bytes = match format {
            LdFormat::DenseText => self.to_text().into_bytes(),
            LdFormat::DenseBinary => self.to_binary(),
        };
        fs::write(path, bytes).map_err(|e| GkError::io(path, e))
    }

    pub fn parse_text(text: &str) -> Result<LdPanel> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| GkError::Format("empty LD file".into()))?;
        let p: usize = header
            .trim()
            .strip_prefix("p=")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| GkError::Format(format!("bad LD header `{header}`")))?;
        let mut variants = Vec::with_capacity(p);
        for _ in 0..p {
            let line = lines
                .next()
                .ok_or_else(|| GkError::Format("fewer variant ids than p".into()))?;
            variants.push(line.parse()?);
        }
        let mut values = Vec::with_capacity(p * p);
        for r in 0..p {
            let line = lines
                .next()
                .ok_or_else(|| GkError::Format(format!("LD matrix has {r} rows, expected {p}")))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| GkError::Format(format!("bad number `{t}` in LD row {r}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != p {
                return Err(GkError::Format(format!(
                    "LD row {r} has {} entries, expected {p}",
                    row.len()
                )));
            }
            values.extend(row);
        }
        if lines.next().is_some() {
            return Err(GkError::Format("trailing content after LD matrix".into()));
        }
        LdPanel::new(variants, DMatrix::from_row_slice(p, p, &values))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("p={}\n", self.len());
        for v in &self.variants {
            out.push_str(&v.to_string());
            out.push('\n');
        }
        for i in 0..self.len() {
            let row: Vec<String> = (0..self.len())
                .map(|j| format!("{}", self.sigma[(i, j)]))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse_binary(bytes: &[u8]) -> Result<LdPanel> {
        if bytes.len() < 16 || &bytes[0..4] != BINARY_MAGIC {
            return Err(GkError::Format("missing GKLD header".into()));
        }
        let word = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap());
        let version = word(4);
        if version != BINARY_VERSION {
            return Err(GkError::Format(format!("unsupported GKLD version {version}")));
        }
        let p = word(8) as usize;
        let body = 16 + p * p * 8;
        if bytes.len() < body {
            return Err(GkError::Format(format!(
                "GKLD body holds {} bytes, expected {} for p={p}",
                bytes.len() - 16,
                p * p * 8
            )));
        }
        let values: Vec<f64> = bytes[16..body]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let ids = std::str::from_utf8(&bytes[body..])
            .map_err(|_| GkError::Format("variant id block is not UTF-8".into()))?;
        let variants: Vec<VariantId> = ids
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        if variants.len() != p {
            return Err(GkError::Format(format!(
                "header says p={p} but {} variant ids follow the matrix",
                variants.len()
            )));
        }
        LdPanel::new(variants, DMatrix::from_row_slice(p, p, &values))
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let p = self.len();
        let mut out = Vec::with_capacity(16 + p * p * 8 + p * 16);
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
        out.extend_from_slice(&(p as u32).to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        for i in 0..p {
            for j in 0..p {
                out.extend_from_slice(&self.sigma[(i, j)].to_le_bytes());
            }
        }
        for v in &self.variants {
            writeln!(out, "{v}").unwrap();
        }
        out
    }
}

/// Single-linkage clusters of a panel and one representative per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    cutoff: f64,
    variants: Vec<VariantId>,
    cluster_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    representative: Vec<usize>,
}

impl ClusterAssignment {
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn n_clusters(&self) -> usize {
        self.members.len()
    }

    /// Cluster index of panel variant `i`.
    pub fn cluster_of(&self, i: usize) -> usize {
        self.cluster_of[i]
    }

    pub fn cluster_of_id(&self, id: &VariantId) -> Option<usize> {
        self.variants
            .iter()
            .position(|v| v == id)
            .map(|i| self.cluster_of[i])
    }

    /// Panel indices of the members of cluster `c`, ascending.
    pub fn members(&self, c: usize) -> &[usize] {
        &self.members[c]
    }

    /// Panel index of the representative of cluster `c`.
    pub fn representative(&self, c: usize) -> usize {
        self.representative[c]
    }

    pub fn representative_id(&self, c: usize) -> &VariantId {
        &self.variants[self.representative[c]]
    }

    /// Panel indices of all representatives, in cluster order.
    pub fn representatives(&self) -> &[usize] {
        &self.representative
    }

    pub fn is_representative(&self, i: usize) -> bool {
        self.representative[self.cluster_of[i]] == i
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Single-linkage clustering on the dissimilarity `1 - |corr|`, cut where
/// no two clusters share a pair with `|corr| >= cutoff`.
///
/// Single linkage at a fixed cut equals the connected components of the
/// graph joining every pair at or above the cutoff. Clusters are numbered
/// by their first member in panel order. The representative maximises the
/// sum of absolute within-cluster correlations; ties go to the smallest
/// variant id.
pub fn cluster_variants(panel: &LdPanel, cutoff: f64) -> ClusterAssignment {
    assert!(
        cutoff > 0.0 && cutoff <= 1.0,
        "cluster cutoff must lie in (0, 1]"
    );
    let p = panel.len();
    let sigma = panel.sigma();
    let mut ds = DisjointSet::new(p);
    for i in 0..p {
        for j in (i + 1)..p {
            if sigma[(i, j)].abs() >= cutoff {
                ds.union(i, j);
            }
        }
    }

    let mut label_of_root = HashMap::new();
    let mut cluster_of = vec![0; p];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (i, slot) in cluster_of.iter_mut().enumerate() {
        let root = ds.find(i);
        let c = *label_of_root.entry(root).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        members[c].push(i);
        *slot = c;
    }

    let ids = panel.variants();
    let representative = members
        .iter()
        .map(|m| {
            // Sum in id order so the result does not depend on input order.
            let mut by_id = m.clone();
            by_id.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
            let mut best = by_id[0];
            let mut best_score = f64::NEG_INFINITY;
            for &j in &by_id {
                let score: f64 = by_id.iter().map(|&k| sigma[(j, k)].abs()).sum();
                if score > best_score + 1e-12 {
                    best = j;
                    best_score = score;
                }
            }
            best
        })
        .collect();

    ClusterAssignment {
        cutoff,
        variants: ids.to_vec(),
        cluster_of,
        members,
        representative,
    }
}

/// Grow selected representatives into the reported set: each representative
/// plus the members of its cluster with `|corr(j, rep)| >= cutoff` and
/// `|z_j| >= |z_rep|`.
pub fn expand_selection(
    clusters: &ClusterAssignment,
    panel: &LdPanel,
    selected_reps: &BTreeSet<VariantId>,
    z: &ZVector,
) -> Result<BTreeSet<VariantId>> {
    let pidx = panel.index();
    let zidx = z.index();
    let z_of = |id: &VariantId| -> Result<f64> {
        zidx.get(id)
            .map(|&i| z.z[i])
            .ok_or_else(|| GkError::Data(format!("no z-score for cluster member {id}")))
    };
    let mut out = BTreeSet::new();
    for rep in selected_reps {
        let r = *pidx
            .get(rep)
            .ok_or_else(|| GkError::Precondition(format!("{rep} is not in the LD panel")))?;
        if !clusters.is_representative(r) {
            return Err(GkError::Precondition(format!(
                "{rep} is not a cluster representative"
            )));
        }
        let z_rep = z_of(rep)?.abs();
        out.insert(rep.clone());
        for &j in clusters.members(clusters.cluster_of(r)) {
            if j == r {
                continue;
            }
            let id = &panel.variants()[j];
            let z_j = z_of(id)?.abs();
            if panel.sigma()[(j, r)].abs() >= clusters.cutoff() && z_j >= z_rep {
                out.insert(id.clone());
            }
        }
    }
    Ok(out)
}
