use nalgebra::DMatrix;

use crate::error::{GkError, Result};
use crate::linalg::min_eigenvalue;

/// One diagonal block of a kinship matrix: the individuals it covers and
/// their relatedness coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct KinshipBlock {
    pub members: Vec<usize>,
    pub matrix: DMatrix<f64>,
}

/// Block-diagonal relatedness matrix `Φ` (unit diagonal, PSD).
///
/// Unrelated individuals are singleton blocks; a pedigree cohort has one
/// block per family.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinship {
    n: usize,
    blocks: Vec<KinshipBlock>,
}

impl Kinship {
    pub fn identity(n: usize) -> Kinship {
        Kinship {
            n,
            blocks: (0..n)
                .map(|i| KinshipBlock {
                    members: vec![i],
                    matrix: DMatrix::identity(1, 1),
                })
                .collect(),
        }
    }

    pub fn block_diagonal(n: usize, blocks: Vec<KinshipBlock>) -> Result<Kinship> {
        let mut seen = vec![false; n];
        for b in &blocks {
            let k = b.members.len();
            if b.matrix.nrows() != k || b.matrix.ncols() != k {
                return Err(GkError::Data("kinship block size mismatch".into()));
            }
            for &i in &b.members {
                if i >= n || seen[i] {
                    return Err(GkError::Data(format!(
                        "individual {i} is missing from or repeated in the kinship blocks"
                    )));
                }
                seen[i] = true;
            }
            for r in 0..k {
                if (b.matrix[(r, r)] - 1.0).abs() > 1e-10 {
                    return Err(GkError::Data("kinship diagonal must be 1".into()));
                }
                for c in 0..k {
                    let v = b.matrix[(r, c)];
                    if !v.is_finite() || (v - b.matrix[(c, r)]).abs() > 1e-10 {
                        return Err(GkError::Data("kinship must be finite and symmetric".into()));
                    }
                }
            }
            if k > 1 && min_eigenvalue(&b.matrix) < -1e-8 {
                return Err(GkError::Data("kinship block is not positive semidefinite".into()));
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(GkError::Data(format!("individual {i} has no kinship block")));
        }
        Ok(Kinship { n, blocks })
    }

    /// Split a dense matrix into connected blocks of non-zero relatedness.
    pub fn from_dense(phi: &DMatrix<f64>) -> Result<Kinship> {
        let n = phi.nrows();
        if phi.ncols() != n {
            return Err(GkError::Data("kinship matrix is not square".into()));
        }
        let mut label = vec![usize::MAX; n];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let g = groups.len();
            let mut stack = vec![start];
            label[start] = g;
            let mut members = vec![];
            while let Some(i) = stack.pop() {
                members.push(i);
                for j in 0..n {
                    if label[j] == usize::MAX && (phi[(i, j)] != 0.0 || phi[(j, i)] != 0.0) {
                        label[j] = g;
                        stack.push(j);
                    }
                }
            }
            members.sort_unstable();
            groups.push(members);
        }
        let blocks = groups
            .into_iter()
            .map(|m| KinshipBlock {
                matrix: DMatrix::from_fn(m.len(), m.len(), |a, b| phi[(m[a], m[b])]),
                members: m,
            })
            .collect();
        Kinship::block_diagonal(n, blocks)
    }

    /// `count` copies of the same block laid end to end.
    pub fn repeated(block: &DMatrix<f64>, count: usize) -> Result<Kinship> {
        let k = block.nrows();
        let blocks = (0..count)
            .map(|f| KinshipBlock {
                members: (f * k..(f + 1) * k).collect(),
                matrix: block.clone(),
            })
            .collect();
        Kinship::block_diagonal(k * count, blocks)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[KinshipBlock] {
        &self.blocks
    }

    pub fn is_identity(&self) -> bool {
        self.blocks.iter().all(|b| b.members.len() == 1)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for b in &self.blocks {
            for (a, &i) in b.members.iter().enumerate() {
                for (c, &j) in b.members.iter().enumerate() {
                    out[(i, j)] = b.matrix[(a, c)];
                }
            }
        }
        out
    }

    /// Kinship among the individuals `idx`, renumbered `0..idx.len()`.
    pub fn subset(&self, idx: &[usize]) -> Kinship {
        let mut new_index = vec![usize::MAX; self.n];
        for (k, &i) in idx.iter().enumerate() {
            new_index[i] = k;
        }
        let mut blocks = Vec::new();
        for b in &self.blocks {
            let keep: Vec<usize> = (0..b.members.len())
                .filter(|&a| new_index[b.members[a]] != usize::MAX)
                .collect();
            if keep.is_empty() {
                continue;
            }
            blocks.push(KinshipBlock {
                members: keep.iter().map(|&a| new_index[b.members[a]]).collect(),
                matrix: DMatrix::from_fn(keep.len(), keep.len(), |r, c| {
                    b.matrix[(keep[r], keep[c])]
                }),
            });
        }
        Kinship {
            n: idx.len(),
            blocks,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_round_trip_through_blocks() {
        let phi = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, 0.5, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.5, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 1.0,
            ],
        );
        let k = Kinship::from_dense(&phi).unwrap();
        assert_eq!(k.blocks().len(), 3);
        assert_eq!(k.to_dense(), phi);
        assert!(!k.is_identity());
    }

    #[test]
    fn rejects_bad_diagonal() {
        let phi = DMatrix::from_row_slice(2, 2, &[0.9, 0.0, 0.0, 1.0]);
        assert!(Kinship::from_dense(&phi).is_err());
    }

    #[test]
    fn subset_keeps_relations() {
        let block = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let k = Kinship::repeated(&block, 3).unwrap();
        let s = k.subset(&[1, 2, 3]);
        let d = s.to_dense();
        assert_eq!(d[(0, 0)], 1.0);
        assert_eq!(d[(1, 2)], 0.5);
        assert_eq!(d[(0, 1)], 0.0);
    }
}
