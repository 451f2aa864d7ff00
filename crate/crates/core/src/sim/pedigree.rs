use nalgebra::DMatrix;
use rand::Rng;

use super::haplotypes::HaplotypePool;
use crate::assoc::Kinship;

pub const FAMILY_SIZE: usize = 10;

/// Kinship of the three-generation pedigree. Members in order: two
/// grandparents, their two children, the two married-in spouses, the two
/// children of member 3 and member 5, the two children of member 4 and
/// member 6.
#[rustfmt::skip]
pub const PEDIGREE_KINSHIP: [[f64; FAMILY_SIZE]; FAMILY_SIZE] = [
    [1.0,  0.0,  0.5,  0.5,  0.0, 0.0, 0.25,  0.25,  0.25,  0.25 ],
    [0.0,  1.0,  0.5,  0.5,  0.0, 0.0, 0.25,  0.25,  0.25,  0.25 ],
    [0.5,  0.5,  1.0,  0.5,  0.0, 0.0, 0.5,   0.5,   0.25,  0.25 ],
    [0.5,  0.5,  0.5,  1.0,  0.0, 0.0, 0.25,  0.25,  0.5,   0.5  ],
    [0.0,  0.0,  0.0,  0.0,  1.0, 0.0, 0.5,   0.5,   0.0,   0.0  ],
    [0.0,  0.0,  0.0,  0.0,  0.0, 1.0, 0.0,   0.0,   0.5,   0.5  ],
    [0.25, 0.25, 0.5,  0.25, 0.5, 0.0, 1.0,   0.5,   0.125, 0.125],
    [0.25, 0.25, 0.5,  0.25, 0.5, 0.0, 0.5,   1.0,   0.125, 0.125],
    [0.25, 0.25, 0.25, 0.5,  0.0, 0.5, 0.125, 0.125, 1.0,   0.5  ],
    [0.25, 0.25, 0.25, 0.5,  0.0, 0.5, 0.125, 0.125, 0.5,   1.0  ],
];

pub fn pedigree_kinship() -> DMatrix<f64> {
    DMatrix::from_fn(FAMILY_SIZE, FAMILY_SIZE, |i, j| PEDIGREE_KINSHIP[i][j])
}

/// An individual as the pool indices of its two haplotypes.
pub type Individual = [usize; 2];

pub fn random_founder<R: Rng + ?Sized>(pool: &HaplotypePool, rng: &mut R) -> Individual {
    let h = pool.n_haps();
    [rng.random_range(0..h), rng.random_range(0..h)]
}

/// Child receiving one intact haplotype from each parent, each chosen with
/// probability 1/2.
pub fn gene_drop<R: Rng + ?Sized>(a: &Individual, b: &Individual, rng: &mut R) -> Individual {
    [a[rng.random_range(0..2)], b[rng.random_range(0..2)]]
}

pub fn genotype(pool: &HaplotypePool, ind: &Individual, site: usize) -> f64 {
    (pool.allele(ind[0], site) + pool.allele(ind[1], site)) as f64
}

/// `n × p` dosage matrix for the given individuals.
pub fn genotype_matrix(pool: &HaplotypePool, people: &[Individual]) -> DMatrix<f64> {
    let p = pool.n_sites();
    let mut g = DMatrix::zeros(people.len(), p);
    for (i, ind) in people.iter().enumerate() {
        let (h1, h2) = (pool.haplotype(ind[0]), pool.haplotype(ind[1]));
        for j in 0..p {
            g[(i, j)] = (h1[j] + h2[j]) as f64;
        }
    }
    g
}

pub fn sample_unrelated<R: Rng + ?Sized>(pool: &HaplotypePool, n: usize, rng: &mut R) -> Vec<Individual> {
    (0..n).map(|_| random_founder(pool, rng)).collect()
}

pub fn sample_unrelated_genotypes<R: Rng + ?Sized>(
    pool: &HaplotypePool,
    n: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    genotype_matrix(pool, &sample_unrelated(pool, n, rng))
}

/// One family in kinship order.
pub fn sample_family<R: Rng + ?Sized>(pool: &HaplotypePool, rng: &mut R) -> [Individual; FAMILY_SIZE] {
    let g1 = random_founder(pool, rng);
    let g2 = random_founder(pool, rng);
    let p3 = gene_drop(&g1, &g2, rng);
    let p4 = gene_drop(&g1, &g2, rng);
    let s5 = random_founder(pool, rng);
    let s6 = random_founder(pool, rng);
    let c7 = gene_drop(&p3, &s5, rng);
    let c8 = gene_drop(&p3, &s5, rng);
    let c9 = gene_drop(&p4, &s6, rng);
    let c10 = gene_drop(&p4, &s6, rng);
    [g1, g2, p3, p4, s5, s6, c7, c8, c9, c10]
}

#[derive(Debug, Clone)]
pub struct PedigreeCohort {
    pub people: Vec<Individual>,
    pub family: Vec<usize>,
    pub kinship: Kinship,
}

impl PedigreeCohort {
    pub fn genotypes(&self, pool: &HaplotypePool) -> DMatrix<f64> {
        genotype_matrix(pool, &self.people)
    }
}

pub fn build_pedigree_cohort<R: Rng + ?Sized>(
    pool: &HaplotypePool,
    n_families: usize,
    rng: &mut R,
) -> PedigreeCohort {
    let mut people = Vec::with_capacity(n_families * FAMILY_SIZE);
    let mut family = Vec::with_capacity(n_families * FAMILY_SIZE);
    for f in 0..n_families {
        people.extend(sample_family(pool, rng));
        family.extend(std::iter::repeat_n(f, FAMILY_SIZE));
    }
    let kinship =
        Kinship::repeated(&pedigree_kinship(), n_families).expect("pedigree kinship is valid");
    PedigreeCohort {
        people,
        family,
        kinship,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_eigenvalue;
    use crate::rng::rng_from_seed;
    use crate::variant::VariantId;

    fn pool(rows: Vec<Vec<u8>>) -> HaplotypePool {
        let p = rows[0].len();
        let ids = (0..p)
            .map(|j| VariantId::new(1, 1 + j as u64, "A", "T").unwrap())
            .collect();
        HaplotypePool::unfiltered(ids, rows).unwrap()
    }

    #[test]
    fn literal_is_symmetric_pd_with_unit_diagonal() {
        let k = pedigree_kinship();
        assert_eq!(k, k.transpose());
        assert!(k.diagonal().iter().all(|&d| d == 1.0));
        assert!(min_eigenvalue(&k) > 0.0);
        assert_eq!(k[(0, 2)], 0.5);
        assert_eq!(k[(6, 8)], 0.125);
        assert_eq!(k[(2, 3)], 0.5);
        assert_eq!(k[(0, 1)], 0.0);
    }

    #[test]
    fn degenerate_pools() {
        let mut rng = rng_from_seed(1);
        let zeros = pool(vec![vec![0, 0, 0]]);
        assert!(sample_unrelated_genotypes(&zeros, 5, &mut rng).iter().all(|&g| g == 0.0));
        let ones = pool(vec![vec![1, 1, 1]]);
        assert!(sample_unrelated_genotypes(&ones, 5, &mut rng).iter().all(|&g| g == 2.0));
    }

    #[test]
    fn homozygous_parents_fix_the_child() {
        let pl = pool(vec![vec![1, 0], vec![0, 1]]);
        let mut rng = rng_from_seed(2);
        for _ in 0..20 {
            let c = gene_drop(&[0, 0], &[1, 1], &mut rng);
            assert_eq!(genotype(&pl, &c, 0), 1.0);
            assert_eq!(genotype(&pl, &c, 1), 1.0);
        }
    }

    #[test]
    fn one_and_two_families() {
        let pl = pool(vec![vec![1, 0], vec![0, 1], vec![1, 1]]);
        let mut rng = rng_from_seed(3);
        let c1 = build_pedigree_cohort(&pl, 1, &mut rng);
        assert_eq!(c1.people.len(), 10);
        assert_eq!(c1.kinship.to_dense(), pedigree_kinship());
        let c2 = build_pedigree_cohort(&pl, 2, &mut rng);
        let d = c2.kinship.to_dense();
        assert_eq!(d.nrows(), 20);
        assert!(d.view((0, 10), (10, 10)).iter().all(|&v| v == 0.0));
    }
}
