use std::collections::BTreeSet;

use gk_core::ld_panel::{cluster_variants, expand_selection, LdFormat, LdPanel};
use gk_core::linalg::min_eigenvalue;
use gk_core::{VariantId, ZVector};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn ids(p: usize) -> Vec<VariantId> {
    (0..p)
        .map(|i| VariantId::new(1, 100 + i as u64, "A", "G").unwrap())
        .collect()
}

/// Random correlation matrix from a random factor: `B Bᵀ` rescaled.
fn correlation(p: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, p * (p + 1)).prop_map(move |v| {
        let b = DMatrix::from_vec(p, p + 1, v);
        let mut c = &b * b.transpose();
        for i in 0..p {
            c[(i, i)] += 1e-3;
        }
        let d: Vec<f64> = (0..p).map(|i| c[(i, i)].sqrt()).collect();
        let mut out = DMatrix::from_fn(p, p, |i, j| c[(i, j)] / (d[i] * d[j]));
        for i in 0..p {
            out[(i, i)] = 1.0;
        }
        out
    })
}

/// Naive agglomerative single linkage: repeatedly merge the two closest
/// clusters while their distance is at most `1 - cutoff`.
fn agglomerative(sigma: &DMatrix<f64>, cutoff: f64) -> Vec<BTreeSet<usize>> {
    let p = sigma.nrows();
    let mut clusters: Vec<BTreeSet<usize>> = (0..p).map(|i| BTreeSet::from([i])).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let d = clusters[a]
                    .iter()
                    .flat_map(|&i| clusters[b].iter().map(move |&j| 1.0 - sigma[(i, j)].abs()))
                    .fold(f64::INFINITY, f64::min);
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        match best {
            Some((d, a, b)) if d <= 1.0 - cutoff + 1e-15 => {
                let moved = clusters.remove(b);
                clusters[a].extend(moved);
            }
            _ => break,
        }
    }
    clusters
}

fn partition(panel: &LdPanel, cutoff: f64) -> BTreeSet<BTreeSet<usize>> {
    let c = cluster_variants(panel, cutoff);
    (0..c.n_clusters())
        .map(|k| c.members(k).iter().copied().collect())
        .collect()
}

#[test]
fn spec_examples() {
    let identity = LdPanel::new(ids(3), DMatrix::identity(3, 3)).unwrap();
    let c = cluster_variants(&identity, 0.75);
    assert_eq!(c.n_clusters(), 3);
    assert!((0..3).all(|i| c.is_representative(i)));

    let pair = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, 0.1, 0.9, 1.0, 0.1, 0.1, 0.1, 1.0]);
    let panel = LdPanel::new(ids(3), pair).unwrap();
    let expected: BTreeSet<BTreeSet<usize>> = [BTreeSet::from([0, 1]), BTreeSet::from([2])].into();
    assert_eq!(partition(&panel, 0.75), expected);

    let chain = DMatrix::from_row_slice(3, 3, &[1.0, 0.8, 0.1, 0.8, 1.0, 0.8, 0.1, 0.8, 1.0]);
    let panel = LdPanel::new(ids(3), chain).unwrap();
    let c = cluster_variants(&panel, 0.75);
    assert_eq!(c.n_clusters(), 1);
    assert_eq!(c.representative(0), 1);
}

#[test]
fn regularize_examples() {
    let ones = LdPanel::new(ids(2), DMatrix::from_element(2, 2, 1.0)).unwrap();
    let r = ones.regularize(0.1);
    assert!((r.sigma()[(0, 1)] - 0.9).abs() < 1e-15);
    assert!((min_eigenvalue(r.sigma()) - 0.1).abs() < 1e-12);
    let half = LdPanel::new(ids(2), DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])).unwrap();
    assert_eq!(half.regularize(0.0), half);
}

#[test]
fn text_and_binary_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    let panel = LdPanel::new(ids(2), sigma).unwrap();
    for (name, fmt) in [("a.txt", LdFormat::DenseText), ("a.bin", LdFormat::DenseBinary)] {
        let path = dir.path().join(name);
        panel.save(&path, fmt).unwrap();
        let back = LdPanel::load(&path, fmt).unwrap();
        assert_eq!(back, panel);
    }
    let missing = dir.path().join("nope.txt");
    assert!(LdPanel::load(&missing, LdFormat::DenseText).is_err());
}

#[test]
fn expansion_examples() {
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]);
    let panel = LdPanel::new(ids(2), sigma).unwrap();
    let clusters = cluster_variants(&panel, 0.75);
    let rep = clusters.representative(0);
    let other = 1 - rep;
    let v = panel.variants();
    let reps = BTreeSet::from([v[rep].clone()]);
    let mut z = vec![0.0; 2];
    z[rep] = 5.0;
    z[other] = 6.0;
    let out = expand_selection(&clusters, &panel, &reps, &ZVector::new(v.to_vec(), z.clone()).unwrap()).unwrap();
    assert_eq!(out.len(), 2);
    z[other] = 4.0;
    let out = expand_selection(&clusters, &panel, &reps, &ZVector::new(v.to_vec(), z).unwrap()).unwrap();
    assert_eq!(out, reps);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn regularized_panels_are_psd(sigma in correlation(6), eps in 1e-3f64..0.5) {
        let panel = LdPanel::new(ids(6), sigma).unwrap().regularize(eps);
        let s = panel.sigma();
        prop_assert!(min_eigenvalue(s) >= -1e-10);
        prop_assert!((0..6).all(|i| s[(i, i)] == 1.0));
        prop_assert!((s - s.transpose()).amax() < 1e-15);
    }

    #[test]
    fn single_linkage_matches_agglomeration(sigma in correlation(6), cutoff in 0.2f64..0.95) {
        let panel = LdPanel::new(ids(6), sigma.clone()).unwrap();
        let oracle: BTreeSet<BTreeSet<usize>> = agglomerative(&sigma, cutoff).into_iter().collect();
        prop_assert_eq!(partition(&panel, cutoff), oracle);
    }

    #[test]
    fn clustering_ignores_input_order(sigma in correlation(6), perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let panel = LdPanel::new(ids(6), sigma).unwrap();
        let shuffled = panel.subset(&perm);
        let a = cluster_variants(&panel, 0.5);
        let b = cluster_variants(&shuffled, 0.5);
        let groups = |c: &gk_core::ld_panel::ClusterAssignment, v: &[VariantId]| -> BTreeSet<(BTreeSet<VariantId>, VariantId)> {
            (0..c.n_clusters())
                .map(|k| (c.members(k).iter().map(|&i| v[i].clone()).collect(), v[c.representative(k)].clone()))
                .collect()
        };
        prop_assert_eq!(groups(&a, panel.variants()), groups(&b, shuffled.variants()));
    }

    #[test]
    fn expansion_keeps_representatives(sigma in correlation(6), z in prop::collection::vec(-5.0f64..5.0, 6)) {
        let panel = LdPanel::new(ids(6), sigma).unwrap();
        let c = cluster_variants(&panel, 0.5);
        let reps: BTreeSet<VariantId> = c.representatives().iter().map(|&i| panel.variants()[i].clone()).collect();
        let out = expand_selection(&c, &panel, &reps, &ZVector::new(ids(6), z).unwrap()).unwrap();
        prop_assert!(reps.is_subset(&out));
    }
}
