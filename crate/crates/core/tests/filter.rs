use gk_core::filter::{feature_stats, knockoff_threshold, q_values, FeatureStats};
use proptest::prelude::*;

fn stats(kappa: Vec<usize>, tau: Vec<f64>, copies: usize) -> FeatureStats {
    let w = kappa
        .iter()
        .zip(&tau)
        .map(|(&k, &t)| if k == 0 { t } else { 0.0 })
        .collect();
    FeatureStats { copies, kappa, tau, w }
}

/// Ratio at `t` by direct counting.
fn ratio(s: &FeatureStats, t: f64) -> f64 {
    let m = s.copies as f64;
    let knock = (0..s.len()).filter(|&j| s.kappa[j] >= 1 && s.tau[j] >= t).count() as f64;
    let orig = (0..s.len()).filter(|&j| s.kappa[j] == 0 && s.tau[j] >= t).count() as f64;
    (1.0 + knock) / (m * orig.max(1.0))
}

fn brute_threshold(s: &FeatureStats, q: f64) -> f64 {
    let mut cands: Vec<f64> = s.tau.iter().copied().filter(|&t| t > 0.0).collect();
    cands.sort_by(f64::total_cmp);
    cands.into_iter().find(|&t| ratio(s, t) <= q).unwrap_or(f64::INFINITY)
}

#[test]
fn worked_threshold_examples() {
    let s = stats(vec![0, 0, 0, 1], vec![10.0, 9.0, 8.0, 7.0], 5);
    let r = knockoff_threshold(&s, 0.2).unwrap();
    // t = 7 has ratio (0.2 + 0.2) / 3 = 0.133 as well, so it is the minimum
    assert_eq!(r.threshold, brute_threshold(&s, 0.2));
    assert_eq!(r.selected.iter().copied().collect::<Vec<_>>(), vec![0, 1, 2]);

    let one = stats(vec![0], vec![10.0], 5);
    let r = knockoff_threshold(&one, 0.1).unwrap();
    assert!(r.selected.is_empty());
    assert_eq!(r.threshold, f64::INFINITY);
    assert!((q_values(&one)[0] - 0.2).abs() < 1e-15);

    let zero = stats(vec![0, 0], vec![0.0, 0.0], 5);
    assert!(knockoff_threshold(&zero, 0.5).unwrap().selected.is_empty());
}

#[test]
fn tie_goes_to_the_original() {
    let s = feature_stats(&[2.0], &[vec![2.0], vec![1.0]]).unwrap();
    assert_eq!(s.kappa, vec![0]);
    assert!((s.tau[0] - 3.0).abs() < 1e-12);
}

#[test]
fn knockoff_winner_is_never_selectable() {
    let s = stats(vec![0, 2, 0], vec![5.0, 50.0, 4.0], 5);
    let q = q_values(&s);
    assert_eq!(q[1], 1.0);
}

fn instance() -> impl Strategy<Value = (FeatureStats, f64)> {
    (1usize..=50, 1usize..=6).prop_flat_map(|(p, m)| {
        (
            prop::collection::vec(0usize..=m, p),
            // coarse values so ties between tau occur
            prop::collection::vec(0u32..40, p),
            0.01f64..0.6,
        )
            .prop_map(move |(kappa, tau, q)| {
                let tau = tau.into_iter().map(|t| t as f64 * 0.5).collect();
                (stats(kappa, tau, m), q)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn threshold_matches_brute_force((s, q) in instance()) {
        let r = knockoff_threshold(&s, q).unwrap();
        let t = brute_threshold(&s, q);
        prop_assert_eq!(r.threshold, t);
        let expect: Vec<usize> = (0..s.len()).filter(|&j| s.kappa[j] == 0 && s.tau[j] >= t && t.is_finite()).collect();
        prop_assert_eq!(r.selected.iter().copied().collect::<Vec<_>>(), expect);
    }

    #[test]
    fn q_values_are_selection_levels((s, _) in instance()) {
        let q = q_values(&s);
        for j in 0..s.len() {
            if q[j] < 1.0 {
                let r = knockoff_threshold(&s, q[j] * (1.0 + 1e-12)).unwrap();
                prop_assert!(r.selected.contains(&j));
                if q[j] > 1e-6 {
                    let below = knockoff_threshold(&s, q[j] * (1.0 - 1e-9)).unwrap();
                    prop_assert!(!below.selected.contains(&j));
                }
            }
            for k in 0..s.len() {
                if s.kappa[j] == 0 && s.kappa[k] == 0 && s.tau[j] >= s.tau[k] {
                    prop_assert!(q[j] <= q[k]);
                }
            }
        }
    }

    #[test]
    fn selection_is_scale_invariant(
        z in prop::collection::vec(-6.0f64..6.0, 1..30),
        seed in any::<u64>(),
        scale in 0.1f64..10.0,
        q in 0.05f64..0.5,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let ko: Vec<Vec<f64>> = (0..5).map(|_| z.iter().map(|_| rng.random_range(-4.0..4.0)).collect()).collect();
        let a = feature_stats(&z, &ko).unwrap();
        let zs: Vec<f64> = z.iter().map(|v| v * scale).collect();
        let kos: Vec<Vec<f64>> = ko.iter().map(|c| c.iter().map(|v| v * scale).collect()).collect();
        let b = feature_stats(&zs, &kos).unwrap();
        prop_assert_eq!(&a.kappa, &b.kappa);
        let ra = knockoff_threshold(&a, q).unwrap();
        let rb = knockoff_threshold(&b, q).unwrap();
        prop_assert_eq!(ra.selected, rb.selected);
    }

    #[test]
    fn w_positive_iff_original_wins(z in prop::collection::vec(-6.0f64..6.0, 1..20), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let ko: Vec<Vec<f64>> = (0..4).map(|_| z.iter().map(|_| rng.random_range(-4.0..4.0)).collect()).collect();
        let s = feature_stats(&z, &ko).unwrap();
        for j in 0..s.len() {
            prop_assert_eq!(s.w[j] > 0.0, s.kappa[j] == 0 && s.tau[j] > 0.0);
            if s.kappa[j] != 0 {
                prop_assert_eq!(s.w[j], 0.0);
            }
        }
    }
}
