use gk_core::assoc::Family;
use gk_core::rng::rng_from_seed;
use gk_core::sim::pedigree::{gene_drop, sample_family, sample_unrelated_genotypes};
use gk_core::sim::{
    parse_scenario, pedigree_kinship, run_experiment, simulate_phenotypes, ExperimentSetup, HaplotypePool,
    Method, PhenotypeModel, Relatedness, Scenario, Scheme, SyntheticPoolSpec, FAMILY_SIZE,
};
use gk_core::GkError;

/// Independent sites at common frequencies.
fn flat_pool(sites: usize, seed: u64) -> HaplotypePool {
    HaplotypePool::synthetic(&SyntheticPoolSpec {
        n_haps: 10_000,
        n_sites: sites,
        rho: 0.0,
        min_freq: 0.2,
        max_freq: 0.5,
        seed,
    })
    .unwrap()
}

fn pool_freq(pool: &HaplotypePool) -> Vec<f64> {
    (0..pool.n_sites())
        .map(|j| (0..pool.n_haps()).map(|h| pool.allele(h, j) as f64).sum::<f64>() / pool.n_haps() as f64)
        .collect()
}

#[test]
fn gene_drop_reproduces_the_pedigree_kinship() {
    let pool = flat_pool(40, 3);
    let f = pool_freq(&pool);
    let families = 10_000;
    let mut rng = rng_from_seed(30);
    let mut acc = [[0.0; FAMILY_SIZE]; FAMILY_SIZE];
    for _ in 0..families {
        let fam = sample_family(&pool, &mut rng);
        for (j, &fj) in f.iter().enumerate() {
            let sd = (2.0 * fj * (1.0 - fj)).sqrt();
            let g: Vec<f64> = fam
                .iter()
                .map(|ind| (pool.allele(ind[0], j) + pool.allele(ind[1], j)) as f64 - 2.0 * fj)
                .map(|v| v / sd)
                .collect();
            for a in 0..FAMILY_SIZE {
                for b in 0..FAMILY_SIZE {
                    acc[a][b] += g[a] * g[b];
                }
            }
        }
    }
    let k = pedigree_kinship();
    let count = (families * f.len()) as f64;
    for a in 0..FAMILY_SIZE {
        for b in 0..FAMILY_SIZE {
            let emp = acc[a][b] / count;
            let want = k[(a, b)];
            if want > 0.0 {
                assert!(((emp - want) / want).abs() < 0.05, "({a},{b}): {emp} vs {want}");
            } else {
                assert!(emp.abs() < 0.01, "({a},{b}): {emp}");
            }
        }
    }
}

#[test]
fn each_parental_haplotype_is_transmitted_half_the_time() {
    let mut rng = rng_from_seed(31);
    let (a, b) = ([0, 1], [2, 3]);
    let n = 10_000;
    let mut first = [0usize; 2];
    for _ in 0..n {
        let c = gene_drop(&a, &b, &mut rng);
        first[0] += usize::from(c[0] == 0);
        first[1] += usize::from(c[1] == 2);
    }
    for k in first {
        assert!((k as f64 / n as f64 - 0.5).abs() < 0.02);
    }
}

#[test]
fn sampled_genotypes_keep_pool_frequencies() {
    let pool = flat_pool(20, 4);
    let f = pool_freq(&pool);
    let g = sample_unrelated_genotypes(&pool, 10_000, &mut rng_from_seed(32));
    for (j, &fj) in f.iter().enumerate() {
        let est = g.column(j).mean() / 2.0;
        assert!((est - fj).abs() < 0.02, "site {j}: {est} vs {fj}");
    }
}

fn genetic_variance(g: &nalgebra::DMatrix<f64>, causal: &[usize], beta: &[f64]) -> f64 {
    let n = g.nrows();
    let lp: Vec<f64> = (0..n)
        .map(|i| causal.iter().zip(beta).map(|(&j, b)| b * g[(i, j)]).sum())
        .collect();
    let m = lp.iter().sum::<f64>() / n as f64;
    lp.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64
}

#[test]
fn effect_sizes_hit_the_variance_budget() {
    let pool = flat_pool(60, 5);
    let mut rng = rng_from_seed(33);
    let g = sample_unrelated_genotypes(&pool, 10_000, &mut rng);
    let model = PhenotypeModel::new(Family::Gaussian, 0.0);
    let mut total = 0.0;
    let reps = 20;
    for _ in 0..reps {
        let ph = simulate_phenotypes(&g, None, &model, &mut rng).unwrap();
        assert_eq!(ph.causal.len(), 10);
        assert_eq!(ph.beta.iter().filter(|b| **b < 0.0).count(), 5);
        // per-variant contributions sum to the budget exactly
        let diag: f64 = ph
            .causal
            .iter()
            .zip(&ph.beta)
            .map(|(&j, b)| b * b * genetic_variance(&g, &[j], &[1.0]))
            .sum();
        assert!((diag - 1.0).abs() < 1e-9);
        total += genetic_variance(&g, &ph.causal, &ph.beta);
    }
    let mean = total / reps as f64;
    assert!((mean - 1.0).abs() < 0.1, "Var(Gβ) {mean}");
}

#[test]
fn binary_prevalence_is_calibrated() {
    let pool = flat_pool(60, 6);
    let mut rng = rng_from_seed(34);
    let g = sample_unrelated_genotypes(&pool, 10_000, &mut rng);
    let model = PhenotypeModel::new(Family::Binomial, 0.0);
    for _ in 0..5 {
        let ph = simulate_phenotypes(&g, None, &model, &mut rng).unwrap();
        let prev = ph.y.mean();
        assert!((prev - 0.10).abs() < 0.01, "prevalence {prev}");
    }
}

fn binary_pedigree(scheme: Scheme) -> Scenario {
    Scenario {
        phenotype: Family::Binomial,
        relatedness: Relatedness::Pedigree,
        theta: 4.0,
        scheme,
        replicates: 1,
        ..Scenario::default()
    }
}

#[test]
fn schemes_order_the_phenotypic_relatedness() {
    let mut k = Vec::new();
    for scheme in [Scheme::A, Scheme::B, Scheme::C] {
        let setup = ExperimentSetup::new(&binary_pedigree(scheme)).unwrap();
        let mut sum = 0.0;
        let reps = 5;
        for r in 0..reps {
            let sim = setup.simulate_cohort(r).unwrap();
            assert_eq!(sim.cohort.n(), 2000);
            let cases = sim.cohort.y.iter().filter(|&&v| v == 1.0).count();
            // B samples whole families, so only A and C balance exactly
            if scheme != Scheme::B {
                assert_eq!(cases, 1000);
            }
            if scheme == Scheme::C {
                let case_fams: std::collections::BTreeSet<usize> = (0..sim.family.len())
                    .filter(|&i| sim.cohort.y[i] == 1.0)
                    .map(|i| sim.family[i])
                    .collect();
                for i in 0..sim.family.len() {
                    if sim.cohort.y[i] == 0.0 {
                        assert!(!case_fams.contains(&sim.family[i]));
                    }
                }
            }
            sum += sim.relatedness_k.unwrap();
        }
        k.push(sum / reps as f64);
    }
    assert!(k[0] < k[1] && k[1] <= k[2], "K = {k:?}");
    assert!(k[2] >= 0.95);
}

#[test]
fn cohorts_are_reproducible() {
    let sc = Scenario {
        phenotype: Family::Gaussian,
        relatedness: Relatedness::Pedigree,
        theta: 4.0,
        n: 500,
        replicates: 2,
        ..Scenario::default()
    };
    let setup = ExperimentSetup::new(&sc).unwrap();
    let a = setup.simulate_cohort(1).unwrap();
    let b = setup.simulate_cohort(1).unwrap();
    assert_eq!(a.cohort.y, b.cohort.y);
    assert_eq!(a.cohort.g, b.cohort.g);
    assert_eq!(a.causal, b.causal);
    assert_ne!(setup.simulate_cohort(0).unwrap().cohort.y, a.cohort.y);

    let r1 = run_experiment(&sc).unwrap();
    let r2 = run_experiment(&sc).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(r1.rows.len(), Method::PRIMARY.len() * sc.fdr_targets.len());
    for m in Method::PRIMARY {
        for &q in &sc.fdr_targets {
            let row = r1.row(m, q).unwrap();
            assert!((0.0..=1.0).contains(&row.fdr) && (0.0..=1.0).contains(&row.power));
        }
    }
}

#[test]
fn scenario_files() {
    let sc = parse_scenario("# pedigree run\nphenotype = binomial\nrelatedness = pedigree\nscheme = C\ntheta = 4\n").unwrap();
    assert_eq!(sc.scheme, Scheme::C);
    assert_eq!(sc.theta, 4.0);
    match parse_scenario("bogus = 1") {
        Err(GkError::Config { key, .. }) => assert_eq!(key, "bogus"),
        other => panic!("{other:?}"),
    }
    assert!(parse_scenario("n = many").is_err());
    let bad = Scenario {
        scheme: Scheme::A,
        ..Scenario::default()
    };
    assert!(ExperimentSetup::new(&bad).is_err());
}
