use gk_core::assoc::{
    lrt_test, mixed_model_null_fit, naive_null_fit, p_to_z, score_test, wald_test, z_to_p, Cohort,
    Family, FixedEffectModel, Kinship, NullModel, VarianceComponent,
};
use gk_core::rng::rng_from_seed;
use gk_core::GkError;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

fn design(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let mut x = DMatrix::from_element(n, 2, 1.0);
    for i in 0..n {
        x[(i, 1)] = rng.sample(StandardNormal);
    }
    x
}

fn genotypes(n: usize, p: usize, maf: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| {
        (u8::from(rng.random::<f64>() < maf) + u8::from(rng.random::<f64>() < maf)) as f64
    })
}

/// Plain OLS score statistic with covariates `x`.
fn ols_score_z(y: &DVector<f64>, x: &DMatrix<f64>, g: &DVector<f64>) -> f64 {
    let xtx = (x.transpose() * x).try_inverse().unwrap();
    let h = x * xtx * x.transpose();
    let m = DMatrix::identity(y.len(), y.len()) - h;
    let r = &m * y;
    let sigma2 = r.norm_squared() / (y.len() - x.ncols()) as f64;
    let mg = &m * g;
    g.dot(&r) / (sigma2 * g.dot(&mg)).sqrt()
}

fn gaussian_cohort(n: usize, p: usize, seed: u64) -> Cohort {
    let mut rng = rng_from_seed(seed);
    let x = design(n, &mut rng);
    let g = genotypes(n, p, 0.3, &mut rng);
    let y = DVector::from_fn(n, |i, _| 0.5 + x[(i, 1)] + 0.1 * g[(i, 0)] + 2.0 * rng.sample::<f64, _>(StandardNormal));
    Cohort::new(y, x, g, None).unwrap()
}

#[test]
fn textbook_intercept_only_score() {
    let mut rng = rng_from_seed(1);
    let n = 300;
    let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let g = genotypes(n, 1, 0.25, &mut rng).column(0).into_owned();
    let x = DMatrix::from_element(n, 1, 1.0);
    let cohort = Cohort::new(y.clone(), x.clone(), DMatrix::from_column_slice(n, 1, g.as_slice()), None).unwrap();
    let null = naive_null_fit(&cohort, Family::Gaussian).unwrap();
    let r = score_test(&null, &g).unwrap();
    let ybar = y.mean();
    let gbar = g.mean();
    let s2 = y.iter().map(|v| (v - ybar).powi(2)).sum::<f64>() / (n - 1) as f64;
    let num: f64 = g.iter().zip(y.iter()).map(|(a, b)| a * (b - ybar)).sum();
    let den = (s2 * g.iter().map(|a| (a - gbar).powi(2)).sum::<f64>()).sqrt();
    assert!((r.z - num / den).abs() < 1e-6);
    assert!((r.z - r.t_stat / r.var_t.sqrt()).abs() < 1e-12);
    assert!((r.p - z_to_p(r.z)).abs() < 1e-15);
}

#[test]
fn theta_zero_projection_is_scaled_annihilator() {
    let c = gaussian_cohort(80, 1, 2);
    let null = NullModel::fit(&c.y, &c.x, &Kinship::identity(80), Family::Gaussian, VarianceComponent::Fixed(0.0)).unwrap();
    let xtx = (c.x.transpose() * &c.x).try_inverse().unwrap();
    let m = DMatrix::identity(80, 80) - &c.x * xtx * c.x.transpose();
    let expect = m / null.phi;
    assert!((null.psi() - expect).amax() < 1e-10);
}

#[test]
fn mixed_identity_kinship_equals_plain_score() {
    for seed in 0..20 {
        let c = gaussian_cohort(500, 3, 100 + seed);
        let mixed = mixed_model_null_fit(&c, Family::Gaussian).unwrap();
        for j in 0..3 {
            let g = c.genotype(j);
            let z = score_test(&mixed, &g).unwrap().z;
            assert!((z - ols_score_z(&c.y, &c.x, &g)).abs() < 1e-6);
        }
    }
}

#[test]
fn gaussian_score_wald_lrt_agree() {
    let c = gaussian_cohort(400, 5, 3);
    let null = naive_null_fit(&c, Family::Gaussian).unwrap();
    for j in 0..5 {
        let g = c.genotype(j);
        let s = score_test(&null, &g).unwrap().z;
        let w = wald_test(&c, &g, Family::Gaussian).unwrap().z;
        let l = lrt_test(&c, &g, Family::Gaussian).unwrap().z;
        assert!((s - w).abs() < 1e-6 && (s - l).abs() < 1e-6, "{s} {w} {l}");
    }
}

#[test]
fn constant_genotype_is_degenerate() {
    let c = gaussian_cohort(50, 1, 4);
    let g = DVector::from_element(50, 1.0);
    let null = naive_null_fit(&c, Family::Gaussian).unwrap();
    assert!(matches!(score_test(&null, &g), Err(GkError::DegenerateVariant(_))));
    assert!(matches!(wald_test(&c, &g, Family::Gaussian), Err(GkError::DegenerateVariant(_))));
    assert!(matches!(lrt_test(&c, &g, Family::Gaussian), Err(GkError::DegenerateVariant(_))));
}

#[test]
fn wald_and_lrt_refuse_related_cohorts() {
    let mut c = gaussian_cohort(20, 1, 5);
    let block = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    c.kinship = Some(Kinship::repeated(&block, 10).unwrap());
    let g = c.genotype(0);
    assert!(wald_test(&c, &g, Family::Gaussian).is_err());
}

#[test]
fn logistic_intercept_null_is_the_mean() {
    let y = DVector::from_fn(40, |i, _| if i % 4 == 0 { 1.0 } else { 0.0 });
    let x = DMatrix::from_element(40, 1, 1.0);
    let null = NullModel::fit(&y, &x, &Kinship::identity(40), Family::Binomial, VarianceComponent::Fixed(0.0)).unwrap();
    assert!(null.mu.iter().all(|m| (m - 0.25).abs() < 1e-10));
}

#[test]
fn permuted_phenotypes_have_nominal_type_one_error() {
    let c = gaussian_cohort(300, 1, 6);
    let g = c.genotype(0);
    let mut rng = rng_from_seed(60);
    let mut y: Vec<f64> = c.y.iter().copied().collect();
    let x = DMatrix::from_element(300, 1, 1.0);
    let mut rejections = 0;
    let perms = 2000;
    for _ in 0..perms {
        y.shuffle(&mut rng);
        let yv = DVector::from_column_slice(&y);
        let null = NullModel::fit(&yv, &x, &Kinship::identity(300), Family::Gaussian, VarianceComponent::Fixed(0.0)).unwrap();
        if score_test(&null, &g).unwrap().p < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / perms as f64;
    assert!((rate - 0.05).abs() <= 0.01, "type-I error {rate}");
}

/// Kolmogorov–Smirnov p-value of a uniform(0, 1) sample.
fn ks_uniform_p(mut u: Vec<f64>) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let d = u
        .iter()
        .enumerate()
        .map(|(i, &v)| (v - i as f64 / n).max((i + 1) as f64 / n - v))
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..200 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    p.clamp(0.0, 1.0)
}

#[test]
fn binomial_null_p_values_are_uniform() {
    let mut rng = rng_from_seed(7);
    let n = 2000;
    let (mut ps, mut pw, mut pl) = (vec![], vec![], vec![]);
    for _ in 0..500 {
        let x = design(n, &mut rng);
        let g = genotypes(n, 1, 0.3, &mut rng).column(0).into_owned();
        let y = DVector::from_fn(n, |i, _| {
            let eta = -1.0 + 0.5 * x[(i, 1)];
            f64::from(rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp()))
        });
        let null = NullModel::fit(&y, &x, &Kinship::identity(n), Family::Binomial, VarianceComponent::Fixed(0.0)).unwrap();
        ps.push(score_test(&null, &g).unwrap().p);
        let fe = FixedEffectModel::fit(&y, &x, Family::Binomial).unwrap();
        pw.push(fe.wald(&g).unwrap().p);
        pl.push(fe.lrt(&g).unwrap().p);
    }
    for (name, p) in [("score", ps), ("wald", pw), ("lrt", pl)] {
        let ks = ks_uniform_p(p);
        assert!(ks > 0.01, "{name}: KS p {ks}");
    }
}

#[test]
fn p_to_z_examples() {
    assert!((p_to_z(0.05, 1).unwrap().z - 1.959_963_984_540_054).abs() < 1e-9);
    assert_eq!(p_to_z(1.0, -1).unwrap().z, 0.0);
    let c = p_to_z(0.0, -1).unwrap();
    assert!(c.clamped);
    assert!((c.z + p_to_z(1e-300, 1).unwrap().z).abs() < 1e-12);
    assert!(p_to_z(1.5, 1).is_err());
    assert!(p_to_z(-0.1, 1).is_err());
}

proptest! {
    #[test]
    fn p_z_round_trip(log_p in -10.0f64..0.0, sign in prop::bool::ANY) {
        let p = 10f64.powf(log_p);
        let s = if sign { 1 } else { -1 };
        let z = p_to_z(p, s).unwrap().z;
        prop_assert!(z == 0.0 || z.signum() == s as f64);
        let back = z_to_p(z);
        prop_assert!(((back - p) / p).abs() < 1e-12, "p {} back {}", p, back);
    }
}
