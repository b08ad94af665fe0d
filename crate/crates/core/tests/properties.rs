use catoni_core::dist::{self, NoiseModel};
use catoni_core::influence::{lemma1_gap_bound, InfluenceSpec};
use catoni_core::mean::{catoni_g, solve_mean, solve_self_normalized, MeanConfig, Sample};
use catoni_core::regression::{
    feasibility, gram_stats, h_value, solve_regression, AlphaRule, GramStats, RegressionConfig, RegressionProblem,
};
use catoni_core::rng::RngStream;
use catoni_core::specialfn::{ecdf_sup_distance, normal_cdf, std_normal_quantile};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

const TOL: f64 = 1e-10;

fn builtin() -> impl Strategy<Value = InfluenceSpec> {
    prop_oneof![Just(InfluenceSpec::wide()), Just(InfluenceSpec::narrow())]
}

fn sample_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, 2..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn lemma1_increment_bound(x1 in -10.0..10.0f64, x2 in -10.0..10.0f64, phi in builtin()) {
        let gap = (phi.phi(x1) - phi.phi(x2) - (x1 - x2)).abs();
        prop_assert!(gap <= lemma1_gap_bound(x1, x2) + 1e-12);
    }

    #[test]
    fn builtins_are_odd(x in -60.0..60.0f64, phi in builtin()) {
        prop_assert_eq!(phi.phi(-x), -phi.phi(x));
    }

    #[test]
    fn derivative_matches_finite_difference(x in -20.0..20.0f64, phi in builtin()) {
        let narrow = phi.name == "narrow";
        prop_assume!(!narrow || ((x.abs() - 1.0).abs() > 1e-3));
        let h = 1e-6;
        let fd = (phi.phi(x + h) - phi.phi(x - h)) / (2.0 * h);
        let d = phi.dphi(x).unwrap();
        prop_assert!((fd - d).abs() <= 1e-6, "x={} fd={} d={}", x, fd, d);
        prop_assert!(d.abs() <= phi.k0 + 1e-12);
    }

    #[test]
    fn quantile_inverts_cdf(z in -6.0..6.0f64) {
        let p = normal_cdf(z);
        prop_assert!((std_normal_quantile(p).unwrap() - z).abs() <= 1e-7);
    }

    #[test]
    fn ks_invariant_under_increasing_maps(mut v in prop::collection::vec(-3.0..3.0f64, 1..50)) {
        v.sort_by(f64::total_cmp);
        let d0 = ecdf_sup_distance(&v, normal_cdf).unwrap();
        let w: Vec<f64> = v.iter().map(|x| x.exp()).collect();
        let d1 = ecdf_sup_distance(&w, |y: f64| normal_cdf(y.ln())).unwrap();
        prop_assert!((d0 - d1).abs() <= 1e-12);
    }

    #[test]
    fn g_is_nonincreasing(v in sample_strategy(), alpha in 0.01..3.0f64, phi in builtin(),
                          t1 in -60.0..60.0f64, dt in 0.0..10.0f64) {
        let s = Sample::new(v).unwrap();
        prop_assert!(catoni_g(&s, alpha, &phi, t1) >= catoni_g(&s, alpha, &phi, t1 + dt));
    }

    #[test]
    fn translation_equivariance(v in sample_strategy(), alpha in 0.01..2.0f64, c in -1e3..1e3f64, phi in builtin()) {
        let s = Sample::new(v).unwrap();
        let cfg = MeanConfig::with_alpha(alpha, phi, TOL);
        let a = solve_mean(&s, &cfg).unwrap();
        let b = solve_mean(&s.map(|x| x + c).unwrap(), &cfg).unwrap();
        let slack = 2.0 * TOL;
        prop_assert!((b.theta_hat - a.theta_hat - c).abs() <= slack, "{} vs {}", b.theta_hat, a.theta_hat + c);
    }

    #[test]
    fn scale_equivariance(v in sample_strategy(), alpha in 0.01..2.0f64, c in 0.1..10.0f64, phi in builtin()) {
        let s = Sample::new(v).unwrap();
        let a = solve_mean(&s, &MeanConfig::with_alpha(alpha, phi.clone(), TOL)).unwrap();
        let b = solve_mean(&s.map(|x| c * x).unwrap(), &MeanConfig::with_alpha(alpha / c, phi, c * TOL)).unwrap();
        prop_assert!((b.theta_hat - c * a.theta_hat).abs() <= 2.0 * c * TOL);
    }

    #[test]
    fn self_normalized_affine_equivariance(v in sample_strategy(), a in 0.1..10.0f64, b in -100.0..100.0f64,
                                           a_n in 0.01..1.0f64, phi in builtin()) {
        let s = Sample::new(v).unwrap();
        prop_assume!(s.sample_sd() > 1e-6);
        let x = solve_self_normalized(&s, &MeanConfig::self_normalized(Some(a_n), phi.clone(), TOL)).unwrap();
        let y = solve_self_normalized(&s.map(|t| a * t + b).unwrap(), &MeanConfig::self_normalized(Some(a_n), phi, a * TOL)).unwrap();
        let slack = 2.0 * a * TOL;
        prop_assert!((y.theta_hat - (a * x.theta_hat + b)).abs() <= slack);
    }

    #[test]
    fn bracket_contains_sign_change(v in sample_strategy(), alpha in 0.01..3.0f64, phi in builtin()) {
        let s = Sample::new(v).unwrap();
        let r = solve_mean(&s, &MeanConfig::with_alpha(alpha, phi.clone(), TOL)).unwrap();
        let (lo, hi) = r.bracket;
        prop_assert!(lo <= r.theta_hat && r.theta_hat <= hi);
        prop_assert!(hi - lo <= 2.0 * TOL);
        let eps = s.len() as f64 * alpha * TOL;
        prop_assert!(catoni_g(&s, alpha, &phi, r.theta_hat - TOL) >= -eps);
        prop_assert!(catoni_g(&s, alpha, &phi, r.theta_hat + TOL) <= eps);
        prop_assert!(catoni_g(&s, alpha, &phi, lo) >= -eps && catoni_g(&s, alpha, &phi, hi) <= eps);
    }

    #[test]
    fn regression_rows_permutation_invariant(seed in 0u64..1000, shift in 1usize..30) {
        let pr = seeded_problem(seed, 30, 3, &NoiseModel::StudentT { nu: 4.0 });
        let n = pr.n();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + shift) % n).collect();
        let x2 = DMatrix::from_fn(n, 3, |i, j| pr.x[(perm[i], j)]);
        let y2 = DVector::from_fn(n, |i, _| pr.y[perm[i]]);
        let pr2 = RegressionProblem::new(x2, y2).unwrap();
        let mut cfg = RegressionConfig::new(AlphaRule::Explicit(0.5), InfluenceSpec::wide());
        cfg.tol = 1e-13;
        let a = solve_regression(&pr, &cfg).unwrap();
        let b = solve_regression(&pr2, &cfg).unwrap();
        prop_assert!((&a.beta_hat - &b.beta_hat).amax() <= 1e-10);
        prop_assert!(h_value(&pr, &a.beta_hat, 0.5, &cfg.phi).norm() <= cfg.tol);
    }

    #[test]
    fn feasibility_monotone(a1 in 0.01..1.0f64, da in 0.0..1.0f64, e1 in 0.01..0.9f64, n in 10usize..5000, dn in 0usize..5000) {
        let g = GramStats { s_n: DMatrix::identity(2, 2), lambda_min: 0.5, lambda_max: 1.5, l_n: 1.2 };
        let base = feasibility(&g, 1.3, a1, e1, n).unwrap().delta_sq;
        prop_assert!(feasibility(&g, 1.3, a1 + da, e1, n).unwrap().delta_sq <= base);
        prop_assert!(feasibility(&g, 1.3, a1, e1 * 0.5, n).unwrap().delta_sq <= base);
        prop_assert!(feasibility(&g, 1.3, a1, e1, n + dn).unwrap().delta_sq >= base);
    }

    #[test]
    fn draw_is_reproducible(seed in any::<u64>(), stream in any::<u64>(), n in 1usize..50) {
        let m = NoiseModel::CenteredGamma { shape: 0.7, scale: 2.0 };
        let mut r1 = RngStream::new(seed, stream);
        let mut r2 = RngStream::new(seed, stream);
        let a = dist::draw(&m, n, &mut r1);
        let b = dist::draw(&m, n, &mut r2);
        prop_assert_eq!(a, b);
        prop_assert_eq!(r1.counter, n as u64 * dist::WORDS_PER_VARIATE);
    }

    #[test]
    fn u_stat_bound_squares_when_n_doubles(n in 1usize..500, m in 1usize..5, x in 0.05..0.95f64, p in 1.05..2.0f64) {
        let n = n * m;
        let a = dist::u_stat_lower_tail_bound(m, n, 1.0, 1.7, p, x).unwrap().get();
        let b = dist::u_stat_lower_tail_bound(m, 2 * n, 1.0, 1.7, p, x).unwrap().get();
        prop_assert!((b - a * a).abs() <= 1e-12 * a.max(1e-300) + 1e-300);
    }
}

pub fn seeded_problem(seed: u64, n: usize, p: usize, noise: &NoiseModel) -> RegressionProblem {
    let mut rng = RngStream::new(seed, 0xD35_16);
    let x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.standard_normal() });
    let beta = DVector::from_fn(p, |j, _| 1.0 - 0.5 * j as f64);
    let e = dist::draw(noise, n, &mut rng);
    let y = &x * beta + DVector::from_column_slice(e.values());
    RegressionProblem::new(x, y).unwrap()
}

#[test]
fn singular_design_is_reported_not_thrown() {
    let mut x = DMatrix::from_element(6, 2, 1.0);
    x.set_column(1, &DVector::zeros(6));
    assert!(gram_stats(&x).unwrap().lambda_min.abs() <= 1e-10);
}
