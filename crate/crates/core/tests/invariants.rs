//! Property tests for the structural invariants of each module.

use levy_spde::bounds::{
    anderson_second_moment, beta_star, upsilon, BetaSearch, ChaosOptions, GrowthFunctional,
    Resolution, Truncation,
};
use levy_spde::green::OperatorSpec;
use levy_spde::grid::SimGrid;
use levy_spde::kernels::{KernelFamily, KernelSpec};
use levy_spde::noise::{moment_mp, rosenthal_bound, sample_white_noise, LevyMeasure, VgRates};
use levy_spde::rng::SeedKey;
use levy_spde::simulate::{simulate_with_noise, Model, ScalarFn, SimConfig};
use proptest::prelude::*;

fn isotropic_kernel(d: usize) -> impl Strategy<Value = KernelSpec> {
    let dm = d as f64;
    prop_oneof![
        (0.2f64..3.0).prop_map(move |a| KernelSpec::heat(d, a)),
        (0.2f64..3.0).prop_map(move |a| KernelSpec::poisson(d, a)),
        // Dalang: α > max(d-2, 0), and α < d
        ((dm - 2.0).max(0.0) + 0.1..dm - 0.05).prop_map(move |a| KernelSpec::riesz(d, a)),
        ((dm - 2.0).max(0.0) + 0.1..3.0).prop_map(move |a| KernelSpec::bessel(d, a)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_moments_match_closed_form(alpha in 0.1f64..5.0, beta in 0.1f64..5.0, p in 2.0f64..8.0) {
        let m = LevyMeasure::Gamma { alpha, beta };
        let exact = alpha * libm::tgamma(p) / beta.powf(p);
        prop_assert!((moment_mp(&m, p) / exact - 1.0).abs() < 1e-12);
        prop_assert!((m.m2() / (alpha / (beta * beta)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn variance_gamma_rates_satisfy_their_identities(theta in -3.0f64..3.0, sigma in 0.1f64..3.0, nu in 0.1f64..3.0) {
        let r = VgRates::new(theta, sigma, nu);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs()));
        prop_assert!(close(r.mu_p * r.mu_p / r.nu_p, 1.0 / nu));
        prop_assert!(close(r.mu_n * r.mu_n / r.nu_n, 1.0 / nu));
        prop_assert!(close((r.nu_p / r.mu_p) * (r.nu_n / r.mu_n), sigma * sigma * nu / 2.0));
        prop_assert!(close(r.nu_p / r.mu_p - r.nu_n / r.mu_n, theta * nu));
    }

    #[test]
    fn rosenthal_p2_dominates_isometry(m2 in 1e-3f64..10.0, bp in 1.0f64..10.0, l2 in 0.0f64..10.0) {
        let b = rosenthal_bound(2.0, m2, m2, bp, l2, l2).unwrap();
        prop_assert!(b >= m2 * l2);
    }

    #[test]
    fn kernels_are_even(k in isotropic_kernel(2), x in -5.0f64..5.0, y in -5.0f64..5.0) {
        prop_assume!(x != 0.0 || y != 0.0);
        prop_assert_eq!(k.value(&[x, y]), k.value(&[-x, -y]));
        prop_assert_eq!(k.f_value(&[x, y]), k.f_value(&[-x, -y]));
    }

    #[test]
    fn wave_fourier_is_bounded_by_time(t in 0.0f64..20.0, rho in 0.0f64..1e3) {
        let g = OperatorSpec::wave(2).fourier_sq_radial(t, rho);
        prop_assert!(g >= 0.0 && g <= t * t * (1.0 + 1e-12));
    }

    #[test]
    fn dalang_classifier_matches_resolvent(d in 1usize..4, a in 0.05f64..3.0) {
        let dm = d as f64;
        prop_assume!(a < dm);
        let k = KernelSpec::riesz(d, a);
        let dal = k.dalang_condition();
        prop_assert_eq!(dal.holds, a > (dm - 2.0).max(0.0));
        prop_assert_eq!(dal.value.is_finite(), dal.holds);
    }

    #[test]
    fn product_dalang_rule(a in proptest::collection::vec(0.05f64..2.0, 1..4)) {
        let factors: Vec<KernelFamily> = a.iter().map(|&x| KernelFamily::Riesz { alpha: x.min(0.95) }).collect();
        let deficit: f64 = a.iter().map(|&x| (1.0 - x.min(0.95)).max(0.0)).sum();
        prop_assert_eq!(KernelSpec::product(factors).dalang_condition().holds, deficit < 2.0);
    }

    #[test]
    fn noise_is_a_function_of_its_key(seed in any::<u64>(), rep in 0u64..1000) {
        let grid = SimGrid::new(1, 2.0, 16, 0.1, 0.5).unwrap();
        let m = LevyMeasure::CompoundPoisson {
            rate: 3.0,
            jumps: levy_spde::noise::JumpLaw { values: vec![-1.0, 2.0], weights: vec![0.7, 0.3] },
        };
        let a = sample_white_noise(&m, &grid, SeedKey::new(seed, rep)).unwrap();
        let b = sample_white_noise(&m, &grid, SeedKey::new(seed, rep)).unwrap();
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn growth_functional_is_nonincreasing_in_beta(k in isotropic_kernel(1), p in 2.0f64..5.0, wave in any::<bool>()) {
        let op = if wave { OperatorSpec::wave(1) } else { OperatorSpec::heat(1) };
        let f = GrowthFunctional::new(&op, &k, p, &Resolution::default()).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..25 {
            let beta = 10f64.powf(-3.0 + 0.25 * i as f64);
            let v = f.evaluate(beta).value;
            prop_assert!(v >= 0.0);
            prop_assert!(v <= prev * (1.0 + 1e-9), "A at β={beta}: {v} > {prev}");
            prev = v;
        }
    }

    #[test]
    fn beta_star_is_nondecreasing_in_lipschitz(k in isotropic_kernel(2), lips in proptest::collection::vec(0.01f64..5.0, 4)) {
        let mut lips = lips;
        lips.sort_by(f64::total_cmp);
        let m = LevyMeasure::Gamma { alpha: 1.0, beta: 1.0 };
        let op = OperatorSpec::heat(2);
        let res = Resolution::default();
        let mut prev = 0.0;
        for lip in lips {
            let b = beta_star(&op, &k, &m, 2.0, lip, 4.0, &BetaSearch::default(), &res).unwrap().value;
            prop_assert!(b >= 0.0);
            prop_assert!(b >= prev * (1.0 - 1e-6), "β* {b} < {prev} at lip {lip}");
            prev = b;
        }
    }

    #[test]
    fn upsilon_is_nonincreasing_in_beta(k in isotropic_kernel(1), a in 0.01f64..10.0) {
        let mut prev = f64::INFINITY;
        for i in 0..12 {
            let beta = 10f64.powf(-2.0 + 0.4 * i as f64);
            let v = upsilon(&k, &[a], beta).unwrap();
            prop_assert!(v >= 0.0 && v <= prev * (1.0 + 1e-9));
            prev = v;
        }
    }

    #[test]
    fn chaos_terms_are_nonnegative(lambda in 0.05f64..1.0, t in 0.1f64..2.0, seed in any::<u64>()) {
        let opts = ChaosOptions { samples: 20_000, seed, truncation: Truncation::default() };
        let r = anderson_second_moment(
            &OperatorSpec::heat(1),
            &KernelSpec::heat(1, 1.0),
            &LevyMeasure::Gamma { alpha: 1.0, beta: 1.0 },
            lambda,
            1.0,
            t,
            4,
            &opts,
        )
        .unwrap();
        let mut partial = 0.0;
        for (n, term) in r.terms.iter().enumerate() {
            prop_assert!(term.value >= 0.0);
            let next = r.partial_sum_to(n);
            prop_assert!(next >= partial);
            partial = next;
        }
    }

    #[test]
    fn field_ignores_future_noise(k in 1usize..9, bump in -5.0f64..5.0, seed in any::<u64>()) {
        let grid = SimGrid::new(1, 4.0, 32, 0.05, 0.5).unwrap();
        let cfg = SimConfig {
            op: OperatorSpec::heat(1),
            kernel: KernelSpec::heat(1, 1.0),
            measure: LevyMeasure::Gamma { alpha: 1.0, beta: 1.0 },
            model: Model::Nonlinear { sigma: ScalarFn::SinBounded { amplitude: 1.0, frequency: 2.0 }, drift: ScalarFn::Zero },
            eta: 0.5,
            grid: grid.clone(),
        };
        let noise = sample_white_noise(&cfg.measure, &grid, SeedKey::new(seed, 0)).unwrap();
        let mut later = noise.clone();
        let per = grid.spatial_len();
        for v in &mut later.increments[k * per..] {
            *v += bump;
        }
        let a = simulate_with_noise(&cfg, &noise).unwrap();
        let b = simulate_with_noise(&cfg, &later).unwrap();
        for (i, &step) in a.steps.iter().enumerate() {
            if step <= k {
                prop_assert_eq!(a.slice(i), b.slice(i), "step {}", step);
            }
        }
    }
}
