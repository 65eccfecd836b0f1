use std::f64::consts::PI;

use kerr_core::analytic::{
    antinormal_moment, fock_evolve, mean_a_exact, mean_a_fock, ordered_double_average, positive_p_stochastic_average,
    stochastic_average_resummed,
};
use kerr_core::ensemble::stats::Welford;
use kerr_core::noise::{sample_noise_path, NoiseConfig};
use kerr_core::sde::{fp_from_langevin, kerr_reference_fp, pathwise_exact_solution, KerrModel, Representation};
use kerr_core::{Complex64, PhasePoint64};
use proptest::prelude::*;

fn complex(max: f64) -> impl Strategy<Value = Complex64> {
    (-max..max, -max..max).prop_map(|(re, im)| Complex64::new(re, im))
}

fn representation() -> impl Strategy<Value = Representation> {
    prop_oneof![Just(Representation::Q), Just(Representation::PositiveP)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exact_mean_is_periodic_and_bounded(a0 in complex(3.0), mu in 0.2f64..3.0, t in -20.0f64..20.0) {
        let v = mean_a_exact(a0, mu, t);
        prop_assert!(v.norm() <= a0.norm() * (1.0 + 1e-12) + 1e-300);
        let w = mean_a_exact(a0, mu, t + 2.0 * PI / mu);
        prop_assert!((v - w).norm() < 1e-10);
        let r = stochastic_average_resummed(a0, mu, t + 2.0 * PI / mu) - stochastic_average_resummed(a0, mu, t);
        prop_assert!(r.norm() < 1e-10 * (1.0 + stochastic_average_resummed(a0, mu, t).norm()));
    }

    #[test]
    fn conjugation_symmetry(a0 in complex(3.0), t in -10.0f64..10.0) {
        let lhs = mean_a_exact(a0, 1.0, -t);
        let rhs = mean_a_exact(a0.conj(), 1.0, t).conj();
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn positive_p_average_bounded_and_exact(b in complex(3.0), t in -10.0f64..10.0) {
        let v = positive_p_stochastic_average(b, 1.0, t);
        prop_assert!(v.norm() <= b.norm() * (1.0 + 1e-15));
        prop_assert!((v - mean_a_exact(b, 1.0, t)).norm() <= 4.0 * f64::EPSILON * b.norm());
    }

    #[test]
    fn three_routes_to_the_mean_agree(a0 in complex(1.5), t in 0.0f64..(2.0 * PI)) {
        let exact = mean_a_exact(a0, 1.0, t);
        let fock = mean_a_fock(&fock_evolve(a0, 1.0, t).unwrap());
        let series = ordered_double_average(a0, 1.0, t, 1e-14).unwrap();
        prop_assert!(series.converged);
        prop_assert!((exact - fock).norm() < 1e-9);
        prop_assert!((exact - series.value).norm() < 1e-9);
    }

    #[test]
    fn fock_state_stays_normalized_with_conserved_number(a0 in complex(2.0), t in -10.0f64..10.0) {
        let psi = fock_evolve(a0, 1.0, t).unwrap();
        prop_assert!((psi.norm_sqr() - 1.0).abs() < 1e-10);
        let m = antinormal_moment(&psi, 1, 1);
        prop_assert!((m - (a0.norm_sqr() + 1.0)).norm() < 1e-9);
    }

    #[test]
    fn fokker_planck_round_trip(alpha in complex(4.0), alpha_plus in complex(4.0), mu in 0.1f64..5.0, rep in representation()) {
        let model = KerrModel::new(mu, rep).unwrap();
        let p = PhasePoint64::new(alpha, alpha_plus);
        let got = fp_from_langevin(&model).at(&p).unwrap();
        prop_assert!(got.max_relative_residual(&kerr_reference_fp(&model, &p)) < 1e-12);
    }

    #[test]
    fn noise_paths_are_reproducible(seed in any::<u64>(), index in 0u64..1_000_000) {
        let cfg = NoiseConfig::new(1.0, 1e-3, Representation::Q, seed, index).unwrap();
        let a = sample_noise_path(&cfg, 64).unwrap();
        let b = sample_noise_path(&cfg, 64).unwrap();
        prop_assert_eq!(&a.increments, &b.increments);
        let other = NoiseConfig { trajectory_index: index + 1, ..cfg };
        prop_assert_ne!(&a.increments, &sample_noise_path(&other, 64).unwrap().increments);
    }

    #[test]
    fn pathwise_product_identity(seed in any::<u64>(), b in complex(1.0)) {
        let model = KerrModel::q(1.0).unwrap();
        let cfg = NoiseConfig::new(1.0, 1e-3, Representation::Q, seed, 0).unwrap();
        let path = sample_noise_path(&cfg, 500).unwrap();
        let p = pathwise_exact_solution(&model, b, &path, 500).unwrap();
        let want = b.norm_sqr() * path.both_integral(500).exp();
        prop_assert!((p.product() - want).norm() <= 1e-11 * want.norm().max(1e-300));
    }

    #[test]
    fn welford_merge_is_split_invariant(xs in prop::collection::vec(-1e3f64..1e3, 2..200), split in 0usize..200) {
        let split = split.min(xs.len());
        let mut whole = Welford::new();
        xs.iter().for_each(|x| whole.push(*x));
        let (mut a, mut b) = (Welford::new(), Welford::new());
        xs[..split].iter().for_each(|x| a.push(*x));
        xs[split..].iter().for_each(|x| b.push(*x));
        a.merge(&b);
        prop_assert_eq!(a.n, whole.n);
        prop_assert!((a.mean - whole.mean).abs() <= 1e-9 * (1.0 + whole.mean.abs()));
        prop_assert!((a.m2 - whole.m2).abs() <= 1e-9 * (1.0 + whole.m2.abs()));
    }
}
