//! Property-based invariants across modules.

use proptest::prelude::*;

use trunctest::dist::Moment;
use trunctest::harness::{wilson_half, wilson_interval};
use trunctest::median::{estimate_center, DirectionNet};
use trunctest::moments::{bias_floor, effective_signal, subgaussian_floor};
use trunctest::truncation::{gaussian_halfspace_truncated_variance, halfspace_adversary};
use trunctest::ustat::{block_count, u_statistic, u_statistic_pairwise};
use trunctest::{DistributionSpec, SampleBatch, StreamRng};

fn batch_strategy(max_n: usize, max_d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2..=max_n, 1..=max_d).prop_flat_map(|(n, d)| {
        proptest::collection::vec(
            proptest::collection::vec(-50.0..50.0f64, d),
            n,
        )
    })
}

fn batch(rows: Vec<Vec<f64>>) -> SampleBatch {
    SampleBatch::from_rows(rows, vec![]).unwrap()
}

proptest! {
    #[test]
    fn u_statistic_identity_matches_pairwise(rows in batch_strategy(60, 10)) {
        let b = batch(rows);
        let fast = u_statistic(&b).unwrap();
        let slow = u_statistic_pairwise(&b).unwrap();
        let scale = fast.abs().max(slow.abs()).max(1.0);
        prop_assert!((fast - slow).abs() <= 1e-9 * scale);
    }

    #[test]
    fn u_statistic_permutation_invariant(rows in batch_strategy(30, 6), swap in (0usize..30, 0usize..30)) {
        let f0 = u_statistic(&batch(rows.clone())).unwrap();
        let mut permuted = rows;
        let (i, j) = (swap.0 % permuted.len(), swap.1 % permuted.len());
        permuted.swap(i, j);
        let f1 = u_statistic(&batch(permuted)).unwrap();
        prop_assert!((f0 - f1).abs() <= 1e-9 * f0.abs().max(1.0));
    }

    #[test]
    fn u_statistic_rotation_invariant(rows in batch_strategy(30, 1), theta in 0.0..std::f64::consts::TAU) {
        // Embed a 1-d batch in the plane and rotate: inner products survive.
        let planar: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0], 0.0]).collect();
        let rotated: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| vec![r[0] * theta.cos(), r[0] * theta.sin()])
            .collect();
        let f0 = u_statistic(&batch(planar)).unwrap();
        let f1 = u_statistic(&batch(rotated)).unwrap();
        prop_assert!((f0 - f1).abs() <= 1e-9 * f0.abs().max(1.0));
    }

    #[test]
    fn bias_floor_monotone_in_epsilon_and_linear_in_nu(
        nu in 0.01..10.0f64,
        p in 1.0..12.0f64,
        eps in 1e-6..0.49f64,
        bump in 1e-6..0.01f64,
    ) {
        let g0 = bias_floor(nu, eps, p).unwrap().gamma;
        let g1 = bias_floor(nu, eps + bump, p).unwrap().gamma;
        prop_assert!(g1 >= g0);
        let g2 = bias_floor(2.0 * nu, eps, p).unwrap().gamma;
        prop_assert!((g2 - 2.0 * g0).abs() <= 1e-12 * g0.abs().max(1.0));
    }

    #[test]
    fn effective_signal_clamps_at_zero(alpha in 0.01..5.0f64, nu in 0.0..5.0f64, eps in 1e-4..0.5f64) {
        let floor = bias_floor(nu, eps, 2.0).unwrap();
        let budget = effective_signal(alpha, &floor).unwrap();
        prop_assert!((budget.beta - (alpha - floor.gamma).max(0.0)).abs() < 1e-15);
        prop_assert!(budget.beta >= 0.0);
    }

    #[test]
    fn gaussian_shift_obeys_every_fixed_p_floor(eps in 1e-4..0.3f64) {
        // The exact halfspace mean shift is below 2·ν_p·ε^{1−1/p}
        // for each p with a finite directional moment, not only the best one.
        let spec = DistributionSpec::IsotropicGaussian { dimension: 1, mean: vec![0.0], scale: 1.0 };
        let inst = halfspace_adversary(&spec, eps, &[1.0]).unwrap();
        let shift = inst.exact_truncated_mean.unwrap()[0].abs();
        for p in [2.0, 3.0, 4.0, 8.0] {
            let Moment::Exact(nu) = spec.directional_moment_exact(p).unwrap() else {
                panic!("gaussian moments are finite");
            };
            let gamma = bias_floor(nu, eps, p).unwrap().gamma;
            prop_assert!(shift <= gamma, "p={p}: shift {shift} > floor {gamma}");
        }
    }

    #[test]
    fn subgaussian_floor_is_the_integer_p_minimum(sigma in 0.1..4.0f64, eps in 1e-4..0.5f64) {
        let (p_star, value) = subgaussian_floor(sigma, eps).unwrap();
        let cap = (10.0 * (1.0 / eps).ln()).ceil() as u32;
        for p in 1..=cap.max(1) {
            let candidate = 2.0 * sigma * (p as f64).sqrt() * eps.powf(1.0 - 1.0 / p as f64);
            prop_assert!(value <= candidate + 1e-12 * candidate);
        }
        prop_assert!(p_star >= 1 && p_star <= cap.max(1));
    }

    #[test]
    fn truncated_gaussian_variance_within_promise_bound(sigma2 in 0.1..9.0f64, eps in 1e-4..0.5f64) {
        let v = gaussian_halfspace_truncated_variance(sigma2, eps);
        prop_assert!(v > 0.0);
        // Tail removal shrinks the variance...
        prop_assert!(v <= sigma2);
        // ...and conditioning can inflate a p-th moment by at most (1−ε)⁻¹.
        prop_assert!(v <= sigma2 / (1.0 - eps));
    }

    #[test]
    fn wilson_interval_brackets_the_point_estimate(successes in 0usize..500, extra in 0usize..500) {
        let n = successes + extra;
        prop_assume!(n > 0);
        let (lo, hi) = wilson_interval(successes, n);
        let p = successes as f64 / n as f64;
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        prop_assert!(lo <= p + 1e-12 && p <= hi + 1e-12);
        prop_assert!(wilson_half(successes, n) >= wilson_half(4 * successes, 4 * n) - 1e-12);
    }

    #[test]
    fn block_count_is_odd_and_sufficient(delta in 1e-6..0.33f64) {
        let k = block_count(delta);
        prop_assert_eq!(k % 2, 1);
        prop_assert!(k as f64 >= 18.0 * (1.0 / delta).ln());
        prop_assert!((k as f64) < 18.0 * (1.0 / delta).ln() + 2.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn estimate_center_translation_equivariant(
        rows in batch_strategy(40, 3),
        shift in proptest::collection::vec(-5.0..5.0f64, 3),
        seed in any::<u64>(),
    ) {
        let d = rows[0].len();
        let mut rng = StreamRng::from_master(seed);
        let net = DirectionNet::axes_random(d, (4 * d).max(8), &mut rng).unwrap();
        let (mu0, _) = estimate_center(&batch(rows.clone()), &net, 1e-9).unwrap();
        let shifted: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().zip(&shift).map(|(x, t)| x + t).collect())
            .collect();
        let (mu1, _) = estimate_center(&batch(shifted), &net, 1e-9).unwrap();
        for k in 0..d {
            prop_assert!((mu1[k] - mu0[k] - shift[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn direction_net_contains_axes_with_unit_norms(d in 1usize..6, m_extra in 0usize..20, seed in any::<u64>()) {
        let m = 2 * d + m_extra;
        let mut rng = StreamRng::from_master(seed);
        let net = DirectionNet::axes_random(d, m, &mut rng).unwrap();
        prop_assert_eq!(net.directions().len(), m);
        for v in net.directions() {
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-10);
        }
        for k in 0..d {
            for sign in [1.0f64, -1.0] {
                let mut axis = vec![0.0; d];
                axis[k] = sign;
                prop_assert!(net.directions().iter().any(|v| v == &axis));
            }
        }
    }
}
