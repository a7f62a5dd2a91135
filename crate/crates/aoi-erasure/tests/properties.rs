//! Property-based checks of the model invariants: the factorized
//! engine against the enumeration oracle on random policies, symmetry
//! and monotonicity structure, grammar round-trips, and the internal
//! consistency of every moment summary the engine emits.

use aoi_erasure::analytic::{
    aoi, average_aoi, brute_force_moments, peak_aoi, update_moments, DEFAULT_TAIL_CUTOFF,
};
use aoi_erasure::sim::{simulate, SimConfig};
use aoi_erasure::{Cap, ErasureChannel, Policy};
use proptest::prelude::*;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn finite_policy(k_max: usize, cap_max: u32) -> impl Strategy<Value = Policy> {
    prop::collection::vec(1..=cap_max, 1..=k_max)
        .prop_map(|caps| Policy::new(caps.into_iter().map(Cap::Finite).collect()).unwrap())
}

/// Finite policy with at most one coordinate promoted to unbounded,
/// keeping the enumeration oracle's term count small.
fn oracle_policy() -> impl Strategy<Value = Policy> {
    (finite_policy(3, 5), any::<u8>()).prop_map(|(p, promote)| {
        let mut caps = p.caps().to_vec();
        let idx = promote as usize % (caps.len() * 3);
        if idx < caps.len() {
            caps[idx] = Cap::Unbounded;
        }
        Policy::new(caps).unwrap()
    })
}

fn mixed_policy(k_max: usize, cap_max: u32) -> impl Strategy<Value = Policy> {
    prop::collection::vec(
        prop_oneof![
            5 => (1..=cap_max).prop_map(Cap::Finite),
            1 => Just(Cap::Unbounded),
        ],
        1..=k_max,
    )
    .prop_map(|caps| Policy::new(caps).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn engine_equals_oracle_on_random_policies(
        policy in oracle_policy(),
        eps in 0.05f64..0.9,
    ) {
        let channel = ErasureChannel::new(eps).unwrap();
        let fast = update_moments(&policy, channel);
        let slow = brute_force_moments(&policy, channel, DEFAULT_TAIL_CUTOFF).unwrap();
        for (a, b, field) in [
            (fast.p, slow.p, "p"),
            (fast.e_s, slow.e_s, "e_s"),
            (fast.e_s2, slow.e_s2, "e_s2"),
            (fast.e_d, slow.e_d, "e_d"),
            (fast.e_d2, slow.e_d2, "e_d2"),
            (fast.e_dtot, slow.e_dtot, "e_dtot"),
            (fast.e_dtot2, slow.e_dtot2, "e_dtot2"),
        ] {
            prop_assert!(
                rel_close(a, b, 1e-11),
                "{field}: engine {a} vs oracle {b} for {policy} at eps {eps}"
            );
        }
    }
}

proptest! {
    #[test]
    fn success_stats_ignore_cap_order(
        policy in mixed_policy(5, 8),
        rot in any::<usize>(),
        eps in 0.02f64..0.95,
    ) {
        let channel = ErasureChannel::new(eps).unwrap();
        let mut caps = policy.caps().to_vec();
        let k = caps.len();
        caps.rotate_left(rot % k);
        let rotated = Policy::new(caps).unwrap();
        let a = update_moments(&policy, channel);
        let b = update_moments(&rotated, channel);
        // Success probability and successful-update duration moments
        // factor per packet, so any reordering preserves them; the
        // failure-side moments genuinely depend on order.
        prop_assert!(rel_close(a.p, b.p, 1e-12));
        prop_assert!(rel_close(a.e_s, b.e_s, 1e-12));
        prop_assert!(rel_close(a.e_s2, b.e_s2, 1e-12));
    }

    #[test]
    fn raising_a_cap_raises_success_stats(
        policy in finite_policy(5, 8),
        coord in any::<usize>(),
        bump in 1u32..=5,
        eps in 0.02f64..0.95,
    ) {
        let channel = ErasureChannel::new(eps).unwrap();
        let mut caps = policy.caps().to_vec();
        let i = coord % caps.len();
        let Cap::Finite(c) = caps[i] else { unreachable!() };
        caps[i] = Cap::Finite(c + bump);
        let larger = Policy::new(caps).unwrap();
        let a = update_moments(&policy, channel);
        let b = update_moments(&larger, channel);
        let slack = 1e-12 * b.e_s.max(1.0);
        prop_assert!(b.p >= a.p - 1e-12, "p fell from {} to {}", a.p, b.p);
        prop_assert!(b.e_s >= a.e_s - slack, "E[S] fell from {} to {}", a.e_s, b.e_s);
    }

    #[test]
    fn policy_grammar_round_trips(policy in mixed_policy(6, 40)) {
        let text = policy.to_string();
        let back: Policy = text.parse().unwrap();
        prop_assert_eq!(back, policy);
    }

    #[test]
    fn engine_output_is_internally_consistent(
        policy in mixed_policy(6, 10),
        eps in 0.0f64..0.95,
    ) {
        let channel = ErasureChannel::new(eps).unwrap();
        let m = update_moments(&policy, channel);
        if let Err(why) = m.validate(policy.k()) {
            return Err(TestCaseError::fail(format!("{policy} at eps {eps}: {why}")));
        }
        let r = aoi(&policy, channel);
        prop_assert_eq!(r.average_aoi, average_aoi(&m));
        prop_assert_eq!(r.peak_aoi, peak_aoi(&m));
        // Proven floor: the average exceeds (1 + p/2) times the cycle
        // length, itself at least K/(1 - eps).
        let cycle = m.e_s + m.e_dtot;
        let slack = 1e-9 * cycle.max(1.0);
        prop_assert!(r.average_aoi + slack >= (1.0 + m.p / 2.0) * cycle);
        prop_assert!(cycle + slack >= policy.k() as f64 / (1.0 - eps));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn short_simulations_always_account_cleanly(
        policy in mixed_policy(3, 4),
        eps in 0.0f64..0.6,
        seed in any::<u64>(),
    ) {
        let config = SimConfig {
            horizon: 4_000,
            seed,
            replications: 2,
            warmup: 0,
        };
        let channel = ErasureChannel::new(eps).unwrap();
        let stats = simulate(&policy, channel, &config).unwrap();
        prop_assert!(stats.avg_aoi_mean.is_finite());
        prop_assert!(stats.avg_aoi_mean >= 1.0);
        prop_assert!(stats.paoi_mean >= stats.emp_e_s);
        prop_assert!(stats.n_successes >= 2);
        prop_assert!(stats.emp_e_s >= policy.k() as f64);
    }
}
