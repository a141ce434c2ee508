//! Randomized checks of the engine's structural guarantees.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trustnet_core::engine::spreaders_at;
use trustnet_core::meanfield::{mf_fixed_point, theory_exponent, DEFAULT_BINS};
use trustnet_core::{DecayMode, Layout, ModelParams, ScenarioSpec, SimState, TrustStore, ValidatedParams};

fn params(n: usize, k: usize, v_alpha: f64, r_alpha: f64, v_a: f64, r_a: f64) -> ValidatedParams {
    ModelParams {
        N: n,
        K: k,
        v_alpha,
        r_alpha,
        v_A: v_a,
        r_A: r_a,
    }
    .validate()
    .unwrap()
}

fn arb_params() -> impl Strategy<Value = ValidatedParams> {
    (2usize..40, 1usize..6, 0.001f64..0.1, 0.001f64..0.05, 0.001f64..0.1, 0.001f64..0.05).prop_map(
        |(n, k, va, ra, vr, rr)| params(n, k.min(n), va, ra, vr, rr),
    )
}

fn arb_scenario() -> impl Strategy<Value = ScenarioSpec> {
    prop_oneof![
        Just(ScenarioSpec::None),
        (0.0f64..=1.0).prop_map(|p| ScenarioSpec::Quenched { p }),
        (0.0f64..=1.0).prop_map(|p| ScenarioSpec::Annealed { p }),
        (0.0f64..=1.0, 0u64..60, 1u64..30).prop_map(|(p, t_start, duration)| ScenarioSpec::Pulse {
            p,
            t_start,
            duration
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn accounting_identity_holds_every_step(
        p in arb_params(),
        sc in arb_scenario(),
        seed in any::<u64>(),
    ) {
        let mut state = SimState::new(p, sc, seed);
        let messages = p.messages_per_step() as u64;
        for _ in 0..150 {
            let m = state.step();
            prop_assert_eq!(m.accepted + m.refused, messages);
            prop_assert!(m.C <= messages);
            prop_assert!(m.E <= messages - m.C);
            prop_assert_eq!(m.E, m.e_false_accept + m.e_false_reject);
            prop_assert!(m.I <= p.n() as u64);
        }
    }

    #[test]
    fn lazy_and_eager_decay_give_the_same_trajectory(
        p in arb_params(),
        sc in arb_scenario(),
        seed in any::<u64>(),
    ) {
        let mut lazy = SimState::with_mode(p, sc, seed, DecayMode::Lazy);
        let mut eager = SimState::with_mode(p, sc, seed, DecayMode::Eager);
        for _ in 0..150 {
            prop_assert_eq!(lazy.step(), eager.step());
            let a = lazy.trust_snapshot();
            let b = eager.trust_snapshot();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!((x.receiver, x.sender), (y.receiver, y.sender));
                prop_assert!((x.alpha - y.alpha).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn without_spreaders_nothing_is_infected_and_trust_stays_in_support(
        n in 2usize..40,
        k in 1usize..6,
        v_alpha in 0.001f64..0.1,
        r_alpha in 0.001f64..0.05,
        v_ratio in 0.01f64..=1.0,
        r_a in 0.001f64..0.05,
        seed in any::<u64>(),
    ) {
        let v_a = v_alpha * v_ratio;
        let p = params(n, k.min(n), v_alpha, r_alpha, v_a, r_a);
        let mut state = SimState::new(p, ScenarioSpec::Annealed { p: 0.0 }, seed);
        for _ in 0..200 {
            let m = state.step();
            prop_assert_eq!(m.I, 0);
            prop_assert_eq!(m.e_false_accept, 0);
            for r in state.trust_snapshot() {
                prop_assert!(r.alpha >= 0.0 && r.alpha <= 2.0 * v_alpha, "alpha {} out of [0, 2v]", r.alpha);
            }
        }
    }

    #[test]
    fn sparse_and_dense_layouts_store_the_same_values(
        ops in prop::collection::vec((0u32..12, 0u32..12, -1.5f64..1.5, 0u64..5), 1..60),
        r in 0.0001f64..0.1,
        read_at in 0u64..10_000,
    ) {
        let mut sparse = TrustStore::with_layout(12, r, DecayMode::Lazy, Layout::Sparse);
        let mut dense = TrustStore::with_layout(12, r, DecayMode::Lazy, Layout::Dense);
        let mut t = 0;
        for (i, j, alpha, dt) in ops {
            t += dt;
            sparse.set(i, j, alpha, t);
            dense.set(i, j, alpha, t);
        }
        let at = t + read_at;
        prop_assert_eq!(sparse.snapshot(at), dense.snapshot(at));
        prop_assert_eq!(sparse.len(), dense.len());
    }

    #[test]
    fn mean_field_slope_follows_the_exponent_law(a in 0.004f64..0.03, r in 0.005f64..0.02) {
        let fp = mf_fixed_point(a, r, 0.01, DEFAULT_BINS, 1e-10, 500_000).unwrap();
        let fit = fp.distribution.fit_p1(DEFAULT_BINS / 40).unwrap();
        let x = theory_exponent(a, r).unwrap();
        prop_assert!((fit.slope - x).abs() < 0.1, "slope {} vs {}", fit.slope, x);
        prop_assert!((fp.distribution.total_mass() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn identical_seeds_give_identical_metric_streams() {
    let p = params(50, 4, 0.01, 0.005, 0.01, 0.005);
    let sc = ScenarioSpec::Annealed { p: 0.1 };
    let mut a = SimState::new(p, sc, 7);
    let mut b = SimState::new(p, sc, 7);
    let sa: Vec<_> = (0..500).map(|_| a.step()).collect();
    let sb: Vec<_> = (0..500).map(|_| b.step()).collect();
    assert_eq!(sa, sb);
    assert_eq!(a.trust_snapshot(), b.trust_snapshot());
    let mut c = SimState::new(p, sc, 8);
    let sc_: Vec<_> = (0..500).map(|_| c.step()).collect();
    assert_ne!(sa, sc_);
}

#[test]
fn annealed_spreaders_overlap_like_independent_draws() {
    // Consecutive annealed draws of round(pN) agents share p of them on average.
    let n = 500;
    let sc = ScenarioSpec::Annealed { p: 0.05 };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut prev = spreaders_at(&sc, 0, n, &[], &mut rng);
    let steps = 10_000;
    let mut overlap = 0.0;
    for t in 1..=steps {
        let cur = spreaders_at(&sc, t, n, &[], &mut rng);
        assert_eq!(cur.len(), 25);
        let shared = cur.iter().filter(|j| prev.binary_search(j).is_ok()).count();
        overlap += shared as f64 / cur.len() as f64;
        prev = cur;
    }
    let mean = overlap / steps as f64;
    assert!((mean - 0.05).abs() < 0.003, "mean overlap {mean}");
}

#[test]
fn quenched_sources_never_change() {
    let p = params(100, 3, 0.01, 0.005, 0.01, 0.005);
    let mut state = SimState::new(p, ScenarioSpec::Quenched { p: 0.1 }, 3);
    let sources = state.quenched_sources().to_vec();
    assert_eq!(sources.len(), 10);
    for _ in 0..100 {
        state.step();
        assert_eq!(state.quenched_sources(), &sources[..]);
        for &j in &sources {
            assert!(state.infection().sources[j as usize]);
        }
    }
}

#[test]
fn no_infection_run_reaches_a_positive_stationary_cost() {
    let p = params(500, 5, 0.01, 0.005, 0.01, 0.005);
    let mut state = SimState::new(p, ScenarioSpec::None, 1);
    let series: Vec<_> = (0..6000).map(|_| state.step()).collect();
    let tail = &series[4500..];
    let mean = tail.iter().map(|m| m.C as f64).sum::<f64>() / tail.len() as f64;
    assert!(mean > 0.0);
    assert!(tail.iter().all(|m| m.I == 0 && m.E == 0));
}
