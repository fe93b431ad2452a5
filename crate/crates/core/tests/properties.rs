use bpre_core::bounds::{evaluate, BoundConstants, Theorem};
use bpre_core::exact::{EnumerationLimits, RatioDistribution};
use bpre_core::harness::{verify_bound, VerificationReport, VerifySettings};
use bpre_core::{
    benchmarks, EnvironmentModel, GrowthPolicy, OffspringLaw, Scale, Simulator, Standardizer,
};
use proptest::prelude::*;

fn law() -> impl Strategy<Value = OffspringLaw> {
    prop::collection::btree_map(1u64..6, 1u32..10, 1..4).prop_map(|m| {
        let total: u32 = m.values().sum();
        let points: Vec<(u64, f64)> = m
            .into_iter()
            .map(|(k, w)| (k, w as f64 / total as f64))
            .collect();
        OffspringLaw::new(&points).unwrap()
    })
}

fn environment() -> impl Strategy<Value = EnvironmentModel> {
    prop::collection::vec((law(), 1u32..5), 1..4).prop_filter_map("supercritical", |states| {
        let total: u32 = states.iter().map(|s| s.1).sum();
        let weights = states.iter().map(|s| s.1 as f64 / total as f64).collect();
        EnvironmentModel::new(states.into_iter().map(|s| s.0).collect(), weights).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trajectories_decompose_and_replay(env in environment(), seed in any::<u64>(), id in 0u64..1000) {
        let sim = Simulator::new(&env, GrowthPolicy::clt(10_000)).unwrap();
        let a = sim.simulate(20, seed, id).unwrap();
        prop_assert_eq!(&a, &sim.simulate(20, seed, id).unwrap());
        for k in 0..=20 {
            prop_assert!((a.ln_z()[k] - a.s()[k] - a.ln_w()[k]).abs() <= 1e-9);
            if let Some(z) = a.z()[k] {
                prop_assert!(z >= 1);
            }
        }
    }

    #[test]
    fn enumeration_is_a_distribution(env in environment(), n0 in 0usize..2, n in 1usize..4) {
        let dist = RatioDistribution::enumerate(&env, n0, n, EnumerationLimits::default()).unwrap();
        prop_assert!((dist.total_mass() + dist.truncated_mass - 1.0).abs() <= 1e-12);
        let st = Standardizer::from_env(&env);
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let p = dist.tail(-4.0 + 0.2 * i as f64, Scale::PerGeneration, &st).prob;
            prop_assert!(p <= prev + 1e-15);
            prev = p;
        }
    }

    #[test]
    fn bounds_non_increasing_in_x(env in environment(), n in 1usize..200) {
        prop_assume!(env.sigma2() > 1e-6);
        let c = BoundConstants::from_env(&env, 0.5, 3.0, 1.5).unwrap();
        for theorem in Theorem::ALL {
            let grid = theorem.default_x_grid(&c);
            let values: Vec<f64> = grid
                .iter()
                .map(|&x| evaluate(theorem, x, n, &c).unwrap().value())
                .collect();
            for w in values.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} at n = {}", theorem, n);
            }
        }
    }
}

#[test]
fn verification_report_round_trips() {
    let env = benchmarks::m1();
    let report = verify_bound(
        &env,
        Theorem::RioCorollary,
        &[0.0, 0.1, 0.3],
        &[4, 8],
        1,
        500,
        11,
        &VerifySettings::default(),
    )
    .unwrap();
    let json = serde_json::to_string(&report).unwrap();
    let back: VerificationReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.schema_version, 1);
}

#[test]
fn exact_mc_agreement_on_m1() {
    let env = benchmarks::m1();
    let t = bpre_core::estimate_tail(
        &env,
        1,
        2,
        0.5,
        Scale::Standardized,
        100_000,
        7,
        GrowthPolicy::default(),
    )
    .unwrap();
    let exact = bpre_core::exact_tail(&env, 1, 2, 0.5, 4096).unwrap();
    assert!((t.p_hat - exact.prob).abs() <= 3.0 * t.std_err);
}

#[test]
fn m3_is_rejected_by_bounds() {
    let err = BoundConstants::from_env(&benchmarks::m3(), 0.5, 3.0, 1.5).unwrap_err();
    assert_eq!(err.code(), "DEGENERATE");
}
