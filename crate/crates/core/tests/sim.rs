use std::collections::BTreeSet;

use blend_core::ctr::InteractionConfig;
use blend_core::sim::{
    run_arms, run_experiment_suite, ArmContext, Assignment, Environment, Scenario, SimConfig,
    SuiteInputs, Treatment, TuningSummary, EVAL_TAG,
};
use blend_core::Scheme;

fn independent_config() -> SimConfig {
    let mut c = SimConfig {
        n_impressions: 2_000,
        n_tune_impressions: 200,
        ..SimConfig::default()
    };
    c.interaction = InteractionConfig::neutral();
    c.position_multipliers = vec![1.0; c.total_slots];
    c
}

fn context(env: &Environment) -> ArmContext<'_> {
    ArmContext {
        model: &env.model,
        n_prime: env.config.n_prime,
        scheme: Scheme::Gsp,
        gsp_exponent: 1.0,
        floor: 0.0,
        seed: env.config.seed,
    }
}

#[test]
fn revenue_maximizer_picks_the_baseline_set_without_joint_effects() {
    let config = independent_config();
    let env = Environment::new(&config).unwrap();
    let log = env.epoch(EVAL_TAG, 500);
    let arms = run_arms(
        &log,
        &[Treatment::Baseline, Treatment::Listwise { v_a: 0.0 }],
        &context(&env),
        Assignment::Paired,
    )
    .unwrap();
    for ((i, base), (j, listwise)) in arms[0].served.iter().zip(&arms[1].served) {
        assert_eq!(i, j);
        let set = |t: &blend_core::MixedTuple| t.ads().map(|(_, c)| c).collect::<BTreeSet<_>>();
        assert_eq!(set(&base.tuple), set(&listwise.tuple), "impression {i}");
        assert!((base.ad_value - listwise.ad_value).abs() < 1e-12);
    }
}

#[test]
fn shuffling_is_harmless_without_joint_effects() {
    let config = independent_config();
    let r = run_experiment_suite(&config, Scenario::Externality, SuiteInputs::default()).unwrap();
    let shuffle = &r.row("T1", "shuffle").unwrap().expected;
    assert!(shuffle.ad_ctr.lift_pct.unwrap().abs() < 1e-9);
    assert!(shuffle.org_ctr.lift_pct.unwrap().abs() < 1e-9);
}

#[test]
fn organic_slots_are_the_same_in_every_arm() {
    let config = SimConfig {
        n_impressions: 300,
        ..SimConfig::default()
    };
    let env = Environment::new(&config).unwrap();
    let log = env.epoch(EVAL_TAG, 300);
    let arms = run_arms(
        &log,
        &[
            Treatment::Baseline,
            Treatment::Shuffle,
            Treatment::RandomTopX { x: 5 },
            Treatment::Listwise { v_a: 0.0 },
            Treatment::Listwise { v_a: 4.0 },
        ],
        &context(&env),
        Assignment::Paired,
    )
    .unwrap();
    for arm in &arms[1..] {
        for ((_, a), (_, b)) in arms[0].served.iter().zip(&arm.served) {
            assert_eq!(a.tuple.organics().collect::<Vec<_>>(), b.tuple.organics().collect::<Vec<_>>());
        }
    }
}

#[test]
fn randomized_assignment_runs_every_scenario() {
    let mut config = SimConfig {
        n_impressions: 600,
        n_tune_impressions: 100,
        assignment: Assignment::Randomized,
        ..SimConfig::default()
    };
    config.payment_scheme = Scheme::Vcg;
    for s in Scenario::ALL {
        let r = run_experiment_suite(
            &config,
            s,
            SuiteInputs {
                log: None,
                tuning: Some(TuningSummary::fixed(2.0)),
            },
        )
        .unwrap();
        let arms = r.treatments.iter().filter(|t| t.epoch == "T1").count();
        let served: usize = r.treatments.iter().filter(|t| t.epoch == "T1").map(|t| t.sample_size).sum();
        assert_eq!(served, 600, "{} with {arms} arms", s.name());
    }
}

#[test]
fn realized_clicks_track_the_model() {
    let config = SimConfig {
        n_impressions: 100_000,
        ..SimConfig::default()
    };
    let r = run_experiment_suite(&config, Scenario::Externality, SuiteInputs::default()).unwrap();
    for row in &r.treatments {
        let gap = (row.realized.ad_ctr.mean - row.expected.ad_ctr.mean).abs();
        assert!(gap <= 3.0 * row.realized.ad_ctr.std_error, "{}: gap {gap}", row.role);
        let gap = (row.realized.org_ctr.mean - row.expected.org_ctr.mean).abs();
        assert!(gap <= 3.0 * row.realized.org_ctr.std_error, "{}: organic gap {gap}", row.role);
    }
}
