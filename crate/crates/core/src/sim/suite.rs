//! The experiment scenarios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::config::{Assignment, SimConfig, TunerKind};
use crate::sim::env::{Environment, EVAL_TAG, TUNE_TAG};
use crate::sim::report::{
    arm_diversity, category_rows, diversity_rows, shift_row, treatment_row, ArmStats,
    DistanceRow, ExperimentReport, TreatmentRow, TuningSummary,
};
use crate::sim::treatment::{run_arms, ArmContext, ArmResult, Treatment};
use crate::tuner::{
    default_bracket, distance_to_utopia, frontier_sweep, tune_with, FrontierEvaluator,
    TuneMethod,
};
use crate::types::Impression;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Shuffled and randomly selected ads against the baseline.
    Externality,
    /// Tuned virtual bid and its neighbours one unit away.
    VbGrid,
    /// Tuned virtual bid against the constant `v_a = 1`.
    VbConstant,
    /// Subcategory diversity of the tuned allocation.
    Diversity,
    /// Stale and re-tuned virtual bids after a drift in the bid distribution.
    DistShift,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Externality,
        Scenario::VbGrid,
        Scenario::VbConstant,
        Scenario::Diversity,
        Scenario::DistShift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Externality => "externality",
            Scenario::VbGrid => "vb_grid",
            Scenario::VbConstant => "vb_constant",
            Scenario::Diversity => "diversity",
            Scenario::DistShift => "dist_shift",
        }
    }

    fn needs_virtual_bid(self) -> bool {
        self != Scenario::Externality
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown scenario {s:?}")))
    }
}

/// Optional inputs that override what the suite would otherwise generate.
#[derive(Clone, Debug, Default)]
pub struct SuiteInputs<'a> {
    /// First-epoch evaluation log; generated from the config when absent.
    pub log: Option<&'a [Impression]>,
    /// Virtual bid for the first epoch; tuned on a fresh tuning epoch when absent.
    pub tuning: Option<TuningSummary>,
}

/// Tunes `v_a` on the tuning epoch of `env` with the configured method.
pub fn tune_on_epoch(env: &Environment, epoch_label: &str, tag: &str) -> Result<TuningSummary> {
    let c = &env.config;
    let log = env.epoch(tag, c.n_tune_impressions);
    tune_on_log(env, &log, epoch_label)
}

pub fn tune_on_log(env: &Environment, log: &[Impression], epoch_label: &str) -> Result<TuningSummary> {
    let c = &env.config;
    let bracket = match c.tuner.bracket {
        Some([lo, hi]) => (lo, hi),
        None => default_bracket(log),
    };
    let method = match c.tuner.method {
        TunerKind::Golden => TuneMethod::Golden {
            bracket,
            tol: c.tuner.tol,
            max_iter: c.tuner.max_iter,
        },
        TunerKind::Spsa => TuneMethod::Spsa {
            bracket,
            theta0: vec![0.5 * (bracket.0 + bracket.1)],
            hyper: c.tuner.spsa.clone(),
            seed: c.tuner.seed,
        },
    };
    let evaluator = FrontierEvaluator::new(log, &env.model, c.n_prime)?;
    let out = tune_with(&evaluator, &method)?;
    Ok(TuningSummary {
        epoch: epoch_label.into(),
        method: match c.tuner.method {
            TunerKind::Golden => "golden".into(),
            TunerKind::Spsa => "spsa".into(),
        },
        v_a: out.v_a,
        distance: Some(out.distance),
        utopia: Some(out.utopia),
        bracket: Some([bracket.0, bracket.1]),
        evaluations: out.frontier_trace.len(),
        n_impressions: log.len(),
    })
}

fn context(env: &Environment) -> ArmContext<'_> {
    let c = &env.config;
    ArmContext {
        model: &env.model,
        n_prime: c.n_prime,
        scheme: c.payment_scheme,
        gsp_exponent: c.gsp_exponent,
        floor: c.floor,
        seed: c.seed,
    }
}

/// Serves one arm over `log` and summarizes it without lifts.
pub fn run_treatment(
    log: &[Impression],
    treatment: &Treatment,
    env: &Environment,
) -> Result<TreatmentRow> {
    let arms = run_arms(log, std::slice::from_ref(treatment), &context(env), Assignment::Paired)?;
    let stats = ArmStats::from_arm(&arms[0]);
    Ok(treatment_row("T1", "single", &arms[0], &stats, None))
}

struct EpochRun {
    arms: Vec<ArmResult>,
    stats: Vec<ArmStats>,
}

fn run_epoch(
    env: &Environment,
    log: &[Impression],
    arms: &[(&str, Treatment)],
) -> Result<EpochRun> {
    let treatments: Vec<Treatment> = arms.iter().map(|(_, t)| t.clone()).collect();
    let arms = run_arms(log, &treatments, &context(env), env.config.assignment)?;
    let stats = arms.iter().map(ArmStats::from_arm).collect();
    Ok(EpochRun { arms, stats })
}

fn assignment_name(a: Assignment) -> &'static str {
    match a {
        Assignment::Paired => "paired",
        Assignment::Randomized => "randomized",
    }
}

/// Runs one scenario. The first arm of every epoch is the baseline and
/// serves as the control for lifts.
pub fn run_experiment_suite(
    config: &SimConfig,
    scenario: Scenario,
    inputs: SuiteInputs,
) -> Result<ExperimentReport> {
    let env = Environment::new(config)?;
    let generated;
    let log = match inputs.log {
        Some(l) => l,
        None => {
            generated = env.epoch(EVAL_TAG, config.n_impressions);
            &generated
        }
    };
    if log.is_empty() {
        return Err(Error::invalid("the evaluation log is empty"));
    }

    let mut report = ExperimentReport {
        scenario: scenario.name().into(),
        seed: config.seed,
        assignment: assignment_name(config.assignment).into(),
        payment_scheme: match config.payment_scheme {
            crate::payments::Scheme::Gsp => "gsp".into(),
            crate::payments::Scheme::Vcg => "vcg".into(),
        },
        n_impressions: log.len(),
        tuning: Vec::new(),
        treatments: Vec::new(),
        diversity: Vec::new(),
        shift: Vec::new(),
        distances: Vec::new(),
        categories: Vec::new(),
    };

    let v = if scenario.needs_virtual_bid() {
        let t = match inputs.tuning {
            Some(t) => t,
            None => tune_on_epoch(&env, "T1", TUNE_TAG)?,
        };
        let v = t.v_a;
        report.tuning.push(t);
        v
    } else {
        0.0
    };

    let k = env.layout.k_ads();
    let arms: Vec<(&str, Treatment)> = match scenario {
        Scenario::Externality => vec![
            ("control", Treatment::Baseline),
            ("shuffle", Treatment::Shuffle),
            ("random_top_x_k1", Treatment::RandomTopX { x: k + 1 }),
            ("random_top_x_k2", Treatment::RandomTopX { x: k + 2 }),
        ],
        Scenario::VbGrid => vec![
            ("control", Treatment::Baseline),
            ("tuned", Treatment::Listwise { v_a: v }),
            ("tuned_minus_1", Treatment::Listwise { v_a: v - 1.0 }),
            ("tuned_plus_1", Treatment::Listwise { v_a: v + 1.0 }),
        ],
        Scenario::VbConstant | Scenario::DistShift => vec![
            ("control", Treatment::Baseline),
            ("tuned", Treatment::Listwise { v_a: v }),
            ("constant", Treatment::Listwise { v_a: 1.0 }),
        ],
        Scenario::Diversity => vec![
            ("control", Treatment::Baseline),
            ("tuned", Treatment::Listwise { v_a: v }),
        ],
    };
    let t1 = run_epoch(&env, log, &arms)?;
    push_epoch(&mut report, "T1", log, &arms, &t1);

    if scenario == Scenario::Diversity {
        let control = arm_diversity(log, &t1.arms[0])?;
        for (i, (role, _)) in arms.iter().enumerate() {
            let stats = arm_diversity(log, &t1.arms[i])?;
            let reference = (i > 0).then_some(control.as_slice());
            report
                .diversity
                .extend(diversity_rows("T1", role, &t1.arms[i], &stats, reference));
        }
    }

    if scenario == Scenario::DistShift {
        let (u1, p1) = frontier_sweep(log, &env.model, config.n_prime, &[v, 1.0])?;
        for (role, p) in ["tuned", "constant"].iter().zip(&p1) {
            report.distances.push(DistanceRow {
                epoch: "T1".into(),
                role: (*role).into(),
                v_a: p.v.v_a,
                mean_ctr: p.mean_ctr,
                mean_rev: p.mean_rev,
                distance: distance_to_utopia(p, &u1)?,
            });
        }

        let env2 = Environment::shifted(config)?;
        let retuned = tune_on_epoch(&env2, "T2", &format!("{TUNE_TAG}-t2"))?;
        let v2 = retuned.v_a;
        report.tuning.push(retuned);
        let log2 = env2.epoch(&format!("{EVAL_TAG}-t2"), log.len());
        let arms2: Vec<(&str, Treatment)> = vec![
            ("control", Treatment::Baseline),
            ("stale", Treatment::Listwise { v_a: v }),
            ("constant", Treatment::Listwise { v_a: 1.0 }),
            ("retuned", Treatment::Listwise { v_a: v2 }),
        ];
        let t2 = run_epoch(&env2, &log2, &arms2)?;
        push_epoch(&mut report, "T2", &log2, &arms2, &t2);

        // Same treatment across epochs: control, the T1-tuned bid and v = 1.
        for (role, i1, i2) in [("control", 0, 0), ("stale", 1, 1), ("constant", 2, 2)] {
            report
                .shift
                .push(shift_row(role, &t2.arms[i2], &t2.stats[i2], &t1.stats[i1]));
        }

        let (u2, p2) = frontier_sweep(&log2, &env2.model, config.n_prime, &[v, 1.0, v2])?;
        for (role, p) in ["stale", "constant", "retuned"].iter().zip(&p2) {
            report.distances.push(DistanceRow {
                epoch: "T2".into(),
                role: (*role).into(),
                v_a: p.v.v_a,
                mean_ctr: p.mean_ctr,
                mean_rev: p.mean_rev,
                distance: distance_to_utopia(p, &u2)?,
            });
        }
    }
    Ok(report)
}

fn push_epoch(
    report: &mut ExperimentReport,
    epoch: &str,
    log: &[Impression],
    arms: &[(&str, Treatment)],
    run: &EpochRun,
) {
    for (i, (role, _)) in arms.iter().enumerate() {
        let control = (i > 0).then(|| &run.stats[0]);
        report
            .treatments
            .push(treatment_row(epoch, role, &run.arms[i], &run.stats[i], control));
        report
            .categories
            .extend(category_rows(epoch, role, log, &run.arms[i]));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            n_impressions: 400,
            n_tune_impressions: 200,
            ..SimConfig::default()
        }
    }

    #[test]
    fn scenario_names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        }
        assert!("table9".parse::<Scenario>().is_err());
    }

    #[test]
    fn every_scenario_runs_and_is_reproducible() {
        for s in Scenario::ALL {
            let a = run_experiment_suite(&small(), s, SuiteInputs::default()).unwrap();
            let b = run_experiment_suite(&small(), s, SuiteInputs::default()).unwrap();
            assert_eq!(a.to_json(), b.to_json(), "{}", s.name());
            assert!(a.row("T1", "control").is_some());
            assert!(!a.to_text().is_empty());
        }
    }

    #[test]
    fn dist_shift_has_both_epochs() {
        let r = run_experiment_suite(&small(), Scenario::DistShift, SuiteInputs::default()).unwrap();
        assert_eq!(r.tuning.len(), 2);
        for role in ["control", "stale", "constant", "retuned"] {
            assert!(r.row("T2", role).is_some(), "{role}");
        }
        assert!(r.distance("T2", "stale").is_some());
        assert_eq!(r.shift.len(), 3);
    }

    #[test]
    fn fixed_virtual_bid_skips_tuning() {
        let r = run_experiment_suite(
            &small(),
            Scenario::VbConstant,
            SuiteInputs {
                log: None,
                tuning: Some(TuningSummary::fixed(3.0)),
            },
        )
        .unwrap();
        assert_eq!(r.tuning[0].method, "fixed");
        assert_eq!(r.row("T1", "tuned").unwrap().treatment, Treatment::Listwise { v_a: 3.0 });
    }
}
