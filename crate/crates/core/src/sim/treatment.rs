//! Experiment arms and their per-impression outcomes.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocator::{bid_map, AllocationResult, ScoredTuples, VirtualBid};
use crate::ctr::{predict_pointwise, CtrModel, SyntheticJointModel};
use crate::error::{Error, Result};
use crate::payments::{gsp_payments, vcg_outcome, PaymentSchedule, Scheme};
use crate::sim::config::Assignment;
use crate::sim::env::stream;
use crate::tuples::{assemble, generate_tuples};
use crate::types::{CtrVector, Impression, MixedTuple, Slot};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Treatment {
    /// Top `K_ads` pre-ranked ads in pre-rank order, charged by GSP.
    Baseline,
    /// The baseline's ads in a uniformly random order.
    Shuffle,
    /// `K_ads` ads drawn uniformly from the top `x` candidates, random order.
    RandomTopX { x: usize },
    /// Virtual-bid allocation at `v_a`.
    Listwise { v_a: f64 },
}

impl Treatment {
    pub fn label(&self) -> String {
        match self {
            Treatment::Baseline => "baseline".into(),
            Treatment::Shuffle => "shuffle".into(),
            Treatment::RandomTopX { x } => format!("random_top_x({x})"),
            Treatment::Listwise { v_a } => format!("listwise(v={v_a:.4})"),
        }
    }

    fn validate(&self, k_ads: usize, n_ads: usize) -> Result<()> {
        match *self {
            Treatment::RandomTopX { x } if x < k_ads || x > n_ads => Err(Error::invalid(format!(
                "random_top_x needs {k_ads} <= X <= {n_ads}, got {x}"
            ))),
            Treatment::Listwise { v_a } if !v_a.is_finite() => {
                Err(Error::invalid("virtual bid must be finite"))
            }
            _ => Ok(()),
        }
    }
}

/// Everything an arm needs besides the log.
#[derive(Clone, Copy, Debug)]
pub struct ArmContext<'a> {
    /// Ground truth, also used by the listwise ranker.
    pub model: &'a SyntheticJointModel,
    pub n_prime: usize,
    /// Scheme for listwise arms; the other arms are always charged by GSP.
    pub scheme: Scheme,
    pub gsp_exponent: f64,
    pub floor: f64,
    pub seed: u64,
}

/// Expected (model) and realized (sampled) metrics of one served impression.
#[derive(Clone, Debug, PartialEq)]
pub struct ImpressionOutcome {
    pub tuple: MixedTuple,
    pub ad_ctr: f64,
    /// Advertiser value: sum of bid times click probability over ads.
    pub ad_value: f64,
    /// Expected charged revenue under the arm's payment scheme.
    pub revenue: f64,
    pub org_ctr: f64,
    pub ad_clicks: f64,
    pub org_clicks: f64,
    pub realized_revenue: f64,
}

/// Independent per-slot coin flips. One uniform is consumed per slot,
/// including empty ones, so arms sharing a stream see common random numbers.
pub fn realize_clicks<R: Rng + ?Sized>(tuple: &MixedTuple, ctrs: &CtrVector, rng: &mut R) -> Vec<bool> {
    tuple
        .slots
        .iter()
        .enumerate()
        .map(|(p, slot)| {
            let u: f64 = rng.random();
            *slot != Slot::Empty && u < ctrs[p]
        })
        .collect()
}

/// Allocation record for a tuple chosen by something other than the ranker.
fn fixed_allocation(
    impression: &Impression,
    model: &SyntheticJointModel,
    tuple: MixedTuple,
) -> Result<AllocationResult> {
    let ctrs = model.predict(impression, &tuple)?;
    let ad_ctr_sum = ctrs.ad_sum(&tuple);
    let v_ir: f64 = tuple
        .ads()
        .map(|(p, c)| impression.ads[c].bid_cpc * ctrs[p])
        .sum();
    Ok(AllocationResult {
        org_ctr_sum: ctrs.organic_sum(&tuple),
        chosen: tuple,
        tuple_index: 0,
        objective_value: v_ir,
        v_ia: 0.0,
        v_ir,
        ad_ctr_sum,
        ctrs,
    })
}

fn ad_tuple(impression: &Impression, ads: &[usize]) -> MixedTuple {
    let ads: Vec<Option<usize>> = ads.iter().copied().map(Some).collect();
    assemble(impression, &ads)
}

fn gsp_for(
    impression: &Impression,
    allocation: &AllocationResult,
    ctx: &ArmContext,
) -> Result<PaymentSchedule> {
    let pointwise = predict_pointwise(ctx.model, impression, &allocation.chosen)?;
    gsp_payments(
        impression,
        allocation,
        &pointwise,
        &bid_map(impression),
        ctx.gsp_exponent,
        ctx.floor,
    )
}

fn serve(
    impression: &Impression,
    treatment: &Treatment,
    scored: Option<&ScoredTuples>,
    ctx: &ArmContext,
) -> Result<(AllocationResult, PaymentSchedule)> {
    let k = impression.layout.k_ads();
    let id = &impression.impression_id;
    match treatment {
        Treatment::Baseline => {
            let alloc = fixed_allocation(impression, ctx.model, ad_tuple(impression, &(0..k).collect::<Vec<_>>()))?;
            let pay = gsp_for(impression, &alloc, ctx)?;
            Ok((alloc, pay))
        }
        Treatment::Shuffle => {
            let mut order: Vec<usize> = (0..k).collect();
            order.shuffle(&mut stream(ctx.seed, "shuffle", id));
            let alloc = fixed_allocation(impression, ctx.model, ad_tuple(impression, &order))?;
            let pay = gsp_for(impression, &alloc, ctx)?;
            Ok((alloc, pay))
        }
        Treatment::RandomTopX { x } => {
            let mut rng = stream(ctx.seed, &format!("top_x:{x}"), id);
            let mut picked = index::sample(&mut rng, *x, k).into_vec();
            picked.shuffle(&mut rng);
            let alloc = fixed_allocation(impression, ctx.model, ad_tuple(impression, &picked))?;
            let pay = gsp_for(impression, &alloc, ctx)?;
            Ok((alloc, pay))
        }
        Treatment::Listwise { v_a } => {
            let v = VirtualBid::new(*v_a);
            match ctx.scheme {
                Scheme::Gsp => {
                    let scored = scored.expect("listwise arms receive scored tuples");
                    let alloc = scored.allocation(impression, ctx.model, &v)?;
                    let pay = gsp_for(impression, &alloc, ctx)?;
                    Ok((alloc, pay))
                }
                Scheme::Vcg => {
                    let out = vcg_outcome(impression, ctx.model, &v, ctx.n_prime)?;
                    Ok((out.allocation, out.schedule))
                }
            }
        }
    }
}

fn outcome(
    impression: &Impression,
    allocation: AllocationResult,
    payments: &PaymentSchedule,
    seed: u64,
) -> ImpressionOutcome {
    let tuple = allocation.chosen;
    let x = &allocation.ctrs;
    let clicks = realize_clicks(&tuple, x, &mut stream(seed, "clicks", &impression.impression_id));
    let mut realized_revenue = 0.0;
    let mut revenue = 0.0;
    for p in &payments.payments {
        revenue += p.expected_payment;
        if clicks[p.position] {
            realized_revenue += p.price_per_click.unwrap_or(0.0);
        }
    }
    let ad_clicks = tuple.ads().filter(|(p, _)| clicks[*p]).count() as f64;
    let org_clicks = tuple.organics().filter(|(p, _)| clicks[*p]).count() as f64;
    ImpressionOutcome {
        ad_ctr: allocation.ad_ctr_sum,
        ad_value: allocation.v_ir,
        revenue,
        org_ctr: allocation.org_ctr_sum,
        ad_clicks,
        org_clicks,
        realized_revenue,
        tuple,
    }
}

/// Per-impression outcomes of one arm, with the log index of each impression
/// it served (ascending).
#[derive(Clone, Debug)]
pub struct ArmResult {
    pub treatment: Treatment,
    pub served: Vec<(usize, ImpressionOutcome)>,
}

/// Serves `log` under every treatment. With paired assignment each arm sees
/// every impression; with randomized assignment each impression is routed
/// to one arm by its own stream.
pub fn run_arms(
    log: &[Impression],
    treatments: &[Treatment],
    ctx: &ArmContext,
    assignment: Assignment,
) -> Result<Vec<ArmResult>> {
    if treatments.is_empty() {
        return Err(Error::invalid("an experiment needs at least one arm"));
    }
    let per_impression = log
        .par_iter()
        .map(|imp| -> Result<Vec<Option<ImpressionOutcome>>> {
            let k = imp.layout.k_ads();
            for t in treatments {
                t.validate(k, imp.ads.len())?;
            }
            let active: Vec<bool> = match assignment {
                Assignment::Paired => vec![true; treatments.len()],
                Assignment::Randomized => {
                    let arm = stream(ctx.seed, "assign", &imp.impression_id)
                        .random_range(0..treatments.len());
                    (0..treatments.len()).map(|i| i == arm).collect()
                }
            };
            let needs_table = ctx.scheme == Scheme::Gsp
                && treatments
                    .iter()
                    .zip(&active)
                    .any(|(t, a)| *a && matches!(t, Treatment::Listwise { .. }));
            let scored = if needs_table {
                Some(ScoredTuples::build(imp, generate_tuples(imp, ctx.n_prime)?, ctx.model)?)
            } else {
                None
            };
            treatments
                .iter()
                .zip(&active)
                .map(|(t, a)| {
                    if !a {
                        return Ok(None);
                    }
                    let (alloc, pay) = serve(imp, t, scored.as_ref(), ctx)?;
                    Ok(Some(outcome(imp, alloc, &pay, ctx.seed)))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut arms: Vec<ArmResult> = treatments
        .iter()
        .map(|t| ArmResult {
            treatment: t.clone(),
            served: Vec::new(),
        })
        .collect();
    for (i, row) in per_impression.into_iter().enumerate() {
        for (arm, o) in arms.iter_mut().zip(row) {
            if let Some(o) = o {
                arm.served.push((i, o));
            }
        }
    }
    Ok(arms)
}
