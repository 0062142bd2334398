//! Per-ad charges for a chosen allocation.
//!
//! GSP ranks the shown ads by pointwise weighted eCPM (`bid * pCTR^t`) and
//! charges each the smallest price that keeps its rank. VCG charges each
//! advertiser the welfare the others lose because it participated, where
//! welfare is the virtual-bid objective and the platform's click valuation
//! counts as another bidder.

use serde::{Deserialize, Serialize};

use crate::allocator::{AllocationResult, BidMap, ScoredTuples, VirtualBid};
use crate::ctr::CtrModel;
use crate::error::{Error, Result};
use crate::tuples::{generate_counterfactual_tuples, generate_tuples};
use crate::types::{CtrVector, Impression};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Gsp,
    Vcg,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gsp" => Ok(Scheme::Gsp),
            "vcg" => Ok(Scheme::Vcg),
            other => Err(Error::invalid(format!("unknown payment scheme {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdPayment {
    pub ad_id: String,
    pub scheme: Scheme,
    /// `None` when the ad's predicted CTR in the chosen tuple is zero, which
    /// leaves a per-click VCG price undefined.
    pub price_per_click: Option<f64>,
    pub expected_payment: f64,
    /// Candidate index and page position of the ad.
    #[serde(skip)]
    pub candidate: usize,
    #[serde(skip)]
    pub position: usize,
}

impl AdPayment {
    pub fn price_per_click(&self) -> Result<f64> {
        self.price_per_click.ok_or_else(|| {
            Error::DivisionGuard(format!(
                "per-click price of {} is undefined at zero predicted CTR",
                self.ad_id
            ))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaymentSchedule {
    pub scheme: Scheme,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gsp_exponent: Option<f64>,
    pub floor_price: f64,
    /// One entry per allocated ad, in page-position order.
    pub payments: Vec<AdPayment>,
}

impl PaymentSchedule {
    /// Payment entry for the ad shown at `position`, if any.
    pub fn at_position(&self, position: usize) -> Option<&AdPayment> {
        self.payments.iter().find(|p| p.position == position)
    }
}

/// GSP charges for the ads of `allocation`.
///
/// `pointwise_ctrs` must be the pointwise model's prediction for the chosen
/// tuple; it drives the ranking and the price. Expected payments use the
/// allocation's own CTRs.
pub fn gsp_payments(
    impression: &Impression,
    allocation: &AllocationResult,
    pointwise_ctrs: &CtrVector,
    bids: &BidMap,
    t: f64,
    floor: f64,
) -> Result<PaymentSchedule> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid(format!("GSP exponent must be >= 0, got {t}")));
    }
    if !(floor.is_finite() && floor >= 0.0) {
        return Err(Error::invalid(format!("floor must be >= 0, got {floor}")));
    }
    let tuple = &allocation.chosen;
    if pointwise_ctrs.len() != tuple.slots.len() {
        return Err(Error::invalid("pointwise CTRs are not aligned with the tuple"));
    }
    struct Ranked<'a> {
        id: &'a str,
        candidate: usize,
        position: usize,
        bid: f64,
        weight: f64,
    }
    let mut ranked = Vec::new();
    for (position, candidate) in tuple.ads() {
        let id = impression.ads[candidate].ad_id.as_str();
        let bid = *bids
            .get(id)
            .ok_or_else(|| Error::invalid(format!("no bid for ad {id}")))?;
        ranked.push(Ranked {
            id,
            candidate,
            position,
            bid,
            weight: pointwise_ctrs[position].powf(t),
        });
    }
    // Stable: equal eCPMs keep page-position order.
    ranked.sort_by(|a, b| (b.bid * b.weight).total_cmp(&(a.bid * a.weight)));

    let mut payments = Vec::with_capacity(ranked.len());
    for (i, ad) in ranked.iter().enumerate() {
        let price = match ranked.get(i + 1) {
            Some(next) => {
                if ad.weight == 0.0 {
                    return Err(Error::DivisionGuard(format!(
                        "ad {} has zero pointwise CTR",
                        ad.id
                    )));
                }
                floor.max(next.bid * next.weight / ad.weight)
            }
            None => floor,
        };
        payments.push(AdPayment {
            ad_id: ad.id.to_owned(),
            scheme: Scheme::Gsp,
            price_per_click: Some(price),
            expected_payment: price * allocation.ctrs[ad.position],
            candidate: ad.candidate,
            position: ad.position,
        });
    }
    payments.sort_by_key(|p| p.position);
    Ok(PaymentSchedule {
        scheme: Scheme::Gsp,
        gsp_exponent: Some(t),
        floor_price: floor,
        payments,
    })
}

/// Everything [`vcg_payments`] computes, including the welfare terms behind
/// each charge.
#[derive(Clone, Debug, PartialEq)]
pub struct VcgOutcome {
    pub allocation: AllocationResult,
    pub schedule: PaymentSchedule,
    /// Per allocated ad, in `schedule.payments` order: best welfare the others
    /// reach without the ad, and the others' welfare in the realized tuple.
    pub counterfactual_welfare: Vec<f64>,
    pub others_welfare: Vec<f64>,
}

/// VCG charges for the allocation chosen at `v`.
///
/// Each allocated ad pays the best objective achievable once it is removed
/// from the candidate list (same `n_prime` window, so the next pre-ranked ad
/// moves in) minus everyone else's share of the realized objective. The
/// platform's `v_a * x` terms, the ad's own included, count as everyone else's.
pub fn vcg_payments<M: CtrModel + ?Sized>(
    impression: &Impression,
    model: &M,
    v: &VirtualBid,
    n_prime: usize,
) -> Result<PaymentSchedule> {
    Ok(vcg_outcome(impression, model, v, n_prime)?.schedule)
}

pub fn vcg_outcome<M: CtrModel + ?Sized>(
    impression: &Impression,
    model: &M,
    v: &VirtualBid,
    n_prime: usize,
) -> Result<VcgOutcome> {
    let tuples = generate_tuples(impression, n_prime)?;
    let scored = ScoredTuples::build(impression, tuples, model)?;
    let allocation = scored.allocation(impression, model, v)?;

    let mut payments = Vec::new();
    let mut counterfactual_welfare = Vec::new();
    let mut others_welfare = Vec::new();
    for (position, candidate) in allocation.chosen.ads() {
        let ad = &impression.ads[candidate];
        let x = allocation.ctrs[position];
        let others = allocation.objective_value - ad.bid_cpc * x;

        let reduced = impression.without_ad(candidate);
        let cf_tuples = generate_counterfactual_tuples(&reduced, n_prime);
        let best_without = ScoredTuples::build(&reduced, cf_tuples, model)?
            .best(v.v_a)
            .1;

        let expected_payment = best_without - others;
        payments.push(AdPayment {
            ad_id: ad.ad_id.clone(),
            scheme: Scheme::Vcg,
            price_per_click: (x > 0.0).then(|| expected_payment / x),
            expected_payment,
            candidate,
            position,
        });
        counterfactual_welfare.push(best_without);
        others_welfare.push(others);
    }
    Ok(VcgOutcome {
        allocation,
        schedule: PaymentSchedule {
            scheme: Scheme::Vcg,
            gsp_exponent: None,
            floor_price: 0.0,
            payments,
        },
        counterfactual_welfare,
        others_welfare,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::{bid_map, optimize_impression};
    use crate::ctr::{predict_pointwise, InteractionConfig, ModelConfig, SyntheticJointModel};
    use crate::types::{AdCandidate, OrganicItem, PositionLayout};

    fn setup(
        bids: &[f64],
        ctrs: &[f64],
        k: usize,
        same: f64,
    ) -> (Impression, SyntheticJointModel) {
        let imp = Impression {
            impression_id: "i".into(),
            context_features: vec![],
            ads: bids
                .iter()
                .enumerate()
                .map(|(i, b)| AdCandidate {
                    ad_id: format!("a{i}"),
                    bid_cpc: *b,
                    subcategory: "s".into(),
                    features: vec![],
                })
                .collect(),
            organics: vec![OrganicItem {
                item_id: "o".into(),
                subcategory: "t".into(),
                features: vec![],
            }],
            layout: PositionLayout::new(k + 1, (0..k).collect()).unwrap(),
            page_subcategory: None,
        };
        let mut base: std::collections::BTreeMap<String, f64> = ctrs
            .iter()
            .enumerate()
            .map(|(i, c)| (format!("a{i}"), *c))
            .collect();
        base.insert("o".into(), 0.3);
        let model = SyntheticJointModel::new(ModelConfig {
            position_multipliers: vec![1.0; k + 1],
            interaction: InteractionConfig {
                default_same: same,
                default_cross: 1.0,
                overrides: vec![],
            },
            base_ctr: base,
        })
        .unwrap();
        (imp, model)
    }

    #[test]
    fn gsp_next_ecpm_prices() {
        let (imp, model) = setup(&[2.0, 1.0], &[0.1, 0.1], 2, 1.0);
        let alloc = optimize_impression(&imp, &model, &VirtualBid::new(0.0), 2).unwrap();
        let pw = predict_pointwise(&model, &imp, &alloc.chosen).unwrap();
        let s = gsp_payments(&imp, &alloc, &pw, &bid_map(&imp), 1.0, 0.0).unwrap();
        let prices: Vec<f64> = s.payments.iter().map(|p| p.price_per_click.unwrap()).collect();
        assert!((prices[0] - 1.0).abs() < 1e-15);
        assert_eq!(prices[1], 0.0);
        assert_eq!(s.payments[0].ad_id, "a0");
    }

    #[test]
    fn gsp_single_ad_pays_floor() {
        let (imp, model) = setup(&[2.0, 1.0], &[0.1, 0.1], 1, 1.0);
        let alloc = optimize_impression(&imp, &model, &VirtualBid::new(0.0), 2).unwrap();
        let pw = predict_pointwise(&model, &imp, &alloc.chosen).unwrap();
        let s = gsp_payments(&imp, &alloc, &pw, &bid_map(&imp), 1.0, 0.25).unwrap();
        assert_eq!(s.payments.len(), 1);
        assert_eq!(s.payments[0].price_per_click, Some(0.25));
    }

    #[test]
    fn gsp_argument_errors() {
        let (imp, model) = setup(&[2.0, 1.0], &[0.1, 0.1], 2, 1.0);
        let alloc = optimize_impression(&imp, &model, &VirtualBid::new(0.0), 2).unwrap();
        let pw = predict_pointwise(&model, &imp, &alloc.chosen).unwrap();
        assert!(matches!(
            gsp_payments(&imp, &alloc, &pw, &bid_map(&imp), -1.0, 0.0),
            Err(Error::InvalidArgument(_))
        ));
        let zero = CtrVector::new(vec![0.0, 0.0, 0.3]).unwrap();
        assert!(matches!(
            gsp_payments(&imp, &alloc, &zero, &bid_map(&imp), 1.0, 0.0),
            Err(Error::DivisionGuard(_))
        ));
    }

    #[test]
    fn vcg_single_slot_is_second_price() {
        // eCPMs 0.3 and 0.2.
        let (imp, model) = setup(&[3.0, 2.0], &[0.1, 0.1], 1, 1.0);
        let out = vcg_outcome(&imp, &model, &VirtualBid::new(0.0), 2).unwrap();
        assert_eq!(out.schedule.payments.len(), 1);
        let p = &out.schedule.payments[0];
        assert_eq!(p.ad_id, "a0");
        assert!((p.expected_payment - 0.2).abs() < 1e-15);
        assert!((p.price_per_click.unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn vcg_sole_bidder_pays_nothing() {
        let (imp, model) = setup(&[3.0], &[0.1], 1, 1.0);
        let s = vcg_payments(&imp, &model, &VirtualBid::new(0.0), 1).unwrap();
        assert_eq!(s.payments.len(), 1);
        assert_eq!(s.payments[0].expected_payment, 0.0);
    }

    #[test]
    fn vcg_unallocated_ads_are_not_charged() {
        let (imp, model) = setup(&[3.0, 2.0, 1.0], &[0.1, 0.1, 0.1], 1, 1.0);
        let s = vcg_payments(&imp, &model, &VirtualBid::new(0.0), 3).unwrap();
        assert_eq!(s.payments.len(), 1);
        assert!(s.payments.iter().all(|p| p.ad_id == "a0"));
    }

    #[test]
    fn vcg_platform_valuation_can_make_payments_negative() {
        // With v_a > 0 the platform values the winner's clicks; removing the
        // winner costs the platform more than the runner-up returns.
        let (imp, model) = setup(&[1.0, 0.1], &[0.5, 0.01], 1, 1.0);
        let out = vcg_outcome(&imp, &model, &VirtualBid::new(1.0), 2).unwrap();
        let p = &out.schedule.payments[0];
        assert_eq!(p.ad_id, "a0");
        // 1.1 * 0.01 - (2.0 * 0.5 - 1.0 * 0.5)
        assert!((p.expected_payment - (0.011 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn zero_ctr_leaves_price_undefined() {
        let p = AdPayment {
            ad_id: "a".into(),
            scheme: Scheme::Vcg,
            price_per_click: None,
            expected_payment: 0.0,
            candidate: 0,
            position: 0,
        };
        assert!(matches!(p.price_per_click(), Err(Error::DivisionGuard(_))));
    }
}
