//! Virtual-bid allocation: pick the mixed tuple that maximizes expected ad
//! revenue plus the platform's money-metric value of ad clicks.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::ctr::CtrModel;
use crate::error::{Error, Result};
use crate::tuples::generate_tuples;
use crate::types::{CtrVector, Impression, MixedTuple};

/// The platform's valuation of one ad click, in the same money units as CPC bids.
///
/// `extra` holds valuations for further objectives (for instance organic
/// clicks); the deployed objective only prices ad clicks, so the allocator
/// reads `v_a` alone.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VirtualBid {
    pub v_a: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<f64>,
}

impl VirtualBid {
    pub fn new(v_a: f64) -> Self {
        VirtualBid {
            v_a,
            extra: Vec::new(),
        }
    }
}

impl From<f64> for VirtualBid {
    fn from(v_a: f64) -> Self {
        VirtualBid::new(v_a)
    }
}

/// CPC bids keyed by ad id.
pub type BidMap = HashMap<String, f64>;

pub fn bid_map(impression: &Impression) -> BidMap {
    impression
        .ads
        .iter()
        .map(|a| (a.ad_id.clone(), a.bid_cpc))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub chosen: MixedTuple,
    /// Position of `chosen` in the tuple list that was ranked.
    pub tuple_index: usize,
    pub objective_value: f64,
    /// Money-metric ad-CTR term: `v_a * ad_ctr_sum`.
    pub v_ia: f64,
    /// Ad revenue term: sum of bid times predicted CTR over the ad slots.
    pub v_ir: f64,
    pub ad_ctr_sum: f64,
    pub org_ctr_sum: f64,
    /// Predictions for `chosen` from the model used to rank.
    pub ctrs: CtrVector,
}

/// Objective contribution of one tuple: `sum_j x_j * (v_a + b_j)` over ad slots.
pub fn score_tuple(
    impression: &Impression,
    tuple: &MixedTuple,
    ctrs: &CtrVector,
    bids: &BidMap,
    v: &VirtualBid,
) -> Result<f64> {
    if ctrs.len() != tuple.slots.len() {
        return Err(Error::invalid("CTR vector is not aligned with the tuple"));
    }
    let mut total = 0.0;
    for (pos, cand) in tuple.ads() {
        let id = &impression.ads[cand].ad_id;
        let bid = bids
            .get(id)
            .ok_or_else(|| Error::invalid(format!("no bid for ad {id}")))?;
        total += ctrs[pos] * (v.v_a + bid);
    }
    Ok(total)
}

/// Model predictions for a fixed tuple list, laid out for repeated argmax
/// queries at different virtual bids. Scoring here performs exactly the
/// arithmetic of [`score_tuple`].
#[derive(Clone, Debug)]
pub struct ScoredTuples {
    tuples: Vec<MixedTuple>,
    /// Start offset of each tuple's ad entries in `ad_ctr`/`ad_bid`.
    offsets: Vec<usize>,
    ad_ctr: Vec<f64>,
    ad_bid: Vec<f64>,
    ad_ctr_sum: Vec<f64>,
    revenue: Vec<f64>,
    org_ctr_sum: Vec<f64>,
}

impl ScoredTuples {
    pub fn build<M: CtrModel + ?Sized>(
        impression: &Impression,
        tuples: Vec<MixedTuple>,
        model: &M,
    ) -> Result<Self> {
        if tuples.is_empty() {
            return Err(Error::invalid("cannot rank an empty tuple list"));
        }
        let ctrs = model.predict_batch(impression, &tuples)?;
        let bids = bid_map(impression);
        let mut out = ScoredTuples {
            offsets: Vec::with_capacity(tuples.len() + 1),
            ad_ctr: Vec::new(),
            ad_bid: Vec::new(),
            ad_ctr_sum: Vec::with_capacity(tuples.len()),
            revenue: Vec::with_capacity(tuples.len()),
            org_ctr_sum: Vec::with_capacity(tuples.len()),
            tuples,
        };
        for (tuple, x) in out.tuples.iter().zip(&ctrs) {
            if x.len() != tuple.slots.len() {
                return Err(Error::invalid("model returned a misaligned CTR vector"));
            }
            out.offsets.push(out.ad_ctr.len());
            let mut ctr_sum = 0.0;
            let mut revenue = 0.0;
            for (pos, cand) in tuple.ads() {
                let id = &impression.ads[cand].ad_id;
                let bid = *bids
                    .get(id)
                    .ok_or_else(|| Error::invalid(format!("no bid for ad {id}")))?;
                out.ad_ctr.push(x[pos]);
                out.ad_bid.push(bid);
                ctr_sum += x[pos];
                revenue += bid * x[pos];
            }
            out.ad_ctr_sum.push(ctr_sum);
            out.revenue.push(revenue);
            out.org_ctr_sum.push(x.organic_sum(tuple));
        }
        out.offsets.push(out.ad_ctr.len());
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuples(&self) -> &[MixedTuple] {
        &self.tuples
    }

    pub fn score(&self, index: usize, v_a: f64) -> f64 {
        let range = self.offsets[index]..self.offsets[index + 1];
        let mut total = 0.0;
        for (x, b) in self.ad_ctr[range.clone()].iter().zip(&self.ad_bid[range]) {
            total += x * (v_a + b);
        }
        total
    }

    /// Index of the best tuple at `v_a` and its score. The first maximizer
    /// in list order wins ties.
    pub fn best(&self, v_a: f64) -> (usize, f64) {
        let mut best = (0, self.score(0, v_a));
        for i in 1..self.tuples.len() {
            let s = self.score(i, v_a);
            if s > best.1 {
                best = (i, s);
            }
        }
        best
    }

    pub fn ad_ctr_sum(&self, index: usize) -> f64 {
        self.ad_ctr_sum[index]
    }

    pub fn revenue(&self, index: usize) -> f64 {
        self.revenue[index]
    }

    pub fn org_ctr_sum(&self, index: usize) -> f64 {
        self.org_ctr_sum[index]
    }

    /// Largest ad-CTR sum over the list (first maximizer on ties).
    pub fn max_ad_ctr(&self) -> f64 {
        self.ad_ctr_sum
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn allocation<M: CtrModel + ?Sized>(
        &self,
        impression: &Impression,
        model: &M,
        v: &VirtualBid,
    ) -> Result<AllocationResult> {
        let (index, objective_value) = self.best(v.v_a);
        let chosen = self.tuples[index].clone();
        let ctrs = model.predict(impression, &chosen)?;
        Ok(AllocationResult {
            chosen,
            tuple_index: index,
            objective_value,
            v_ia: v.v_a * self.ad_ctr_sum[index],
            v_ir: self.revenue[index],
            ad_ctr_sum: self.ad_ctr_sum[index],
            org_ctr_sum: self.org_ctr_sum[index],
            ctrs,
        })
    }
}

/// Pick the best of `tuples` under the virtual-bid objective.
pub fn rank_listwise<M: CtrModel + ?Sized>(
    tuples: &[MixedTuple],
    impression: &Impression,
    model: &M,
    v: &VirtualBid,
) -> Result<AllocationResult> {
    ScoredTuples::build(impression, tuples.to_vec(), model)?.allocation(impression, model, v)
}

/// Enumerate the top-`n_prime` window and return its best tuple.
pub fn optimize_impression<M: CtrModel + ?Sized>(
    impression: &Impression,
    model: &M,
    v: &VirtualBid,
    n_prime: usize,
) -> Result<AllocationResult> {
    let tuples = generate_tuples(impression, n_prime)?;
    ScoredTuples::build(impression, tuples, model)?.allocation(impression, model, v)
}
