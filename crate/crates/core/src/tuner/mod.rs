//! Data-driven choice of the virtual bid.
//!
//! For a log of impressions, every candidate `v_a` induces an allocation per
//! impression and hence a point on the (mean ad-CTR, mean ad revenue)
//! possibility frontier. The utopia point pairs the best mean ad-CTR with the
//! best mean revenue, each optimized on its own. The tuner searches for the
//! `v_a` whose frontier point is closest to the utopia point after normalizing
//! each axis by its utopia coordinate.

mod golden;
mod spsa;

pub use golden::{golden_search, PHI};
pub use spsa::{spsa, spsa_projected, SpsaHyperparams};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocator::{optimize_impression, ScoredTuples, VirtualBid};
use crate::ctr::CtrModel;
use crate::error::{Error, Result};
use crate::tuples::generate_tuples;
use crate::types::Impression;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtopiaPoint {
    /// Mean over impressions of the largest achievable ad-CTR sum.
    pub u_ctr: f64,
    /// Mean over impressions of the revenue term at `v_a = 0`.
    pub u_rev: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub v: VirtualBid,
    pub mean_ctr: f64,
    pub mean_rev: f64,
}

/// Normalized L2 distance between a frontier point and the utopia point.
pub fn distance_to_utopia(p: &FrontierPoint, u: &UtopiaPoint) -> Result<f64> {
    if !(u.u_ctr > 0.0 && u.u_rev > 0.0) {
        return Err(Error::Normalization(format!(
            "utopia point ({}, {}) has a non-positive coordinate",
            u.u_ctr, u.u_rev
        )));
    }
    let dc = p.mean_ctr / u.u_ctr - 1.0;
    let dr = p.mean_rev / u.u_rev - 1.0;
    Ok((dc * dc + dr * dr).sqrt())
}

pub fn utopia_point<M: CtrModel + ?Sized>(
    log: &[Impression],
    model: &M,
    n_prime: usize,
) -> Result<UtopiaPoint> {
    Ok(frontier_sweep(log, model, n_prime, &[])?.0)
}

/// Utopia point and the frontier points at every `v_a` in `grid`, in one
/// pass over the log. Memory stays flat in the log length, unlike
/// [`FrontierEvaluator`]; results are identical to it.
pub fn frontier_sweep<M: CtrModel + ?Sized>(
    log: &[Impression],
    model: &M,
    n_prime: usize,
    grid: &[f64],
) -> Result<(UtopiaPoint, Vec<FrontierPoint>)> {
    if log.is_empty() {
        return Err(Error::invalid("frontier needs a non-empty log"));
    }
    let rows = log
        .par_iter()
        .map(|imp| {
            let t = ScoredTuples::build(imp, generate_tuples(imp, n_prime)?, model)?;
            let mut row = Vec::with_capacity(2 + 2 * grid.len());
            row.push(t.max_ad_ctr());
            row.push(t.revenue(t.best(0.0).0));
            for &v in grid {
                let i = t.best(v).0;
                row.push(t.ad_ctr_sum(i));
                row.push(t.revenue(i));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sums = vec![0.0; 2 + 2 * grid.len()];
    for row in &rows {
        for (s, x) in sums.iter_mut().zip(row) {
            *s += x;
        }
    }
    let n = log.len() as f64;
    let utopia = UtopiaPoint {
        u_ctr: sums[0] / n,
        u_rev: sums[1] / n,
    };
    let points = grid
        .iter()
        .enumerate()
        .map(|(k, &v)| FrontierPoint {
            v: VirtualBid::new(v),
            mean_ctr: sums[2 + 2 * k] / n,
            mean_rev: sums[3 + 2 * k] / n,
        })
        .collect();
    Ok((utopia, points))
}

/// Mean allocation outcome over `log` when every impression is optimized at `v`.
pub fn frontier_point<M: CtrModel + ?Sized>(
    log: &[Impression],
    model: &M,
    n_prime: usize,
    v: &VirtualBid,
) -> Result<FrontierPoint> {
    if log.is_empty() {
        return Err(Error::invalid("frontier needs a non-empty log"));
    }
    let results = log
        .par_iter()
        .map(|imp| optimize_impression(imp, model, v, n_prime))
        .collect::<Result<Vec<_>>>()?;
    let n = results.len() as f64;
    let (ctr, rev) = results
        .iter()
        .fold((0.0, 0.0), |(c, r), a| (c + a.ad_ctr_sum, r + a.v_ir));
    Ok(FrontierPoint {
        v: v.clone(),
        mean_ctr: ctr / n,
        mean_rev: rev / n,
    })
}

/// Per-impression model predictions cached once, so that frontier points at
/// many virtual bids cost only the argmax. Results are identical to
/// [`frontier_point`].
pub struct FrontierEvaluator {
    tables: Vec<ScoredTuples>,
}

impl FrontierEvaluator {
    pub fn new<M: CtrModel + ?Sized>(log: &[Impression], model: &M, n_prime: usize) -> Result<Self> {
        if log.is_empty() {
            return Err(Error::invalid("tuning needs a non-empty log"));
        }
        let tables = log
            .par_iter()
            .map(|imp| ScoredTuples::build(imp, generate_tuples(imp, n_prime)?, model))
            .collect::<Result<Vec<_>>>()?;
        Ok(FrontierEvaluator { tables })
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn utopia(&self) -> Result<UtopiaPoint> {
        let n = self.tables.len() as f64;
        let (ctr, rev) = self.tables.iter().fold((0.0, 0.0), |(c, r), t| {
            let (i, _) = t.best(0.0);
            (c + t.max_ad_ctr(), r + t.revenue(i))
        });
        Ok(UtopiaPoint {
            u_ctr: ctr / n,
            u_rev: rev / n,
        })
    }

    pub fn frontier(&self, v: &VirtualBid) -> FrontierPoint {
        let n = self.tables.len() as f64;
        let (ctr, rev) = self.tables.iter().fold((0.0, 0.0), |(c, r), t| {
            let (i, _) = t.best(v.v_a);
            (c + t.ad_ctr_sum(i), r + t.revenue(i))
        });
        FrontierPoint {
            v: v.clone(),
            mean_ctr: ctr / n,
            mean_rev: rev / n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum TuneMethod {
    Golden {
        bracket: (f64, f64),
        tol: f64,
        max_iter: usize,
    },
    Spsa {
        bracket: (f64, f64),
        theta0: Vec<f64>,
        hyper: SpsaHyperparams,
        seed: u64,
    },
}

impl TuneMethod {
    pub fn bracket(&self) -> (f64, f64) {
        match self {
            TuneMethod::Golden { bracket, .. } | TuneMethod::Spsa { bracket, .. } => *bracket,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub v_a: f64,
    pub mean_ctr: f64,
    pub mean_rev: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub v_a: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub extra: Vec<f64>,
    pub distance: f64,
    pub utopia: UtopiaPoint,
    pub frontier: FrontierPoint,
    /// Every upper-level evaluation, in evaluation order.
    pub frontier_trace: Vec<TracePoint>,
}

impl TuneOutcome {
    pub fn virtual_bid(&self) -> VirtualBid {
        VirtualBid {
            v_a: self.v_a,
            extra: self.extra.clone(),
        }
    }
}

/// Bracket `[0, 10 * largest bid in the log]`.
pub fn default_bracket(log: &[Impression]) -> (f64, f64) {
    let max_bid = log
        .iter()
        .flat_map(|i| i.ads.iter().map(|a| a.bid_cpc))
        .fold(0.0, f64::max);
    (0.0, 10.0 * max_bid)
}

/// Solve the bilevel program: search `v_a` in the bracket, scoring each
/// candidate by the distance of its frontier point from the utopia point.
pub fn tune_virtual_bid<M: CtrModel + ?Sized>(
    log: &[Impression],
    model: &M,
    n_prime: usize,
    method: &TuneMethod,
) -> Result<TuneOutcome> {
    let evaluator = FrontierEvaluator::new(log, model, n_prime)?;
    tune_with(&evaluator, method)
}

pub fn tune_with(evaluator: &FrontierEvaluator, method: &TuneMethod) -> Result<TuneOutcome> {
    let (lo, hi) = method.bracket();
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
        return Err(Error::invalid(format!(
            "bracket [{lo}, {hi}] must satisfy 0 <= lo <= hi"
        )));
    }
    let utopia = evaluator.utopia()?;
    // Surfaces a degenerate utopia point before any search starts.
    distance_to_utopia(&evaluator.frontier(&VirtualBid::new(lo)), &utopia)?;

    let mut trace = Vec::new();
    let mut objective = |v: &VirtualBid| {
        let p = evaluator.frontier(v);
        let d = distance_to_utopia(&p, &utopia).expect("utopia validated above");
        trace.push(TracePoint {
            v_a: v.v_a,
            mean_ctr: p.mean_ctr,
            mean_rev: p.mean_rev,
            distance: d,
        });
        d
    };

    let v = match method {
        _ if lo == hi => VirtualBid::new(lo),
        TuneMethod::Golden { tol, max_iter, .. } => {
            let x = golden_search(|x| objective(&VirtualBid::new(x)), lo, hi, *tol, *max_iter)?;
            VirtualBid::new(x)
        }
        TuneMethod::Spsa {
            theta0,
            hyper,
            seed,
            ..
        } => {
            let clamp = |t: &[f64]| VirtualBid {
                v_a: t[0].clamp(lo, hi),
                extra: t[1..].to_vec(),
            };
            let theta = spsa_projected(
                |t| objective(&clamp(t)),
                theta0,
                hyper,
                *seed,
                |t| t[0] = t[0].clamp(lo, hi),
            )?;
            clamp(&theta)
        }
    };
    let frontier = evaluator.frontier(&v);
    let distance = distance_to_utopia(&frontier, &utopia)?;
    Ok(TuneOutcome {
        v_a: v.v_a,
        extra: v.extra.clone(),
        distance,
        utopia,
        frontier,
        frontier_trace: trace,
    })
}
