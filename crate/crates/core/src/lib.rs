//! Virtual-bid ad allocation for pages that blend ads with organic content.
//!
//! The crate is organized along the serving flow:
//!
//! * [`types`] and [`tuples`]: impressions, slot layouts and the enumeration
//!   of candidate mixed tuples.
//! * [`ctr`]: click models that see the whole tuple (joint effects) or one
//!   item at a time.
//! * [`allocator`]: the virtual-bid objective and the per-impression argmax.
//! * [`payments`]: GSP and VCG charges for a chosen tuple.
//! * [`tuner`]: utopia-point search for the virtual bid over a log.
//! * [`sim`]: synthetic impression logs, click realization and the experiment
//!   scenarios.
//! * [`pipeline`]: the whole flow end to end.

pub mod allocator;
pub mod ctr;
pub mod error;
pub mod io;
pub mod metrics;
pub mod payments;
pub mod pipeline;
pub mod sim;
pub mod tuner;
pub mod tuples;
pub mod types;

pub use allocator::{
    optimize_impression, rank_listwise, score_tuple, AllocationResult, BidMap, VirtualBid,
};
pub use ctr::{predict_listwise, predict_pointwise, CtrModel, Pointwise, SyntheticJointModel};
pub use error::{Error, Result};
pub use metrics::lift;
pub use payments::{gsp_payments, vcg_payments, PaymentSchedule, Scheme};
pub use tuner::{
    distance_to_utopia, frontier_point, golden_search, spsa, tune_virtual_bid, utopia_point,
    FrontierPoint, SpsaHyperparams, UtopiaPoint,
};
pub use tuples::generate_tuples;
pub use types::{
    AdCandidate, CtrVector, Impression, MixedTuple, OrganicItem, PositionLayout, Slot,
};
