//! Subcategory diversity of served tuples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{distinct_count, herfindahl, MeanVar};
use crate::types::{Impression, MixedTuple, Slot};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotGroup {
    Ads,
    Organic,
    Overall,
}

impl SlotGroup {
    pub const ALL: [SlotGroup; 3] = [SlotGroup::Ads, SlotGroup::Organic, SlotGroup::Overall];

    pub fn name(self) -> &'static str {
        match self {
            SlotGroup::Ads => "ads",
            SlotGroup::Organic => "organic",
            SlotGroup::Overall => "overall",
        }
    }

    fn includes(self, slot: &Slot) -> bool {
        match (self, slot) {
            (_, Slot::Empty) => false,
            (SlotGroup::Ads, Slot::Ad { .. }) | (SlotGroup::Organic, Slot::Organic { .. }) => true,
            (SlotGroup::Overall, _) => true,
            _ => false,
        }
    }
}

/// Per-impression diversity of one slot group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TupleDiversity {
    /// 1 when some item's subcategory differs from the page product's.
    pub multi_subcat: f64,
    pub subcat_count: f64,
    pub herfindahl: f64,
}

pub fn tuple_diversity(
    impression: &Impression,
    tuple: &MixedTuple,
    group: SlotGroup,
) -> Result<TupleDiversity> {
    let page = impression.page_subcategory.as_deref().ok_or_else(|| {
        Error::invalid(format!(
            "impression {} has no page subcategory",
            impression.impression_id
        ))
    })?;
    let subs: Vec<&str> = tuple
        .slots
        .iter()
        .enumerate()
        .filter(|(_, s)| group.includes(s))
        .filter_map(|(p, _)| tuple.subcategory(impression, p))
        .collect();
    Ok(TupleDiversity {
        multi_subcat: if subs.iter().any(|s| *s != page) { 1.0 } else { 0.0 },
        subcat_count: distinct_count(subs.iter().copied()) as f64,
        herfindahl: herfindahl(subs.iter().copied()),
    })
}

/// Means over impressions of the three diversity measures for one group.
#[derive(Clone, Debug, PartialEq)]
pub struct DiversitySummary {
    pub group: SlotGroup,
    pub multi_subcat_rate: MeanVar,
    pub mean_subcat_count: MeanVar,
    pub herfindahl: MeanVar,
}

/// Diversity of `allocations[i]` served on `log[i]`, for ads, organics and
/// all slots, in that order.
pub fn diversity_metrics(
    log: &[Impression],
    allocations: &[MixedTuple],
) -> Result<Vec<DiversitySummary>> {
    if log.is_empty() {
        return Err(Error::invalid("diversity needs at least one allocation"));
    }
    if log.len() != allocations.len() {
        return Err(Error::invalid("one allocation per impression is required"));
    }
    SlotGroup::ALL
        .iter()
        .map(|&group| {
            let mut s = DiversitySummary {
                group,
                multi_subcat_rate: MeanVar::default(),
                mean_subcat_count: MeanVar::default(),
                herfindahl: MeanVar::default(),
            };
            for (imp, tuple) in log.iter().zip(allocations) {
                let d = tuple_diversity(imp, tuple, group)?;
                s.multi_subcat_rate.push(d.multi_subcat);
                s.mean_subcat_count.push(d.subcat_count);
                s.herfindahl.push(d.herfindahl);
            }
            Ok(s)
        })
        .collect()
}
