//! Domain types shared by every stage of the allocation pipeline.
//!
//! An [`Impression`] is one user arrival on a product page. It carries the
//! pre-ranked ad candidates, the ranked organic recommendations and the fixed
//! slot layout. A [`MixedTuple`] is one candidate arrangement of ads and
//! organics over those slots; it stores indices into the impression rather than
//! copies of the items, so it is only meaningful next to the impression that
//! produced it.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdCandidate {
    pub ad_id: String,
    /// Cost-per-click bid submitted by the advertiser.
    pub bid_cpc: f64,
    pub subcategory: String,
    #[serde(default)]
    pub features: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrganicItem {
    pub item_id: String,
    pub subcategory: String,
    #[serde(default)]
    pub features: Vec<f64>,
}

/// Fixed split of the page's slots between ads and organics.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionLayout {
    pub total_slots: usize,
    pub ad_positions: Vec<usize>,
    pub organic_positions: Vec<usize>,
}

impl PositionLayout {
    pub fn new(total_slots: usize, ad_positions: Vec<usize>) -> Result<Self> {
        let organic_positions = (0..total_slots)
            .filter(|p| !ad_positions.contains(p))
            .collect();
        let layout = PositionLayout {
            total_slots,
            ad_positions,
            organic_positions,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// Six slots alternating organic and ad, organic first.
    pub fn six_slot_alternating() -> Self {
        PositionLayout {
            total_slots: 6,
            ad_positions: vec![1, 3, 5],
            organic_positions: vec![0, 2, 4],
        }
    }

    pub fn k_ads(&self) -> usize {
        self.ad_positions.len()
    }

    pub fn k_orgs(&self) -> usize {
        self.organic_positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.ad_positions.len() + self.organic_positions.len() != self.total_slots {
            return Err(Error::invalid(format!(
                "layout covers {} ad + {} organic positions but has {} slots",
                self.ad_positions.len(),
                self.organic_positions.len(),
                self.total_slots
            )));
        }
        let mut seen = vec![false; self.total_slots];
        for &p in self.ad_positions.iter().chain(&self.organic_positions) {
            if p >= self.total_slots {
                return Err(Error::invalid(format!(
                    "position {p} outside a {}-slot layout",
                    self.total_slots
                )));
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::invalid(format!("position {p} assigned twice")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Impression {
    pub impression_id: String,
    #[serde(default)]
    pub context_features: Vec<f64>,
    /// Candidate ads, already ordered by the baseline ranker.
    pub ads: Vec<AdCandidate>,
    /// Organic recommendations in rank order.
    pub organics: Vec<OrganicItem>,
    pub layout: PositionLayout,
    /// Subcategory of the product whose page is being served.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page_subcategory: Option<String>,
}

impl Impression {
    /// Checks the structural invariants that the allocator relies on.
    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        if self.ads.len() < self.layout.k_ads() {
            return Err(Error::invalid(format!(
                "impression {}: {} ad candidates for {} ad slots",
                self.impression_id,
                self.ads.len(),
                self.layout.k_ads()
            )));
        }
        if self.organics.len() < self.layout.k_orgs() {
            return Err(Error::invalid(format!(
                "impression {}: {} organics for {} organic slots",
                self.impression_id,
                self.organics.len(),
                self.layout.k_orgs()
            )));
        }
        let mut ids = HashSet::new();
        for ad in &self.ads {
            if !(ad.bid_cpc.is_finite() && ad.bid_cpc > 0.0) {
                return Err(Error::invalid(format!(
                    "impression {}: ad {} has non-positive bid {}",
                    self.impression_id, ad.ad_id, ad.bid_cpc
                )));
            }
            if !ids.insert(ad.ad_id.as_str()) {
                return Err(Error::invalid(format!(
                    "impression {}: duplicate ad id {}",
                    self.impression_id, ad.ad_id
                )));
            }
        }
        let mut ids = HashSet::new();
        for item in &self.organics {
            if !ids.insert(item.item_id.as_str()) {
                return Err(Error::invalid(format!(
                    "impression {}: duplicate organic id {}",
                    self.impression_id, item.item_id
                )));
            }
        }
        Ok(())
    }

    /// Copy of this impression with one ad candidate removed; the remaining
    /// candidates keep their pre-ranked order.
    pub fn without_ad(&self, candidate: usize) -> Impression {
        let mut out = self.clone();
        out.ads.remove(candidate);
        out
    }
}

/// Content of one page slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Slot {
    /// Index into [`Impression::ads`].
    Ad { candidate: usize },
    /// Index into [`Impression::organics`].
    Organic { rank: usize },
    /// An ad slot left unfilled. Only counterfactual allocations with fewer
    /// candidates than ad slots contain these.
    Empty,
}

/// One arrangement of ads and organics over the page (the unit of allocation).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MixedTuple {
    pub slots: Vec<Slot>,
}

impl MixedTuple {
    /// `(position, candidate index)` for every filled ad slot, in position order.
    pub fn ads(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.slots.iter().enumerate().filter_map(|(p, s)| match s {
            Slot::Ad { candidate } => Some((p, *candidate)),
            _ => None,
        })
    }

    /// `(position, organic rank)` for every organic slot, in position order.
    pub fn organics(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.slots.iter().enumerate().filter_map(|(p, s)| match s {
            Slot::Organic { rank } => Some((p, *rank)),
            _ => None,
        })
    }

    pub fn contains_ad(&self, candidate: usize) -> bool {
        self.slots
            .iter()
            .any(|s| matches!(s, Slot::Ad { candidate: c } if *c == candidate))
    }

    pub fn subcategory<'a>(&self, impression: &'a Impression, position: usize) -> Option<&'a str> {
        match self.slots[position] {
            Slot::Ad { candidate } => Some(impression.ads[candidate].subcategory.as_str()),
            Slot::Organic { rank } => Some(impression.organics[rank].subcategory.as_str()),
            Slot::Empty => None,
        }
    }

    pub fn item_id<'a>(&self, impression: &'a Impression, position: usize) -> Option<&'a str> {
        match self.slots[position] {
            Slot::Ad { candidate } => Some(impression.ads[candidate].ad_id.as_str()),
            Slot::Organic { rank } => Some(impression.organics[rank].item_id.as_str()),
            Slot::Empty => None,
        }
    }
}

/// Per-slot click probabilities for one tuple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CtrVector(Vec<f64>);

impl CtrVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::invalid(format!("click probability {bad} outside [0, 1]")));
        }
        Ok(CtrVector(values))
    }

    pub(crate) fn from_clamped(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|x| (0.0..=1.0).contains(x)));
        CtrVector(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sum of the ad-slot probabilities of `tuple`, accumulated in position order.
    pub fn ad_sum(&self, tuple: &MixedTuple) -> f64 {
        tuple.ads().map(|(p, _)| self.0[p]).sum()
    }

    pub fn organic_sum(&self, tuple: &MixedTuple) -> f64 {
        tuple.organics().map(|(p, _)| self.0[p]).sum()
    }
}

impl std::ops::Index<usize> for CtrVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_impression(n_ads: usize) -> Impression {
        Impression {
            impression_id: "imp".into(),
            context_features: vec![],
            ads: (0..n_ads)
                .map(|i| AdCandidate {
                    ad_id: format!("a{i}"),
                    bid_cpc: 1.0 + i as f64,
                    subcategory: "s".into(),
                    features: vec![],
                })
                .collect(),
            organics: (0..3)
                .map(|i| OrganicItem {
                    item_id: format!("o{i}"),
                    subcategory: "s".into(),
                    features: vec![],
                })
                .collect(),
            layout: PositionLayout::six_slot_alternating(),
            page_subcategory: None,
        }
    }

    #[test]
    fn layout_rejects_overlap_and_gaps() {
        let overlap = PositionLayout {
            total_slots: 3,
            ad_positions: vec![0, 1],
            organic_positions: vec![1],
        };
        assert!(overlap.validate().is_err());
        let short = PositionLayout {
            total_slots: 3,
            ad_positions: vec![0],
            organic_positions: vec![1],
        };
        assert!(short.validate().is_err());
        let built = PositionLayout::new(6, vec![1, 3, 5]).unwrap();
        assert_eq!(built, PositionLayout::six_slot_alternating());
    }

    #[test]
    fn impression_invariants() {
        let mut imp = toy_impression(4);
        imp.validate().unwrap();
        imp.ads[1].ad_id = "a0".into();
        assert!(imp.validate().is_err());
        let mut imp = toy_impression(4);
        imp.ads[0].bid_cpc = 0.0;
        assert!(imp.validate().is_err());
        assert!(toy_impression(2).validate().is_err());
    }

    #[test]
    fn impression_json_field_names() {
        let imp = toy_impression(3);
        let v: serde_json::Value = serde_json::to_value(&imp).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(
            keys,
            ["ads", "context_features", "impression_id", "layout", "organics"]
        );
        let ad = &v["ads"][0];
        for k in ["ad_id", "bid_cpc", "subcategory", "features"] {
            assert!(ad.get(k).is_some(), "missing {k}");
        }
    }

    #[test]
    fn ctr_vector_bounds() {
        assert!(CtrVector::new(vec![0.0, 1.0, 0.5]).is_ok());
        assert!(CtrVector::new(vec![1.01]).is_err());
        assert!(CtrVector::new(vec![-0.1]).is_err());
    }
}
