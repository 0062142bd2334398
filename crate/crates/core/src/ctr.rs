//! Click-through-rate models.
//!
//! The allocator only sees the [`CtrModel`] trait. [`SyntheticJointModel`]
//! supplies a parameterized stand-in for a learned listwise predictor: every
//! slot's click probability is its item's base rate, discounted by position and
//! multiplied by one pairwise interaction factor per co-displayed item.
//! Factors below one model substitution, above one complementarity.
//! [`Pointwise`] views the same model with every interaction switched off.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{CtrVector, Impression, MixedTuple, Slot};

/// Predicts per-slot click probabilities for a full tuple.
pub trait CtrModel: Send + Sync {
    fn predict(&self, impression: &Impression, tuple: &MixedTuple) -> Result<CtrVector>;

    /// Predictions for many tuples of one impression. Implementations may share
    /// work across tuples but must return exactly what `predict` would.
    fn predict_batch(
        &self,
        impression: &Impression,
        tuples: &[MixedTuple],
    ) -> Result<Vec<CtrVector>> {
        tuples.iter().map(|t| self.predict(impression, t)).collect()
    }
}

impl<M: CtrModel + ?Sized> CtrModel for &M {
    fn predict(&self, impression: &Impression, tuple: &MixedTuple) -> Result<CtrVector> {
        (**self).predict(impression, tuple)
    }

    fn predict_batch(
        &self,
        impression: &Impression,
        tuples: &[MixedTuple],
    ) -> Result<Vec<CtrVector>> {
        (**self).predict_batch(impression, tuples)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairOverride {
    pub a: String,
    pub b: String,
    pub factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionConfig {
    /// Factor applied between two items of the same subcategory.
    pub default_same: f64,
    /// Factor applied between items of different subcategories.
    pub default_cross: f64,
    /// Symmetric per-pair replacements for the defaults.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<PairOverride>,
}

impl InteractionConfig {
    pub fn neutral() -> Self {
        InteractionConfig {
            default_same: 1.0,
            default_cross: 1.0,
            overrides: Vec::new(),
        }
    }
}

/// On-disk form of a [`SyntheticJointModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub position_multipliers: Vec<f64>,
    pub interaction: InteractionConfig,
    pub base_ctr: BTreeMap<String, f64>,
}

#[derive(Clone, Debug)]
pub struct SyntheticJointModel {
    base_ctr: HashMap<String, f64>,
    position_multipliers: Vec<f64>,
    default_same: f64,
    default_cross: f64,
    overrides: HashMap<(String, String), f64>,
    config: ModelConfig,
}

impl SyntheticJointModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        for (item, &p) in &config.base_ctr {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::config(format!(
                    "base_ctr for {item} must lie in (0, 1), got {p}"
                )));
            }
        }
        if let Some(m) = config
            .position_multipliers
            .iter()
            .find(|m| !(m.is_finite() && **m >= 0.0))
        {
            return Err(Error::config(format!("position multiplier {m} must be >= 0")));
        }
        let positive = |f: f64| f.is_finite() && f > 0.0;
        let inter = &config.interaction;
        if !positive(inter.default_same) || !positive(inter.default_cross) {
            return Err(Error::config("interaction defaults must be positive"));
        }
        let mut overrides = HashMap::new();
        for o in &inter.overrides {
            if !positive(o.factor) {
                return Err(Error::config(format!(
                    "interaction override {}/{} must be positive",
                    o.a, o.b
                )));
            }
            overrides.insert((o.a.clone(), o.b.clone()), o.factor);
            overrides.insert((o.b.clone(), o.a.clone()), o.factor);
        }
        Ok(SyntheticJointModel {
            base_ctr: config.base_ctr.iter().map(|(k, v)| (k.clone(), *v)).collect(),
            position_multipliers: config.position_multipliers.clone(),
            default_same: inter.default_same,
            default_cross: inter.default_cross,
            overrides,
            config,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: ModelConfig = toml::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Self::new(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.config).expect("model config serializes")
    }

    /// Same base rates and position curve, every interaction factor set to one.
    pub fn without_interactions(&self) -> Self {
        let mut config = self.config.clone();
        config.interaction = InteractionConfig::neutral();
        Self::new(config).expect("neutral interactions are valid")
    }

    pub fn base_ctr(&self, item_id: &str) -> Result<f64> {
        self.base_ctr
            .get(item_id)
            .copied()
            .ok_or_else(|| Error::config(format!("no base_ctr entry for item {item_id}")))
    }

    pub fn position_multiplier(&self, position: usize) -> Result<f64> {
        self.position_multipliers.get(position).copied().ok_or_else(|| {
            Error::config(format!("no position multiplier for position {position}"))
        })
    }

    pub fn interaction(&self, a: &str, b: &str) -> f64 {
        if let Some(f) = self.overrides.get(&(a.to_owned(), b.to_owned())) {
            return *f;
        }
        if a == b {
            self.default_same
        } else {
            self.default_cross
        }
    }

    /// Base rate times position multiplier for one filled slot, before clamping.
    fn discounted(&self, impression: &Impression, tuple: &MixedTuple, pos: usize) -> Result<f64> {
        let id = tuple
            .item_id(impression, pos)
            .expect("discounted is only called on filled slots");
        Ok(self.base_ctr(id)? * self.position_multiplier(pos)?)
    }

    fn check_len(&self, impression: &Impression, tuple: &MixedTuple) -> Result<()> {
        if tuple.slots.len() != impression.layout.total_slots {
            return Err(Error::invalid(format!(
                "tuple has {} slots, layout has {}",
                tuple.slots.len(),
                impression.layout.total_slots
            )));
        }
        Ok(())
    }
}

/// Joint-effects prediction: each slot is discounted by its position and by
/// the interaction factor with every other filled slot.
pub fn predict_listwise(
    model: &SyntheticJointModel,
    impression: &Impression,
    tuple: &MixedTuple,
) -> Result<CtrVector> {
    model.check_len(impression, tuple)?;
    let n = tuple.slots.len();
    let mut out = vec![0.0; n];
    for j in 0..n {
        let Some(sub_j) = tuple.subcategory(impression, j) else {
            continue;
        };
        let mut joint = 1.0;
        for k in 0..n {
            if k == j {
                continue;
            }
            if let Some(sub_k) = tuple.subcategory(impression, k) {
                joint *= model.interaction(sub_j, sub_k);
            }
        }
        out[j] = (model.discounted(impression, tuple, j)? * joint).clamp(0.0, 1.0);
    }
    Ok(CtrVector::from_clamped(out))
}

/// Independence prediction: position-discounted base rate, no joint term.
pub fn predict_pointwise(
    model: &SyntheticJointModel,
    impression: &Impression,
    tuple: &MixedTuple,
) -> Result<CtrVector> {
    model.check_len(impression, tuple)?;
    let mut out = vec![0.0; tuple.slots.len()];
    for (j, slot) in tuple.slots.iter().enumerate() {
        if *slot != Slot::Empty {
            out[j] = model.discounted(impression, tuple, j)?.clamp(0.0, 1.0);
        }
    }
    Ok(CtrVector::from_clamped(out))
}

impl CtrModel for SyntheticJointModel {
    fn predict(&self, impression: &Impression, tuple: &MixedTuple) -> Result<CtrVector> {
        predict_listwise(self, impression, tuple)
    }

    fn predict_batch(
        &self,
        impression: &Impression,
        tuples: &[MixedTuple],
    ) -> Result<Vec<CtrVector>> {
        let resolved = Resolved::new(self, impression)?;
        tuples
            .iter()
            .map(|t| {
                self.check_len(impression, t)?;
                resolved.listwise(t)
            })
            .collect()
    }
}

/// The pointwise view of a [`SyntheticJointModel`].
#[derive(Clone, Copy, Debug)]
pub struct Pointwise<'a>(pub &'a SyntheticJointModel);

impl CtrModel for Pointwise<'_> {
    fn predict(&self, impression: &Impression, tuple: &MixedTuple) -> Result<CtrVector> {
        predict_pointwise(self.0, impression, tuple)
    }
}

/// Per-impression lookup tables so that a batch of tuples costs no string
/// hashing. Produces bit-identical results to [`predict_listwise`]: the same
/// factors are multiplied in the same order.
struct Resolved<'a> {
    model: &'a SyntheticJointModel,
    ad_base: Vec<Option<f64>>,
    ad_sub: Vec<usize>,
    org_base: Vec<Option<f64>>,
    org_sub: Vec<usize>,
    /// Row-major factor table over the impression's distinct subcategories.
    factors: Vec<f64>,
    n_sub: usize,
    impression: &'a Impression,
}

impl<'a> Resolved<'a> {
    fn new(model: &'a SyntheticJointModel, impression: &'a Impression) -> Result<Self> {
        let mut names: Vec<&str> = Vec::new();
        let mut intern = |s: &'a str| match names.iter().position(|n| *n == s) {
            Some(i) => i,
            None => {
                names.push(s);
                names.len() - 1
            }
        };
        let ad_sub: Vec<usize> = impression
            .ads
            .iter()
            .map(|a| intern(&a.subcategory))
            .collect();
        let org_sub: Vec<usize> = impression
            .organics
            .iter()
            .map(|o| intern(&o.subcategory))
            .collect();
        let n_sub = names.len();
        let mut factors = vec![0.0; n_sub * n_sub];
        for (i, a) in names.iter().enumerate() {
            for (j, b) in names.iter().enumerate() {
                factors[i * n_sub + j] = model.interaction(a, b);
            }
        }
        Ok(Resolved {
            model,
            ad_base: impression
                .ads
                .iter()
                .map(|a| model.base_ctr.get(&a.ad_id).copied())
                .collect(),
            ad_sub,
            org_base: impression
                .organics
                .iter()
                .map(|o| model.base_ctr.get(&o.item_id).copied())
                .collect(),
            org_sub,
            factors,
            n_sub,
            impression,
        })
    }

    fn slot(&self, slot: &Slot) -> Option<(usize, Option<f64>, &str)> {
        match *slot {
            Slot::Ad { candidate } => Some((
                self.ad_sub[candidate],
                self.ad_base[candidate],
                &self.impression.ads[candidate].ad_id,
            )),
            Slot::Organic { rank } => Some((
                self.org_sub[rank],
                self.org_base[rank],
                &self.impression.organics[rank].item_id,
            )),
            Slot::Empty => None,
        }
    }

    fn listwise(&self, tuple: &MixedTuple) -> Result<CtrVector> {
        let n = tuple.slots.len();
        let resolved: Vec<_> = tuple.slots.iter().map(|s| self.slot(s)).collect();
        let mut out = vec![0.0; n];
        for j in 0..n {
            let Some((sub_j, base, id)) = resolved[j] else {
                continue;
            };
            let base = base
                .ok_or_else(|| Error::config(format!("no base_ctr entry for item {id}")))?;
            let mut joint = 1.0;
            for (k, other) in resolved.iter().enumerate() {
                if k == j {
                    continue;
                }
                if let Some((sub_k, _, _)) = other {
                    joint *= self.factors[sub_j * self.n_sub + sub_k];
                }
            }
            out[j] = (base * self.model.position_multiplier(j)? * joint).clamp(0.0, 1.0);
        }
        Ok(CtrVector::from_clamped(out))
    }
}
