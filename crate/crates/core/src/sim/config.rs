//! Simulation configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ctr::InteractionConfig;
use crate::error::{Error, Result};
use crate::payments::Scheme;
use crate::tuner::SpsaHyperparams;
use crate::types::PositionLayout;

pub const SCHEMA_VERSION: u32 = 1;

/// Omitted keys take their [`Default`] values, except `schema_version`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "missing_version")]
    pub schema_version: u32,
    pub seed: u64,
    /// Impressions per evaluation epoch.
    pub n_impressions: usize,
    /// Impressions in the separate epoch the virtual bid is tuned on.
    pub n_tune_impressions: usize,
    /// Ad candidates per impression.
    pub n_ads: usize,
    /// Organic candidates per impression.
    pub n_organics: usize,
    pub total_slots: usize,
    /// Zero-based page positions reserved for ads.
    pub ad_positions: Vec<usize>,
    pub n_prime: usize,
    pub n_subcategories: usize,
    pub ad_catalog_size: usize,
    pub organic_catalog_size: usize,
    /// Chance that a candidate is drawn from the page product's subcategory
    /// rather than from the whole catalog.
    pub ad_page_affinity: f64,
    pub organic_page_affinity: f64,
    pub gsp_exponent: f64,
    pub floor: f64,
    pub payment_scheme: Scheme,
    pub assignment: Assignment,
    pub position_multipliers: Vec<f64>,
    pub bids: BidDistribution,
    pub base_ctr: BaseCtrDistribution,
    pub interaction: InteractionConfig,
    pub tuner: TunerConfig,
    pub shift: ShiftConfig,
}

/// How impressions are split between the arms of an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assignment {
    /// Every arm serves every impression.
    Paired,
    /// Each impression goes to one arm, drawn uniformly from its own stream.
    Randomized,
}

/// Log-normal CPC bids: `exp(N(log_mu + offset_c, log_sigma))` where the
/// offset of subcategory `c` is uniform in `[-subcategory_spread, subcategory_spread]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BidDistribution {
    pub log_mu: f64,
    pub log_sigma: f64,
    pub subcategory_spread: f64,
}

/// Beta-distributed base click rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseCtrDistribution {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TunerKind {
    Golden,
    Spsa,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TunerConfig {
    pub method: TunerKind,
    /// Search interval for `v_a`; defaults to `[0, 10 * max bid]` of the tuning log.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket: Option<[f64; 2]>,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub spsa: SpsaHyperparams,
}

/// Second-epoch drift: every catalog bid and base click rate is rescaled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftConfig {
    pub bid_scale: f64,
    pub ctr_scale: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            schema_version: SCHEMA_VERSION,
            seed: 20201215,
            n_impressions: 100_000,
            n_tune_impressions: 4_000,
            n_ads: 10,
            n_organics: 6,
            total_slots: 6,
            ad_positions: vec![1, 3, 5],
            n_prime: 6,
            n_subcategories: 12,
            ad_catalog_size: 600,
            organic_catalog_size: 600,
            ad_page_affinity: 0.7,
            organic_page_affinity: 0.6,
            gsp_exponent: 1.0,
            floor: 0.0,
            payment_scheme: Scheme::Gsp,
            assignment: Assignment::Paired,
            position_multipliers: vec![1.0, 0.92, 0.85, 0.78, 0.72, 0.66],
            bids: BidDistribution::default(),
            base_ctr: BaseCtrDistribution::default(),
            interaction: InteractionConfig {
                default_same: 0.75,
                default_cross: 1.0,
                overrides: Vec::new(),
            },
            tuner: TunerConfig::default(),
            shift: ShiftConfig::default(),
        }
    }
}

fn missing_version() -> u32 {
    0
}

impl Default for BidDistribution {
    fn default() -> Self {
        BidDistribution {
            log_mu: 0.7,
            log_sigma: 0.6,
            subcategory_spread: 0.5,
        }
    }
}

impl Default for BaseCtrDistribution {
    fn default() -> Self {
        BaseCtrDistribution {
            alpha: 3.0,
            beta: 40.0,
        }
    }
}

impl Default for TunerConfig {
    fn default() -> Self {
        TunerConfig {
            method: TunerKind::Golden,
            bracket: None,
            tol: 1e-4,
            max_iter: 200,
            seed: 7,
            spsa: SpsaHyperparams::default(),
        }
    }
}

impl Default for ShiftConfig {
    fn default() -> Self {
        ShiftConfig {
            bid_scale: 0.6,
            ctr_scale: 1.0,
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: SimConfig =
            toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn layout(&self) -> Result<PositionLayout> {
        PositionLayout::new(self.total_slots, self.ad_positions.clone())
    }

    pub fn k_ads(&self) -> usize {
        self.ad_positions.len()
    }

    pub fn k_orgs(&self) -> usize {
        self.total_slots.saturating_sub(self.ad_positions.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version == 0 {
            return Err(Error::config(format!("schema_version is required (current: {SCHEMA_VERSION})")));
        }
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let layout = self.layout().map_err(|e| Error::config(e.to_string()))?;
        let counts = [
            ("n_impressions", self.n_impressions),
            ("n_tune_impressions", self.n_tune_impressions),
            ("n_ads", self.n_ads),
            ("n_subcategories", self.n_subcategories),
            ("k_ads", layout.k_ads()),
        ];
        for (name, n) in counts {
            if n == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        if self.n_prime < layout.k_ads() || self.n_prime > self.n_ads {
            return Err(Error::config(format!(
                "n_prime = {} must lie in [k_ads = {}, n_ads = {}]",
                self.n_prime,
                layout.k_ads(),
                self.n_ads
            )));
        }
        if self.n_organics < layout.k_orgs() {
            return Err(Error::config("n_organics is smaller than the organic slot count"));
        }
        if self.ad_catalog_size < self.n_ads || self.organic_catalog_size < self.n_organics {
            return Err(Error::config("a catalog is smaller than the per-impression draw"));
        }
        for (name, p) in [
            ("ad_page_affinity", self.ad_page_affinity),
            ("organic_page_affinity", self.organic_page_affinity),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(self.gsp_exponent.is_finite() && self.gsp_exponent >= 0.0) {
            return Err(Error::config("gsp_exponent must be >= 0"));
        }
        if !(self.floor.is_finite() && self.floor >= 0.0) {
            return Err(Error::config("floor must be >= 0"));
        }
        if self.position_multipliers.len() != self.total_slots {
            return Err(Error::config(format!(
                "{} position multipliers for {} slots",
                self.position_multipliers.len(),
                self.total_slots
            )));
        }
        let b = &self.bids;
        if !(b.log_mu.is_finite() && b.log_sigma >= 0.0 && b.subcategory_spread >= 0.0) {
            return Err(Error::config("bid distribution needs finite mu and sigma, spread >= 0"));
        }
        if !(self.base_ctr.alpha > 0.0 && self.base_ctr.beta > 0.0) {
            return Err(Error::config("base_ctr alpha and beta must be positive"));
        }
        let t = &self.tuner;
        if let Some([lo, hi]) = t.bracket {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
                return Err(Error::config("tuner bracket must satisfy 0 <= lo <= hi"));
            }
        }
        if !(t.tol > 0.0) || t.max_iter == 0 {
            return Err(Error::config("tuner needs tol > 0 and max_iter >= 1"));
        }
        t.spsa
            .validate()
            .map_err(|e| Error::config(e.to_string()))?;
        let s = &self.shift;
        if !(s.bid_scale > 0.0 && s.ctr_scale > 0.0) {
            return Err(Error::config("shift scales must be positive"));
        }
        Ok(())
    }
}
