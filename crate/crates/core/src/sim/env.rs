//! The simulated marketplace: a catalog of ads and organic products, the
//! ground-truth click model over it, and impression sampling.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, LogNormal};

use crate::ctr::{ModelConfig, SyntheticJointModel};
use crate::error::{Error, Result};
use crate::sim::config::{ShiftConfig, SimConfig};
use crate::types::{AdCandidate, Impression, OrganicItem, PositionLayout};

/// Tag of the evaluation epoch every scenario runs on.
pub const EVAL_TAG: &str = "eval";
/// Tag of the epoch the virtual bid is tuned on.
pub const TUNE_TAG: &str = "tune";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Independent random stream for `(seed, purpose, key)`. Streams depend only
/// on these three values, so work can be split across threads in any order.
pub fn stream(seed: u64, purpose: &str, key: &str) -> ChaCha8Rng {
    let s = splitmix64(splitmix64(seed ^ fnv1a(purpose.as_bytes())) ^ fnv1a(key.as_bytes()));
    ChaCha8Rng::seed_from_u64(s)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CatalogAd {
    pub ad_id: String,
    pub subcategory: usize,
    pub bid: f64,
    pub base_ctr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CatalogItem {
    pub item_id: String,
    pub subcategory: usize,
    pub base_ctr: f64,
}

#[derive(Clone, Debug)]
pub struct Catalog {
    pub subcategories: Vec<String>,
    pub ads: Vec<CatalogAd>,
    pub organics: Vec<CatalogItem>,
    ads_by_sub: Vec<Vec<usize>>,
    organics_by_sub: Vec<Vec<usize>>,
}

impl Catalog {
    /// Draws the catalog from the config seed. The shift rescales bids and
    /// base rates after drawing, so shifted and unshifted catalogs contain
    /// the same items in the same subcategories.
    pub fn generate(config: &SimConfig, shift: Option<&ShiftConfig>) -> Result<Catalog> {
        let (bid_scale, ctr_scale) = shift.map_or((1.0, 1.0), |s| (s.bid_scale, s.ctr_scale));
        let mut rng = stream(config.seed, "catalog", "");
        let n_sub = config.n_subcategories;
        let subcategories: Vec<String> = (0..n_sub).map(|c| format!("sc{c:02}")).collect();
        let spread = config.bids.subcategory_spread;
        let offsets: Vec<f64> = (0..n_sub)
            .map(|_| {
                if spread > 0.0 {
                    rng.random_range(-spread..=spread)
                } else {
                    0.0
                }
            })
            .collect();
        let beta = Beta::new(config.base_ctr.alpha, config.base_ctr.beta)
            .map_err(|e| Error::config(format!("base_ctr: {e}")))?;
        let base = |rng: &mut ChaCha8Rng| (beta.sample(rng) * ctr_scale).clamp(1e-6, 0.999);
        let lognormals = offsets
            .iter()
            .map(|o| LogNormal::new(config.bids.log_mu + o, config.bids.log_sigma))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::config(format!("bids: {e}")))?;

        let ads: Vec<CatalogAd> = (0..config.ad_catalog_size)
            .map(|i| {
                let sub = rng.random_range(0..n_sub);
                let bid = lognormals[sub].sample(&mut rng) * bid_scale;
                CatalogAd {
                    ad_id: format!("ad{i:05}"),
                    subcategory: sub,
                    bid: bid.max(1e-6),
                    base_ctr: base(&mut rng),
                }
            })
            .collect();
        let organics: Vec<CatalogItem> = (0..config.organic_catalog_size)
            .map(|i| CatalogItem {
                item_id: format!("org{i:05}"),
                subcategory: rng.random_range(0..n_sub),
                base_ctr: base(&mut rng),
            })
            .collect();

        let mut ads_by_sub = vec![Vec::new(); n_sub];
        for (i, a) in ads.iter().enumerate() {
            ads_by_sub[a.subcategory].push(i);
        }
        let mut organics_by_sub = vec![Vec::new(); n_sub];
        for (i, o) in organics.iter().enumerate() {
            organics_by_sub[o.subcategory].push(i);
        }
        Ok(Catalog {
            subcategories,
            ads,
            organics,
            ads_by_sub,
            organics_by_sub,
        })
    }

    pub fn base_ctrs(&self) -> BTreeMap<String, f64> {
        self.ads
            .iter()
            .map(|a| (a.ad_id.clone(), a.base_ctr))
            .chain(self.organics.iter().map(|o| (o.item_id.clone(), o.base_ctr)))
            .collect()
    }
}

/// Draws `n` distinct indices; each draw comes from `pool` with probability
/// `affinity` (while it has unused members) and from `0..total` otherwise.
fn draw_distinct(
    rng: &mut ChaCha8Rng,
    n: usize,
    total: usize,
    pool: &[usize],
    affinity: f64,
) -> Vec<usize> {
    let mut chosen = Vec::with_capacity(n);
    let mut used = vec![false; total];
    let mut pool_left = pool.len();
    while chosen.len() < n {
        let from_pool = pool_left > 0 && rng.random_bool(affinity);
        let pick = if from_pool {
            *pool.choose(rng).expect("pool is non-empty")
        } else {
            rng.random_range(0..total)
        };
        if !used[pick] {
            used[pick] = true;
            chosen.push(pick);
            if pool.contains(&pick) {
                pool_left -= 1;
            }
        }
    }
    chosen
}

/// Catalog, ground truth and layout for one epoch.
#[derive(Clone, Debug)]
pub struct Environment {
    pub config: SimConfig,
    pub catalog: Catalog,
    /// Ground-truth joint click model; the listwise ranker uses it as its
    /// predictor.
    pub model: SyntheticJointModel,
    pub layout: PositionLayout,
}

impl Environment {
    pub fn new(config: &SimConfig) -> Result<Environment> {
        Self::build(config, None)
    }

    /// The drifted environment of a later epoch.
    pub fn shifted(config: &SimConfig) -> Result<Environment> {
        Self::build(config, Some(&config.shift))
    }

    fn build(config: &SimConfig, shift: Option<&ShiftConfig>) -> Result<Environment> {
        config.validate()?;
        let catalog = Catalog::generate(config, shift)?;
        let model = SyntheticJointModel::new(ModelConfig {
            position_multipliers: config.position_multipliers.clone(),
            interaction: config.interaction.clone(),
            base_ctr: catalog.base_ctrs(),
        })?;
        Ok(Environment {
            config: config.clone(),
            catalog,
            model,
            layout: config.layout()?,
        })
    }

    /// `n` impressions with ids `{tag}-{index}`. Each impression is drawn
    /// from its own stream, so the result does not depend on thread count.
    pub fn epoch(&self, tag: &str, n: usize) -> Vec<Impression> {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|i| self.impression(&format!("{tag}-{i:07}")))
            .collect()
    }

    fn impression(&self, id: &str) -> Impression {
        let c = &self.config;
        let cat = &self.catalog;
        let mut rng = stream(c.seed, "impression", id);
        let page = rng.random_range(0..c.n_subcategories);

        let t = c.gsp_exponent;
        let mut ads: Vec<&CatalogAd> = draw_distinct(
            &mut rng,
            c.n_ads,
            cat.ads.len(),
            &cat.ads_by_sub[page],
            c.ad_page_affinity,
        )
        .into_iter()
        .map(|i| &cat.ads[i])
        .collect();
        // Pre-ranking by pointwise weighted eCPM.
        ads.sort_by(|a, b| {
            (b.bid * b.base_ctr.powf(t))
                .total_cmp(&(a.bid * a.base_ctr.powf(t)))
                .then_with(|| a.ad_id.cmp(&b.ad_id))
        });

        let mut organics: Vec<&CatalogItem> = draw_distinct(
            &mut rng,
            c.n_organics,
            cat.organics.len(),
            &cat.organics_by_sub[page],
            c.organic_page_affinity,
        )
        .into_iter()
        .map(|i| &cat.organics[i])
        .collect();
        organics.sort_by(|a, b| {
            b.base_ctr
                .total_cmp(&a.base_ctr)
                .then_with(|| a.item_id.cmp(&b.item_id))
        });

        Impression {
            impression_id: id.to_owned(),
            context_features: Vec::new(),
            ads: ads
                .into_iter()
                .map(|a| AdCandidate {
                    ad_id: a.ad_id.clone(),
                    bid_cpc: a.bid,
                    subcategory: cat.subcategories[a.subcategory].clone(),
                    features: Vec::new(),
                })
                .collect(),
            organics: organics
                .into_iter()
                .map(|o| OrganicItem {
                    item_id: o.item_id.clone(),
                    subcategory: cat.subcategories[o.subcategory].clone(),
                    features: Vec::new(),
                })
                .collect(),
            layout: self.layout.clone(),
            page_subcategory: Some(cat.subcategories[page].clone()),
        }
    }
}

/// The evaluation epoch of `config`.
pub fn generate_epoch(config: &SimConfig) -> Result<Vec<Impression>> {
    Ok(Environment::new(config)?.epoch(EVAL_TAG, config.n_impressions))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            n_impressions: 50,
            ..SimConfig::default()
        }
    }

    #[test]
    fn epochs_are_reproducible() {
        let a = generate_epoch(&small()).unwrap();
        let b = generate_epoch(&small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn seeds_change_content_not_shape() {
        let a = generate_epoch(&small()).unwrap();
        let b = generate_epoch(&SimConfig { seed: 99, ..small() }).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.len(), b.len());
        for imp in a.iter().chain(&b) {
            imp.validate().unwrap();
            assert_eq!(imp.ads.len(), 10);
            assert_eq!(imp.organics.len(), 6);
        }
    }

    #[test]
    fn single_impression_epoch() {
        let c = SimConfig {
            n_impressions: 1,
            ..SimConfig::default()
        };
        assert_eq!(generate_epoch(&c).unwrap().len(), 1);
    }

    #[test]
    fn ads_are_pre_ranked_by_weighted_ecpm() {
        let env = Environment::new(&small()).unwrap();
        for imp in env.epoch("x", 20) {
            let ecpm: Vec<f64> = imp
                .ads
                .iter()
                .map(|a| a.bid_cpc * env.model.base_ctr(&a.ad_id).unwrap())
                .collect();
            assert!(ecpm.windows(2).all(|w| w[0] >= w[1]));
            let base: Vec<f64> = imp
                .organics
                .iter()
                .map(|o| env.model.base_ctr(&o.item_id).unwrap())
                .collect();
            assert!(base.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn shift_rescales_without_reshuffling() {
        let c = small();
        let a = Environment::new(&c).unwrap();
        let b = Environment::shifted(&c).unwrap();
        for (x, y) in a.catalog.ads.iter().zip(&b.catalog.ads) {
            assert_eq!(x.ad_id, y.ad_id);
            assert_eq!(x.subcategory, y.subcategory);
            assert!((y.bid - x.bid * c.shift.bid_scale).abs() < 1e-12 * x.bid);
        }
    }

    #[test]
    fn streams_are_keyed() {
        let draw = |p: &str, k: &str| stream(1, p, k).random::<u64>();
        assert_eq!(draw("a", "k"), draw("a", "k"));
        assert_ne!(draw("a", "k"), draw("b", "k"));
        assert_ne!(draw("a", "k"), draw("a", "j"));
    }
}
