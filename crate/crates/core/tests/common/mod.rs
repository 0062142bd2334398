//! Random small instances and brute-force oracles shared by the integration
//! tests. The oracles recompute click probabilities and objectives from the
//! raw instance parameters and enumerate placements by plain recursion, so
//! they share no code with the library's enumeration, model or ranker.

#![allow(dead_code)]

use std::collections::BTreeMap;

use blend_core::ctr::{InteractionConfig, ModelConfig, PairOverride};
use blend_core::{AdCandidate, Impression, OrganicItem, PositionLayout, SyntheticJointModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SUBS: [&str; 3] = ["A", "B", "C"];

#[derive(Clone, Debug)]
pub struct Instance {
    pub total_slots: usize,
    pub ad_positions: Vec<usize>,
    pub bids: Vec<f64>,
    pub ad_subs: Vec<usize>,
    pub ad_base: Vec<f64>,
    pub org_subs: Vec<usize>,
    pub org_base: Vec<f64>,
    pub mults: Vec<f64>,
    /// Symmetric factor table over `SUBS`.
    pub gamma: [[f64; 3]; 3],
    pub v_a: f64,
}

pub struct Options {
    pub max_ads: usize,
    pub k_choices: Vec<usize>,
    pub max_orgs: usize,
    pub v_max: f64,
    pub interactions: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            max_ads: 6,
            k_choices: vec![1, 2, 3],
            max_orgs: 3,
            v_max: 3.0,
            interactions: true,
        }
    }
}

pub fn random_instance(rng: &mut ChaCha8Rng, o: &Options) -> Instance {
    let k = o.k_choices[rng.random_range(0..o.k_choices.len())];
    let n_ads = rng.random_range(k..=o.max_ads.max(k));
    let k_orgs = rng.random_range(0..=o.max_orgs);
    let total = k + k_orgs;
    let mut positions: Vec<usize> = (0..total).collect();
    // Partial Fisher-Yates: the first k entries become the ad positions.
    for i in 0..k {
        let j = rng.random_range(i..total);
        positions.swap(i, j);
    }
    let mut ad_positions = positions[..k].to_vec();
    ad_positions.sort();
    let mut gamma = [[1.0; 3]; 3];
    if o.interactions {
        let same = rng.random_range(0.4..1.0);
        for (a, row) in gamma.iter_mut().enumerate() {
            row[a] = same;
        }
        for a in 0..3 {
            for b in (a + 1)..3 {
                let g = rng.random_range(0.7..1.3);
                gamma[a][b] = g;
                gamma[b][a] = g;
            }
        }
    }
    Instance {
        total_slots: total,
        ad_positions,
        bids: (0..n_ads).map(|_| rng.random_range(0.1..5.0)).collect(),
        ad_subs: (0..n_ads).map(|_| rng.random_range(0..3)).collect(),
        ad_base: (0..n_ads).map(|_| rng.random_range(0.01..0.5)).collect(),
        org_subs: (0..k_orgs).map(|_| rng.random_range(0..3)).collect(),
        org_base: (0..k_orgs).map(|_| rng.random_range(0.01..0.5)).collect(),
        mults: (0..total).map(|_| rng.random_range(0.5..=1.0)).collect(),
        gamma,
        v_a: rng.random_range(0.0..=o.v_max),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

impl Instance {
    pub fn impression(&self) -> Impression {
        Impression {
            impression_id: "oracle".into(),
            context_features: vec![],
            ads: (0..self.bids.len())
                .map(|i| AdCandidate {
                    ad_id: format!("ad{i}"),
                    bid_cpc: self.bids[i],
                    subcategory: SUBS[self.ad_subs[i]].into(),
                    features: vec![],
                })
                .collect(),
            organics: (0..self.org_base.len())
                .map(|i| OrganicItem {
                    item_id: format!("org{i}"),
                    subcategory: SUBS[self.org_subs[i]].into(),
                    features: vec![],
                })
                .collect(),
            layout: PositionLayout::new(self.total_slots, self.ad_positions.clone()).unwrap(),
            page_subcategory: Some("A".into()),
        }
    }

    pub fn model(&self) -> SyntheticJointModel {
        let mut base = BTreeMap::new();
        for (i, b) in self.ad_base.iter().enumerate() {
            base.insert(format!("ad{i}"), *b);
        }
        for (i, b) in self.org_base.iter().enumerate() {
            base.insert(format!("org{i}"), *b);
        }
        let mut overrides = Vec::new();
        for a in 0..3 {
            for b in (a + 1)..3 {
                overrides.push(PairOverride {
                    a: SUBS[a].into(),
                    b: SUBS[b].into(),
                    factor: self.gamma[a][b],
                });
            }
        }
        SyntheticJointModel::new(ModelConfig {
            position_multipliers: self.mults.clone(),
            interaction: InteractionConfig {
                default_same: self.gamma[0][0],
                default_cross: 1.0,
                overrides,
            },
            base_ctr: base,
        })
        .unwrap()
    }

    /// Page contents: `Some((is_ad, index))` per slot; organics fill the
    /// organic positions in rank order.
    fn page(&self, ads: &[usize]) -> Vec<(bool, usize)> {
        let mut page = vec![(false, usize::MAX); self.total_slots];
        for (pos, a) in self.ad_positions.iter().zip(ads) {
            page[*pos] = (true, *a);
        }
        let mut rank = 0;
        for slot in page.iter_mut() {
            if slot.1 == usize::MAX {
                *slot = (false, rank);
                rank += 1;
            }
        }
        page
    }

    /// Click probability of every slot when `ads` fill the ad positions in order.
    pub fn ctrs(&self, ads: &[usize]) -> Vec<f64> {
        let page = self.page(ads);
        let sub = |(is_ad, i): (bool, usize)| if is_ad { self.ad_subs[i] } else { self.org_subs[i] };
        let base = |(is_ad, i): (bool, usize)| if is_ad { self.ad_base[i] } else { self.org_base[i] };
        (0..page.len())
            .map(|j| {
                let mut p = base(page[j]) * self.mults[j];
                for k in 0..page.len() {
                    if k != j {
                        p *= self.gamma[sub(page[j])][sub(page[k])];
                    }
                }
                p.clamp(0.0, 1.0)
            })
            .collect()
    }

    /// Ad-slot probabilities in ad-position order.
    pub fn ad_ctrs(&self, ads: &[usize]) -> Vec<f64> {
        let x = self.ctrs(ads);
        self.ad_positions.iter().map(|p| x[*p]).collect()
    }

    pub fn objective(&self, ads: &[usize], v_a: f64) -> f64 {
        self.ad_ctrs(ads)
            .iter()
            .zip(ads)
            .map(|(x, a)| x * (v_a + self.bids[*a]))
            .sum()
    }

    /// Every ordered choice of distinct candidates from `pool` for the ad positions.
    pub fn placements(&self, pool: &[usize]) -> Vec<Vec<usize>> {
        fn rec(pool: &[usize], k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for &a in pool {
                if !cur.contains(&a) {
                    cur.push(a);
                    rec(pool, k, cur, out);
                    cur.pop();
                }
            }
        }
        let mut out = Vec::new();
        rec(pool, self.ad_positions.len(), &mut Vec::new(), &mut out);
        out
    }

    pub fn all_placements(&self) -> Vec<Vec<usize>> {
        self.placements(&(0..self.bids.len()).collect::<Vec<_>>())
    }

    /// Best objective over every placement of all candidates.
    pub fn brute_force_best(&self, v_a: f64) -> f64 {
        self.all_placements()
            .iter()
            .map(|p| self.objective(p, v_a))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
