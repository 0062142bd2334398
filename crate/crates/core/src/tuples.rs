//! Enumeration of candidate mixed tuples for one impression.

use crate::error::{Error, Result};
use crate::types::{Impression, MixedTuple, Slot};

/// Every ordered placement of `K_ads` ads drawn from the top `n_prime`
/// candidates into the layout's ad positions.
///
/// Organic slots always hold the top-ranked organics in rank order. Subsets are
/// visited in lexicographic order of candidate index and, within a subset,
/// orderings in lexicographic permutation order, so the output is
/// `K_ads! * C(n_prime, K_ads)` tuples in a fixed order.
pub fn generate_tuples(impression: &Impression, n_prime: usize) -> Result<Vec<MixedTuple>> {
    let k = impression.layout.k_ads();
    if n_prime < k {
        return Err(Error::invalid(format!(
            "n_prime = {n_prime} is smaller than the {k} ad slots"
        )));
    }
    if n_prime > impression.ads.len() {
        return Err(Error::invalid(format!(
            "n_prime = {n_prime} exceeds the {} ad candidates",
            impression.ads.len()
        )));
    }
    if impression.organics.len() < impression.layout.k_orgs() {
        return Err(Error::invalid("fewer organics than organic slots"));
    }
    Ok(enumerate(impression, n_prime, k))
}

/// Like [`generate_tuples`] but tolerates a window smaller than the number of
/// ad slots by leaving trailing ad slots empty. Used for VCG counterfactuals
/// once a bidder has been removed from a short candidate list.
pub(crate) fn generate_counterfactual_tuples(
    impression: &Impression,
    n_prime: usize,
) -> Vec<MixedTuple> {
    let window = n_prime.min(impression.ads.len());
    let k = impression.layout.k_ads();
    if window >= k {
        return enumerate(impression, window, k);
    }
    // Place all `window` remaining ads; choose which ad positions they occupy.
    let mut out = Vec::new();
    for positions in combinations(k, window) {
        for order in permutations(&(0..window).collect::<Vec<_>>()) {
            let mut ads = vec![None; k];
            for (slot, cand) in positions.iter().zip(&order) {
                ads[*slot] = Some(*cand);
            }
            out.push(assemble(impression, &ads));
        }
    }
    out
}

fn enumerate(impression: &Impression, n_prime: usize, k: usize) -> Vec<MixedTuple> {
    let mut out = Vec::with_capacity(tuple_count(n_prime, k));
    for subset in combinations(n_prime, k) {
        for order in permutations(&subset) {
            let ads: Vec<Option<usize>> = order.into_iter().map(Some).collect();
            out.push(assemble(impression, &ads));
        }
    }
    out
}

/// Tuple with the given ads in ad-position order and the top organics in rank order.
pub(crate) fn assemble(impression: &Impression, ads: &[Option<usize>]) -> MixedTuple {
    let layout = &impression.layout;
    let mut slots = vec![Slot::Empty; layout.total_slots];
    for (pos, ad) in layout.ad_positions.iter().zip(ads) {
        slots[*pos] = match ad {
            Some(candidate) => Slot::Ad {
                candidate: *candidate,
            },
            None => Slot::Empty,
        };
    }
    for (rank, pos) in layout.organic_positions.iter().enumerate() {
        slots[*pos] = Slot::Organic { rank };
    }
    MixedTuple { slots }
}

/// `k! * C(n, k)`, the number of ordered k-placements out of n.
pub fn tuple_count(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    ((n - k + 1)..=n).product()
}

/// k-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(idx.clone());
        // Rightmost index that can still advance.
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// All orderings of `items` (assumed sorted ascending) in lexicographic order.
fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    let mut cur = items.to_vec();
    let mut out = vec![cur.clone()];
    // Standard next-permutation walk.
    loop {
        let n = cur.len();
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let pivot = i - 1;
        let j = (i..n).rev().find(|&j| cur[j] > cur[pivot]).unwrap();
        cur.swap(pivot, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{AdCandidate, OrganicItem, PositionLayout};
    use proptest::prelude::*;

    fn impression(n_ads: usize, ad_positions: Vec<usize>) -> Impression {
        let layout = PositionLayout::new(6, ad_positions).unwrap();
        Impression {
            impression_id: "i".into(),
            context_features: vec![],
            ads: (0..n_ads)
                .map(|i| AdCandidate {
                    ad_id: format!("a{i}"),
                    bid_cpc: 1.0,
                    subcategory: "s".into(),
                    features: vec![],
                })
                .collect(),
            organics: (0..8)
                .map(|i| OrganicItem {
                    item_id: format!("o{i}"),
                    subcategory: "s".into(),
                    features: vec![],
                })
                .collect(),
            layout,
            page_subcategory: None,
        }
    }

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    fn factorial(n: usize) -> usize {
        (1..=n).product()
    }

    #[test]
    fn counts_for_small_windows() {
        let imp = impression(5, vec![1, 4]);
        assert_eq!(generate_tuples(&imp, 3).unwrap().len(), 6);
        let two = generate_tuples(&imp, 2).unwrap();
        assert_eq!(two.len(), 2);
        let orders: Vec<Vec<usize>> = two
            .iter()
            .map(|t| t.ads().map(|(_, c)| c).collect())
            .collect();
        assert_eq!(orders, vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn no_ad_slots_gives_single_organic_tuple() {
        let imp = impression(3, vec![]);
        let tuples = generate_tuples(&imp, 0).unwrap();
        assert_eq!(tuples.len(), 1);
        assert_eq!(tuples[0].ads().count(), 0);
        assert_eq!(tuples[0].organics().count(), 6);
    }

    #[test]
    fn window_bounds_are_checked() {
        let imp = impression(4, vec![1, 3, 5]);
        assert!(matches!(
            generate_tuples(&imp, 2),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            generate_tuples(&imp, 5),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn enumeration_order_is_subset_then_permutation() {
        let imp = impression(3, vec![0, 1]);
        let got: Vec<Vec<usize>> = generate_tuples(&imp, 3)
            .unwrap()
            .iter()
            .map(|t| t.ads().map(|(_, c)| c).collect())
            .collect();
        let want = vec![
            vec![0, 1],
            vec![1, 0],
            vec![0, 2],
            vec![2, 0],
            vec![1, 2],
            vec![2, 1],
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn counterfactual_short_list_leaves_slots_empty() {
        let imp = impression(1, vec![1, 4]);
        let tuples = generate_counterfactual_tuples(&imp, 2);
        // One ad into either of two positions.
        assert_eq!(tuples.len(), 2);
        for t in &tuples {
            assert_eq!(t.ads().count(), 1);
            assert_eq!(t.slots.iter().filter(|s| **s == Slot::Empty).count(), 1);
        }
        let none = generate_counterfactual_tuples(&impression(0, vec![1, 4]), 2);
        assert_eq!(none.len(), 1);
        assert_eq!(none[0].ads().count(), 0);
    }

    proptest! {
        #[test]
        fn count_matches_closed_form(k in 1usize..=6, extra in 0usize..=7) {
            let n_prime = (k + extra).min(8);
            prop_assume!(k <= n_prime);
            let positions: Vec<usize> = (0..k).collect();
            let imp = impression(8, positions);
            let tuples = generate_tuples(&imp, n_prime).unwrap();
            prop_assert_eq!(tuples.len(), factorial(k) * binomial(n_prime, k));
            prop_assert_eq!(tuples.len(), tuple_count(n_prime, k));
        }

        #[test]
        fn tuples_are_well_formed(k in 0usize..=3, extra in 0usize..=3) {
            let positions: Vec<usize> = [1, 3, 5][..k].to_vec();
            let imp = impression(6, positions.clone());
            let n_prime = k + extra;
            let tuples = generate_tuples(&imp, n_prime).unwrap();
            let again = generate_tuples(&imp, n_prime).unwrap();
            prop_assert_eq!(&tuples, &again);
            let organic_template: Vec<_> = tuples[0].organics().collect();
            let mut seen = std::collections::HashSet::new();
            for t in &tuples {
                let ads: Vec<_> = t.ads().collect();
                prop_assert_eq!(ads.iter().map(|(p, _)| *p).collect::<Vec<_>>(), positions.clone());
                let ids: std::collections::HashSet<_> = ads.iter().map(|(_, c)| *c).collect();
                prop_assert_eq!(ids.len(), k);
                prop_assert!(ads.iter().all(|(_, c)| *c < n_prime));
                prop_assert_eq!(t.organics().collect::<Vec<_>>(), organic_template.clone());
                prop_assert!(seen.insert(t.clone()));
            }
            for (i, (_, rank)) in organic_template.iter().enumerate() {
                prop_assert_eq!(*rank, i);
            }
        }
    }
}
