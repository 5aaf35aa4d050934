//! Variance-optimal (VarOpt) fixed-size sampling.
//!
//! Given weights `x_e >= 0` and a budget `k`, every positive item gets the
//! inclusion probability `π_e = min(1, τ·x_e)` where the threshold `τ` makes
//! the probabilities sum to `min(k, |E⁺|)`. Items with `τ·x_e >= 1` are always
//! taken; the remaining "light" items are rounded with the pivotal method over
//! a random order, which keeps the sample size exact and the inclusion
//! indicators negatively associated. Each selected item carries the
//! inverse-probability weight `w_e = x_e / π_e`; these sum to `Σ x_e` on every
//! draw.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::instance::RngStream;

/// Probabilities this close to 1 are treated as certain inclusion.
const CERTAIN: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedItem {
    pub id: u64,
    pub weight: f64,
}

impl WeightedItem {
    pub fn new(id: u64, weight: f64) -> Self {
        Self { id, weight }
    }
}

/// Threshold and per-item inclusion probabilities, aligned with the input
/// slice. Zero-weight items have probability 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Threshold {
    pub tau: f64,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarOptSample {
    pub threshold: f64,
    /// Selected ids in input order.
    pub included: Vec<u64>,
    /// `π_e` for every input item.
    pub inclusion_prob: BTreeMap<u64, f64>,
    /// `x_e / π_e` for every selected item.
    pub ipw_weight: BTreeMap<u64, f64>,
}

impl VarOptSample {
    pub fn len(&self) -> usize {
        self.included.len()
    }

    pub fn is_empty(&self) -> bool {
        self.included.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.ipw_weight.values().sum()
    }
}

fn validate(items: &[WeightedItem], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Domain("sample budget k = 0".into()));
    }
    if let Some(bad) = items
        .iter()
        .find(|it| !(it.weight >= 0.0) || !it.weight.is_finite())
    {
        return Err(Error::Domain(format!(
            "weight {} of item {}",
            bad.weight, bad.id
        )));
    }
    if items.iter().all(|it| it.weight == 0.0) {
        return Err(Error::AllZeroWeights);
    }
    Ok(())
}

/// Solves `Σ min(1, τ·x_e) = min(k, |E⁺|)` exactly.
///
/// Items are scanned in decreasing weight; the first `h` are made certain
/// until the remaining light mass can absorb the leftover budget, at which
/// point `τ = (k - h) / Σ_{light} x_e`.
pub fn compute_threshold(items: &[WeightedItem], k: usize) -> Result<Threshold> {
    validate(items, k)?;

    let mut order: Vec<usize> = (0..items.len())
        .filter(|&i| items[i].weight > 0.0)
        .collect();
    let positive = order.len();
    let mut probs = vec![0.0; items.len()];

    if k >= positive {
        let min_w = order
            .iter()
            .map(|&i| items[i].weight)
            .fold(f64::INFINITY, f64::min);
        for &i in &order {
            probs[i] = 1.0;
        }
        return Ok(Threshold {
            tau: 1.0 / min_w,
            probs,
        });
    }

    order.sort_by(|&a, &b| items[b].weight.total_cmp(&items[a].weight).then(a.cmp(&b)));
    // Suffix sums of the sorted weights so each candidate split is O(1).
    let mut suffix = vec![0.0; positive + 1];
    for pos in (0..positive).rev() {
        suffix[pos] = suffix[pos + 1] + items[order[pos]].weight;
    }

    let mut tau = 0.0;
    let mut heavy = 0;
    for h in 0..k {
        let candidate = (k - h) as f64 / suffix[h];
        if candidate * items[order[h]].weight <= 1.0 {
            tau = candidate;
            heavy = h;
            break;
        }
    }
    debug_assert!(tau > 0.0, "a split with h < k always exists when k < |E+|");

    for (pos, &i) in order.iter().enumerate() {
        probs[i] = if pos < heavy {
            1.0
        } else {
            (tau * items[i].weight).min(1.0)
        };
    }
    Ok(Threshold { tau, probs })
}

/// Draws a VarOpt sample of exactly `min(k, |E⁺|)` items.
pub fn draw(items: &[WeightedItem], k: usize, stream: &RngStream) -> Result<VarOptSample> {
    let mut rng = stream.rng();
    draw_with(items, k, &mut rng)
}

/// [`draw`] with a caller-provided generator.
pub fn draw_with<R: Rng + ?Sized>(
    items: &[WeightedItem],
    k: usize,
    rng: &mut R,
) -> Result<VarOptSample> {
    let Threshold { tau, probs } = compute_threshold(items, k)?;
    let selected = round_pivotal(&probs, rng);

    let mut included = Vec::new();
    let mut ipw_weight = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        if selected[i] {
            included.push(item.id);
            ipw_weight.insert(item.id, item.weight / probs[i]);
        }
    }
    let inclusion_prob = items
        .iter()
        .zip(&probs)
        .map(|(it, &p)| (it.id, p))
        .collect();
    Ok(VarOptSample {
        threshold: tau,
        included,
        inclusion_prob,
        ipw_weight,
    })
}

/// Dependent rounding of a probability vector with integral sum.
///
/// Certain items are taken outright. The fractional ones are visited in a
/// uniformly random order and paired with a single carried "pivot": each
/// duel pushes one of the two values to 0 or 1 while preserving both
/// marginals, so exactly `Σ π` items survive.
fn round_pivotal<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Vec<bool> {
    let mut selected = vec![false; probs.len()];
    let mut light = Vec::new();
    for (i, &p) in probs.iter().enumerate() {
        if p >= CERTAIN {
            selected[i] = true;
        } else if p > 0.0 {
            light.push(i);
        }
    }
    light.shuffle(rng);

    let mut pivot: Option<(usize, f64)> = None;
    for &b in &light {
        let pb = probs[b];
        let Some((a, pa)) = pivot else {
            pivot = Some((b, pb));
            continue;
        };
        let sum = pa + pb;
        if sum < 1.0 {
            // One of the pair drops to 0; the other carries the combined mass.
            if rng.random::<f64>() * sum < pa {
                pivot = Some((a, sum));
            } else {
                pivot = Some((b, sum));
            }
        } else {
            // One of the pair is fixed at 1; the other carries the surplus.
            let rest = sum - 1.0;
            if rng.random::<f64>() * (2.0 - sum) < 1.0 - pb {
                selected[a] = true;
                pivot = Some((b, rest));
            } else {
                selected[b] = true;
                pivot = Some((a, rest));
            }
        }
    }
    // The leftover mass is an integer up to rounding error.
    if let Some((a, pa)) = pivot {
        if pa > 0.5 {
            selected[a] = true;
        }
    }
    selected
}

/// Horvitz–Thompson estimate of `Σ_{e ∈ subset} x_e`.
pub fn estimate_subset_sum(sample: &VarOptSample, subset: &BTreeSet<u64>) -> f64 {
    sample
        .ipw_weight
        .iter()
        .filter(|(id, _)| subset.contains(id))
        .map(|(_, w)| w)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn items(ws: &[f64]) -> Vec<WeightedItem> {
        ws.iter()
            .enumerate()
            .map(|(i, &w)| WeightedItem::new(i as u64, w))
            .collect()
    }

    /// Independent root finder for `Σ min(1, τx) = target`.
    fn bisect_tau(ws: &[f64], target: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        let f = |t: f64| ws.iter().map(|&w| (t * w).min(1.0)).sum::<f64>();
        while f(hi) < target {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    #[test]
    fn threshold_three_items() {
        let t = compute_threshold(&items(&[0.5, 0.3, 0.2]), 2).unwrap();
        assert!((t.tau - bisect_tau(&[0.5, 0.3, 0.2], 2.0)).abs() < 1e-9);
        assert!((t.tau - 2.0).abs() < 1e-12);
        for (p, e) in t.probs.iter().zip([1.0, 0.6, 0.4]) {
            assert!((p - e).abs() < 1e-12);
        }
    }

    #[test]
    fn budget_exceeding_items() {
        let t = compute_threshold(&items(&[0.7, 0.1]), 5).unwrap();
        assert_eq!(t.probs, vec![1.0, 1.0]);
    }

    #[test]
    fn uniform_weights_scale_to_k_over_n() {
        let n = 20;
        let ws = vec![1.0 / n as f64; n];
        for k in 1..=n {
            let t = compute_threshold(&items(&ws), k).unwrap();
            assert!(t
                .probs
                .iter()
                .all(|&p| (p - k as f64 / n as f64).abs() < 1e-12));
        }
    }

    #[test]
    fn zero_weights_are_excluded() {
        assert!(matches!(
            compute_threshold(&items(&[0.0, 0.0]), 1),
            Err(Error::AllZeroWeights)
        ));
        let t = compute_threshold(&items(&[0.0, 0.4, 0.2, 0.0]), 1).unwrap();
        assert_eq!(t.probs[0], 0.0);
        assert_eq!(t.probs[3], 0.0);
        let s = draw(&items(&[0.0, 0.4, 0.2, 0.0]), 3, &RngStream::new(1, 1)).unwrap();
        assert_eq!(s.included, vec![1, 2]);
    }

    #[test]
    fn heavy_items_drawn_every_time() {
        let ws = [0.5, 0.3, 0.2];
        for s in 0..500 {
            let sample = draw(&items(&ws), 2, &RngStream::new(s, 0)).unwrap();
            assert_eq!(sample.len(), 2);
            assert!(sample.included.contains(&0));
            for w in sample.ipw_weight.values() {
                assert!((w - 0.5).abs() < 1e-12);
            }
            assert!((sample.weight_sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_item() {
        let s = draw(&items(&[0.25]), 1, &RngStream::new(0, 0)).unwrap();
        assert_eq!(s.included, vec![0]);
        assert_eq!(s.ipw_weight[&0], 0.25);
    }

    #[test]
    fn subset_sums() {
        let ws = [0.5, 0.3, 0.2];
        let s = draw(&items(&ws), 2, &RngStream::new(4, 4)).unwrap();
        let all: BTreeSet<u64> = [0, 1, 2].into();
        assert!((estimate_subset_sum(&s, &all) - 1.0).abs() < 1e-12);
        assert_eq!(estimate_subset_sum(&s, &BTreeSet::new()), 0.0);

        let only_b: BTreeSet<u64> = [1].into();
        let draws = 100_000;
        let mut rng = RngStream::new(11, 0).rng();
        let mean = (0..draws)
            .map(|_| estimate_subset_sum(&draw_with(&items(&ws), 2, &mut rng).unwrap(), &only_b))
            .sum::<f64>()
            / draws as f64;
        assert!((mean - 0.3).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn marginals_converge() {
        let ws = [0.5, 0.3, 0.2];
        let draws = 100_000;
        let mut rng = RngStream::new(2024, 0).rng();
        let mut hits = [0usize; 3];
        for _ in 0..draws {
            for id in draw_with(&items(&ws), 2, &mut rng).unwrap().included {
                hits[id as usize] += 1;
            }
        }
        let freq: Vec<f64> = hits.iter().map(|&h| h as f64 / draws as f64).collect();
        assert_eq!(freq[0], 1.0);
        assert!((freq[1] - 0.6).abs() < 0.005, "{freq:?}");
        assert!((freq[2] - 0.4).abs() < 0.005, "{freq:?}");
    }

    #[test]
    fn pairwise_covariances_nonpositive() {
        let ws = [0.9, 0.45, 0.3, 0.3, 0.2, 0.15, 0.1, 0.05];
        let k = 3;
        let t = compute_threshold(&items(&ws), k).unwrap();
        let draws = 100_000;
        let mut rng = RngStream::new(8, 8).rng();
        let m = ws.len();
        let mut single = vec![0f64; m];
        let mut joint = vec![vec![0f64; m]; m];
        for _ in 0..draws {
            let s = draw_with(&items(&ws), k, &mut rng).unwrap();
            for &a in &s.included {
                single[a as usize] += 1.0;
                for &b in &s.included {
                    joint[a as usize][b as usize] += 1.0;
                }
            }
        }
        let d = draws as f64;
        for a in 0..m {
            for b in (a + 1)..m {
                if t.probs[a] >= CERTAIN || t.probs[b] >= CERTAIN {
                    continue;
                }
                let (pa, pb, pab) = (single[a] / d, single[b] / d, joint[a][b] / d);
                let cov = pab - pa * pb;
                // Standard error of the product-moment estimate is bounded by
                // sqrt(pab (1 - pab) / d) plus the marginal terms.
                let sigma = ((pab * (1.0 - pab) + pa * pb) / d).sqrt() + 1e-4;
                assert!(cov <= 4.0 * sigma, "cov({a},{b}) = {cov}");
            }
        }
    }

    proptest! {
        #[test]
        fn exact_size_and_weight_sum(
            ws in prop::collection::vec(prop_oneof![Just(0.0), 0.0001f64..5.0], 1..50),
            k in 1usize..20,
            seed in any::<u64>(),
        ) {
            prop_assume!(ws.iter().any(|&w| w > 0.0));
            let its = items(&ws);
            let positive = ws.iter().filter(|&&w| w > 0.0).count();
            let target = k.min(positive);
            let t = compute_threshold(&its, k).unwrap();
            prop_assert!((t.probs.iter().sum::<f64>() - target as f64).abs() < 1e-9);
            let total: f64 = ws.iter().sum();
            for (&p, &w) in t.probs.iter().zip(&ws) {
                if w > 0.0 {
                    prop_assert!((p - (t.tau * w).min(1.0)).abs() < 1e-9);
                    prop_assert!(p + 1e-9 >= (k as f64 * w / total).min(1.0));
                } else {
                    prop_assert_eq!(p, 0.0);
                }
            }
            let s = draw(&its, k, &RngStream::new(seed, 0)).unwrap();
            prop_assert_eq!(s.len(), target);
            prop_assert!((s.weight_sum() - total).abs() < 1e-9);
            for (i, &p) in t.probs.iter().enumerate() {
                if p >= CERTAIN {
                    prop_assert!(s.included.contains(&(i as u64)));
                }
            }
        }
    }
}
