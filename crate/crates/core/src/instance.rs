//! Stochastic instances `(V, D, n)`, realized arrival graphs and the seeded
//! random streams every randomized routine draws from.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// One request type `t_j`: its single-draw probability and the sorted set of
/// compatible resource indices.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandType {
    pub type_id: usize,
    pub probability: f64,
    pub compatible: Vec<usize>,
}

impl DemandType {
    pub fn degree(&self) -> usize {
        self.compatible.len()
    }

    /// Position of `resource` inside `compatible`, if present.
    pub fn position(&self, resource: usize) -> Option<usize> {
        self.compatible.binary_search(&resource).ok()
    }
}

/// Resources, a discrete demand distribution over compatibility sets, and the
/// number of i.i.d. arrivals.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticInstance {
    resources: Vec<String>,
    types: Vec<DemandType>,
    arrivals: usize,
    cumulative: Vec<f64>,
}

impl StochasticInstance {
    /// Builds an instance from `(probability, compatible)` pairs. Compatible
    /// lists may come in any order; duplicates are rejected.
    pub fn new(
        resources: Vec<String>,
        types: Vec<(f64, Vec<usize>)>,
        arrivals: usize,
    ) -> Result<Self> {
        Self::build(resources, types, arrivals, false)
    }

    /// Like [`StochasticInstance::new`] but accepts types with no compatible
    /// resource. Such types model demand that can never be served.
    pub fn with_isolated_types(
        resources: Vec<String>,
        types: Vec<(f64, Vec<usize>)>,
        arrivals: usize,
    ) -> Result<Self> {
        Self::build(resources, types, arrivals, true)
    }

    fn build(
        resources: Vec<String>,
        types: Vec<(f64, Vec<usize>)>,
        arrivals: usize,
        allow_isolated: bool,
    ) -> Result<Self> {
        if arrivals == 0 {
            return Err(Error::InvalidInstance(
                "arrival count must be positive".into(),
            ));
        }
        if types.is_empty() {
            return Err(Error::InvalidInstance("no demand types".into()));
        }
        let mut seen = HashSet::with_capacity(resources.len());
        for r in &resources {
            if !seen.insert(r.as_str()) {
                return Err(Error::InvalidInstance(format!(
                    "duplicate resource id `{r}`"
                )));
            }
        }

        let mut demand = Vec::with_capacity(types.len());
        let mut total = 0.0;
        for (type_id, (p, mut compatible)) in types.into_iter().enumerate() {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                return Err(Error::InvalidInstance(format!(
                    "type {type_id} has probability {p} outside [0, 1]"
                )));
            }
            compatible.sort_unstable();
            if compatible.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidInstance(format!(
                    "type {type_id} lists a resource twice"
                )));
            }
            if let Some(&last) = compatible.last() {
                if last >= resources.len() {
                    return Err(Error::InvalidInstance(format!(
                        "type {type_id} references resource {last} but |V| = {}",
                        resources.len()
                    )));
                }
            } else if !allow_isolated {
                return Err(Error::InvalidInstance(format!(
                    "type {type_id} has an empty compatibility set"
                )));
            }
            total += p;
            demand.push(DemandType {
                type_id,
                probability: p,
                compatible,
            });
        }
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::InvalidInstance(format!(
                "type probabilities sum to {total}, expected 1"
            )));
        }

        let mut cumulative = Vec::with_capacity(demand.len());
        let mut acc = 0.0;
        for t in &demand {
            acc += t.probability;
            cumulative.push(acc);
        }

        Ok(Self {
            resources,
            types: demand,
            arrivals,
            cumulative,
        })
    }

    pub fn resources(&self) -> &[String] {
        &self.resources
    }

    pub fn resource_count(&self) -> usize {
        self.resources.len()
    }

    pub fn types(&self) -> &[DemandType] {
        &self.types
    }

    pub fn demand_type(&self, j: usize) -> &DemandType {
        &self.types[j]
    }

    /// Number of arrivals `n`.
    pub fn arrivals(&self) -> usize {
        self.arrivals
    }

    /// Expected number of type-`j` arrivals, `n * p_j`.
    pub fn expected_arrivals(&self, j: usize) -> f64 {
        self.arrivals as f64 * self.types[j].probability
    }

    /// Total number of type-resource compatibility pairs.
    pub fn edge_count(&self) -> usize {
        self.types.iter().map(DemandType::degree).sum()
    }

    /// Draws one type index by inverse CDF.
    pub fn sample_type<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("instance has types");
        let u = rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        // Zero-probability types at the tail share the final cumulative value.
        let mut idx = idx.min(self.types.len() - 1);
        while self.types[idx].probability == 0.0 && idx > 0 {
            idx -= 1;
        }
        idx
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: InstanceDocument = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInstance(format!("bad instance JSON: {e}")))?;
        Self::new(
            doc.resources,
            doc.types.into_iter().map(|t| (t.p, t.compatible)).collect(),
            doc.n,
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::InvalidInstance(reason) => Error::Format {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    pub fn to_json_string(&self) -> String {
        let doc = InstanceDocument {
            resources: self.resources.clone(),
            types: self
                .types
                .iter()
                .map(|t| TypeDocument {
                    p: t.probability,
                    compatible: t.compatible.clone(),
                })
                .collect(),
            n: self.arrivals,
        };
        serde_json::to_string_pretty(&doc).expect("instance serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceDocument {
    resources: Vec<String>,
    types: Vec<TypeDocument>,
    n: usize,
}

#[derive(Serialize, Deserialize)]
struct TypeDocument {
    p: f64,
    compatible: Vec<usize>,
}

/// A realization of the arrival process: `arrivals[i]` is the type of the
/// `i`-th request, in arrival order. Request `i` is adjacent to exactly
/// `Γ(t_{arrivals[i]})`.
#[derive(Debug, Clone)]
pub struct RealizedGraph<'a> {
    instance: &'a StochasticInstance,
    arrivals: Vec<usize>,
}

impl<'a> RealizedGraph<'a> {
    /// Wraps an explicit arrival sequence. The length is not forced to equal
    /// `n` so that tests and replays can use partial sequences.
    pub fn from_arrivals(instance: &'a StochasticInstance, arrivals: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = arrivals.iter().find(|&&j| j >= instance.types.len()) {
            return Err(Error::InvalidGraph(format!(
                "arrival of unknown type {bad}"
            )));
        }
        Ok(Self { instance, arrivals })
    }

    pub fn instance(&self) -> &'a StochasticInstance {
        self.instance
    }

    pub fn arrivals(&self) -> &[usize] {
        &self.arrivals
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    pub fn arrival_type(&self, i: usize) -> usize {
        self.arrivals[i]
    }

    /// `R_i`: resources compatible with arrival `i`.
    pub fn neighbors(&self, i: usize) -> &'a [usize] {
        &self.instance.types[self.arrivals[i]].compatible
    }

    pub fn edge_count(&self) -> usize {
        (0..self.len()).map(|i| self.neighbors(i).len()).sum()
    }

    /// Full edge list `(arrival, resource)` in arrival order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).flat_map(move |i| self.neighbors(i).iter().map(move |&r| (i, r)))
    }
}

/// Draws `n` arrivals i.i.d. from the demand distribution.
pub fn realize<'a>(instance: &'a StochasticInstance, rng: &RngStream) -> RealizedGraph<'a> {
    let mut gen = rng.rng();
    let arrivals = (0..instance.arrivals)
        .map(|_| instance.sample_type(&mut gen))
        .collect();
    RealizedGraph { instance, arrivals }
}

/// Histogram of arrival types. Absent types are omitted.
pub fn micro_type_count(graph: &RealizedGraph<'_>) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for &j in graph.arrivals() {
        *counts.entry(j).or_insert(0) += 1;
    }
    counts
}

/// A reproducible random stream keyed by `(seed, stream_id)`.
///
/// Streams are cheap to derive: [`RngStream::derive`] mixes a tag into the
/// stream id, so per-trial and per-arrival substreams never share state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Substream identified by `tag` under this stream.
    pub fn derive(&self, tag: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(tag.wrapping_add(0x9e37_79b9))),
        }
    }

    /// Substream keyed by a string label (e.g. a strategy name).
    pub fn derive_label(&self, label: &str) -> Self {
        // FNV-1a; stable across platforms and releases.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        self.derive(h)
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("v{i}")).collect()
    }

    fn complete_uniform(n: usize) -> StochasticInstance {
        let types = (0..n).map(|_| (1.0 / n as f64, (0..n).collect())).collect();
        StochasticInstance::new(names(n), types, n).unwrap()
    }

    #[test]
    fn single_type_realization() {
        let inst = StochasticInstance::new(names(1), vec![(1.0, vec![0])], 3).unwrap();
        let g = realize(&inst, &RngStream::new(1, 0));
        assert_eq!(g.arrivals(), &[0, 0, 0]);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 0), (1, 0), (2, 0)]);
        assert_eq!(micro_type_count(&g), BTreeMap::from([(0, 3)]));
    }

    #[test]
    fn two_types_binomial_concentration() {
        let inst = StochasticInstance::new(names(2), vec![(0.5, vec![0]), (0.5, vec![1])], 10_000)
            .unwrap();
        let g = realize(&inst, &RngStream::new(42, 7));
        let zeros = g.arrivals().iter().filter(|&&j| j == 0).count() as f64;
        assert!((zeros - 5000.0).abs() <= 150.0, "type-0 count {zeros}");
    }

    #[test]
    fn complete_uniform_every_arrival_sees_all_resources() {
        let inst = complete_uniform(12);
        let g = realize(&inst, &RngStream::new(3, 3));
        assert!((0..g.len()).all(|i| g.neighbors(i).len() == 12));
    }

    #[test]
    fn empty_arrivals_histogram() {
        let inst = complete_uniform(3);
        let g = RealizedGraph::from_arrivals(&inst, vec![]).unwrap();
        assert!(micro_type_count(&g).is_empty());
    }

    #[test]
    fn histogram_conserves_arrivals() {
        let inst = complete_uniform(9);
        for s in 0..20 {
            let g = realize(&inst, &RngStream::new(s, 0));
            assert_eq!(
                micro_type_count(&g).values().sum::<usize>(),
                inst.arrivals()
            );
        }
    }

    #[test]
    fn realization_is_reproducible() {
        let inst = complete_uniform(30);
        let s = RngStream::new(99, 5);
        assert_eq!(realize(&inst, &s).arrivals(), realize(&inst, &s).arrivals());
        assert_ne!(
            realize(&inst, &s).arrivals(),
            realize(&inst, &s.derive(1)).arrivals()
        );
    }

    #[test]
    fn empirical_type_frequencies_within_four_sigma() {
        let probs = [0.1, 0.2, 0.3, 0.4];
        let types = probs.iter().map(|&p| (p, vec![0])).collect();
        let inst = StochasticInstance::new(names(1), types, 1).unwrap();
        let draws = 10_000usize;
        let mut counts = [0usize; 4];
        for t in 0..draws {
            let g = realize(&inst, &RngStream::new(5, t as u64));
            counts[g.arrival_type(0)] += 1;
        }
        for (j, &p) in probs.iter().enumerate() {
            let sigma = (p * (1.0 - p) / draws as f64).sqrt();
            let freq = counts[j] as f64 / draws as f64;
            assert!((freq - p).abs() < 4.0 * sigma, "type {j}: {freq} vs {p}");
        }
    }

    #[test]
    fn zero_probability_types_never_drawn() {
        let inst = StochasticInstance::new(
            names(2),
            vec![(0.0, vec![0]), (1.0, vec![1]), (0.0, vec![0])],
            500,
        )
        .unwrap();
        let g = realize(&inst, &RngStream::new(0, 0));
        assert!(g.arrivals().iter().all(|&j| j == 1));
    }

    #[test]
    fn rejects_invalid_instances() {
        let bad_sum = StochasticInstance::new(names(1), vec![(0.5, vec![0])], 1);
        assert!(matches!(bad_sum, Err(Error::InvalidInstance(_))));
        let dup = StochasticInstance::new(names(2), vec![(1.0, vec![1, 1])], 1);
        assert!(dup.is_err());
        let range = StochasticInstance::new(names(2), vec![(1.0, vec![2])], 1);
        assert!(range.is_err());
        let empty = StochasticInstance::new(names(2), vec![(1.0, vec![])], 1);
        assert!(empty.is_err());
        let dup_names =
            StochasticInstance::new(vec!["a".into(), "a".into()], vec![(1.0, vec![0])], 1);
        assert!(dup_names.is_err());
        assert!(StochasticInstance::with_isolated_types(names(2), vec![(1.0, vec![])], 1).is_ok());
    }

    #[test]
    fn compatibility_is_sorted_on_construction() {
        let inst = StochasticInstance::new(names(3), vec![(1.0, vec![2, 0, 1])], 1).unwrap();
        assert_eq!(inst.demand_type(0).compatible, vec![0, 1, 2]);
    }

    #[test]
    fn json_round_trip() {
        let inst = StochasticInstance::new(names(3), vec![(0.25, vec![0, 2]), (0.75, vec![1])], 4)
            .unwrap();
        let back = StochasticInstance::from_json_str(&inst.to_json_string()).unwrap();
        assert_eq!(inst, back);
    }
}
