//! The evaluated allocation strategies.
//!
//! Sparsifiers ([`varopt_sparsify`], [`random_subgraph`]) let each arrival keep
//! at most `k` edges and hand the union to an exact matcher. Online baselines
//! ([`kvv_ranking`], [`mgs`]) commit irrevocably as arrivals come in.
//! [`Strategy::Offline`] is the full-information maximum matching.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{RealizedGraph, RngStream};
use crate::matching::{max_matching, BipartiteEdgeList};
use crate::varopt::{self, WeightedItem};
use crate::weights::FractionalSolution;

/// Edges kept by one arrival.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsifierReport {
    pub arrival_index: usize,
    /// Selected resources, ascending.
    pub selected: Vec<usize>,
    pub inclusion_probs: Vec<f64>,
    pub ipw_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyOutcome {
    pub matched: usize,
    /// Edges handed to the coordinator; the full edge count for online and
    /// offline strategies.
    pub sparsified_edges: usize,
    pub matched_arrivals: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Offline,
    Kvv,
    Random,
    Mgs,
    #[serde(rename = "varopt")]
    VarOpt,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Offline => "offline",
            Strategy::Kvv => "kvv",
            Strategy::Random => "random",
            Strategy::Mgs => "mgs",
            Strategy::VarOpt => "varopt",
        }
    }

    pub fn needs_budget(self) -> bool {
        matches!(self, Strategy::Random | Strategy::VarOpt)
    }

    pub fn needs_weights(self) -> bool {
        matches!(self, Strategy::Mgs | Strategy::VarOpt)
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "offline" => Ok(Strategy::Offline),
            "kvv" => Ok(Strategy::Kvv),
            "random" => Ok(Strategy::Random),
            "mgs" => Ok(Strategy::Mgs),
            "varopt" => Ok(Strategy::VarOpt),
            other => Err(Error::UnknownStrategy(other.to_string())),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the fractional solution guiding `varopt` and `mgs` comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WeightSource {
    Lp,
    MonteCarlo,
    File(PathBuf),
}

impl FromStr for WeightSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lp" => Ok(WeightSource::Lp),
            "montecarlo" | "mc" => Ok(WeightSource::MonteCarlo),
            "file" => Err(Error::Config(
                "weights = file requires a weights-in path".into(),
            )),
            other => Err(Error::Config(format!("unknown weight source `{other}`"))),
        }
    }
}

/// A strategy and its budget. Parsed from `name` or `name:k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    pub k: Option<usize>,
}

impl StrategyConfig {
    pub fn new(strategy: Strategy, k: Option<usize>) -> Result<Self> {
        match (strategy.needs_budget(), k) {
            (true, None) => Err(Error::Config(format!("{strategy} needs a budget k"))),
            (true, Some(0)) => Err(Error::Config(format!("{strategy} needs k >= 1"))),
            (false, Some(_)) => Err(Error::Config(format!("{strategy} takes no budget"))),
            _ => Ok(Self { strategy, k }),
        }
    }

    pub fn offline() -> Self {
        Self {
            strategy: Strategy::Offline,
            k: None,
        }
    }

    /// Stable label such as `varopt:5`.
    pub fn label(&self) -> String {
        match self.k {
            Some(k) => format!("{}:{k}", self.strategy),
            None => self.strategy.to_string(),
        }
    }
}

impl FromStr for StrategyConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, k) = match s.split_once(':') {
            Some((name, k)) => {
                let k = k
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad budget in `{s}`")))?;
                (name, Some(k))
            }
            None => (s, None),
        };
        Self::new(name.parse()?, k)
    }
}

impl fmt::Display for StrategyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// VarOpt local sparsifier: each arrival of type `t_j` samples `k` of its
/// edges with weights `x_ij`. Only edges with `x_ij > 0` are candidates; when
/// a type has no support the arrival falls back to uniform weights.
///
/// Arrival `i` draws from `stream.derive(i)`, so its choice depends on nothing
/// but its own type.
pub fn varopt_sparsify(
    graph: &RealizedGraph<'_>,
    x: &FractionalSolution,
    k: usize,
    stream: &RngStream,
) -> Result<Vec<SparsifierReport>> {
    if k == 0 {
        return Err(Error::Domain("budget k = 0".into()));
    }
    let instance = graph.instance();
    (0..graph.len())
        .map(|i| {
            let j = graph.arrival_type(i);
            let neighbours = graph.neighbors(i);
            if neighbours.is_empty() {
                return Ok(empty_report(i));
            }
            let row = x.row(j);
            let mut items: Vec<WeightedItem> = neighbours
                .iter()
                .zip(row)
                .filter(|(_, &w)| w > 0.0)
                .map(|(&r, &w)| WeightedItem::new(r as u64, w))
                .collect();
            if items.is_empty() {
                let uniform = 1.0 / neighbours.len() as f64;
                items = neighbours
                    .iter()
                    .map(|&r| WeightedItem::new(r as u64, uniform))
                    .collect();
            }
            debug_assert_eq!(instance.demand_type(j).degree(), row.len());
            let sample = varopt::draw(&items, k, &stream.derive(i as u64))?;
            let mut selected: Vec<usize> = sample.included.iter().map(|&id| id as usize).collect();
            selected.sort_unstable();
            let inclusion_probs = selected
                .iter()
                .map(|&r| sample.inclusion_prob[&(r as u64)])
                .collect();
            let ipw_weights = selected
                .iter()
                .map(|&r| sample.ipw_weight[&(r as u64)])
                .collect();
            Ok(SparsifierReport {
                arrival_index: i,
                selected,
                inclusion_probs,
                ipw_weights,
            })
        })
        .collect()
}

/// Uniform `k`-subset of each arrival's edges, without replacement.
pub fn random_subgraph(
    graph: &RealizedGraph<'_>,
    k: usize,
    stream: &RngStream,
) -> Vec<SparsifierReport> {
    (0..graph.len())
        .map(|i| {
            let neighbours = graph.neighbors(i);
            let d = neighbours.len();
            if d == 0 {
                return empty_report(i);
            }
            let keep = k.min(d);
            let mut rng = stream.derive(i as u64).rng();
            let mut selected: Vec<usize> = index::sample(&mut rng, d, keep)
                .into_iter()
                .map(|p| neighbours[p])
                .collect();
            selected.sort_unstable();
            let pi = keep as f64 / d as f64;
            SparsifierReport {
                arrival_index: i,
                inclusion_probs: vec![pi; keep],
                ipw_weights: vec![1.0 / (d as f64 * pi); keep],
                selected,
            }
        })
        .collect()
}

fn empty_report(i: usize) -> SparsifierReport {
    SparsifierReport {
        arrival_index: i,
        selected: Vec::new(),
        inclusion_probs: Vec::new(),
        ipw_weights: Vec::new(),
    }
}

/// The sparsified graph `G_S` as an edge list.
pub fn sparse_graph(graph: &RealizedGraph<'_>, reports: &[SparsifierReport]) -> BipartiteEdgeList {
    let edges = reports
        .iter()
        .flat_map(|rep| rep.selected.iter().map(move |&r| (rep.arrival_index, r)))
        .collect();
    BipartiteEdgeList::from_trusted(graph.len(), graph.instance().resource_count(), edges)
}

/// `G_S` together with the inverse-probability weight of each edge.
pub fn weighted_sparse_graph(
    graph: &RealizedGraph<'_>,
    reports: &[SparsifierReport],
) -> (BipartiteEdgeList, Vec<f64>) {
    let weights = reports
        .iter()
        .flat_map(|rep| rep.ipw_weights.iter().copied())
        .collect();
    (sparse_graph(graph, reports), weights)
}

pub fn full_graph(graph: &RealizedGraph<'_>) -> BipartiteEdgeList {
    BipartiteEdgeList::from_trusted(
        graph.len(),
        graph.instance().resource_count(),
        graph.edges().collect(),
    )
}

fn outcome_from_matching(graph: &BipartiteEdgeList) -> StrategyOutcome {
    let m = max_matching(graph);
    let mut matched_arrivals = vec![false; graph.left_count];
    for &(l, _) in &m.pairs {
        matched_arrivals[l] = true;
    }
    StrategyOutcome {
        matched: m.size,
        sparsified_edges: graph.edges.len(),
        matched_arrivals,
    }
}

/// Ranking: one uniformly random permanent priority over resources; each
/// arrival takes its highest-priority free neighbour.
pub fn kvv_ranking(graph: &RealizedGraph<'_>, stream: &RngStream) -> StrategyOutcome {
    let v = graph.instance().resource_count();
    let mut rank: Vec<usize> = (0..v).collect();
    rank.shuffle(&mut stream.rng());
    let mut taken = vec![false; v];
    let matched_arrivals: Vec<bool> = (0..graph.len())
        .map(|i| {
            let best = graph
                .neighbors(i)
                .iter()
                .copied()
                .filter(|&r| !taken[r])
                .min_by_key(|&r| rank[r]);
            match best {
                Some(r) => {
                    taken[r] = true;
                    true
                }
                None => false,
            }
        })
        .collect();
    online_outcome(graph, matched_arrivals)
}

/// Two-suggested-matchings baseline. Before the arrivals, every type draws a
/// first suggestion with probability `x_ij` (none with the leftover mass) and
/// a second suggestion from the remaining weights renormalised. Each arrival
/// tries its type's first, then second suggestion and takes the first free
/// one.
pub fn mgs(
    graph: &RealizedGraph<'_>,
    x: &FractionalSolution,
    stream: &RngStream,
) -> StrategyOutcome {
    let instance = graph.instance();
    let mut rng = stream.rng();
    let guidance: Vec<[Option<usize>; 2]> = instance
        .types()
        .iter()
        .enumerate()
        .map(|(j, t)| {
            let row = x.row(j);
            let first = pick_weighted(&t.compatible, row, None, 1.0, false, &mut rng);
            let rest: f64 = t
                .compatible
                .iter()
                .zip(row)
                .filter(|(&r, _)| Some(r) != first)
                .map(|(_, &w)| w)
                .sum();
            let second = if rest > 0.0 {
                pick_weighted(&t.compatible, row, first, rest, true, &mut rng)
            } else {
                None
            };
            [first, second]
        })
        .collect();

    let mut taken = vec![false; instance.resource_count()];
    let matched_arrivals = (0..graph.len())
        .map(|i| {
            for r in guidance[graph.arrival_type(i)].into_iter().flatten() {
                if !taken[r] {
                    taken[r] = true;
                    return true;
                }
            }
            false
        })
        .collect();
    online_outcome(graph, matched_arrivals)
}

/// Draws a resource with probability `w / scale`, skipping `exclude`.
/// Returns `None` with the leftover probability `1 - Σw/scale` unless the
/// weights are known to `exhaust` the scale.
fn pick_weighted<R: Rng + ?Sized>(
    resources: &[usize],
    weights: &[f64],
    exclude: Option<usize>,
    scale: f64,
    exhaust: bool,
    rng: &mut R,
) -> Option<usize> {
    let mut u = rng.random::<f64>() * scale;
    let mut last = None;
    for (&r, &w) in resources.iter().zip(weights) {
        if Some(r) == exclude || w <= 0.0 {
            continue;
        }
        last = Some(r);
        if u < w {
            return Some(r);
        }
        u -= w;
    }
    // Rounding can leave a sliver when the weights sum to `scale` exactly.
    if exhaust {
        last
    } else {
        None
    }
}

fn online_outcome(graph: &RealizedGraph<'_>, matched_arrivals: Vec<bool>) -> StrategyOutcome {
    StrategyOutcome {
        matched: matched_arrivals.iter().filter(|&&m| m).count(),
        sparsified_edges: graph.edge_count(),
        matched_arrivals,
    }
}

/// Runs one strategy on a realization. `x` is required for `varopt` and `mgs`.
pub fn run_strategy(
    graph: &RealizedGraph<'_>,
    config: &StrategyConfig,
    x: Option<&FractionalSolution>,
    stream: &RngStream,
) -> Result<StrategyOutcome> {
    let need_x = || {
        x.ok_or_else(|| Error::Config(format!("{} needs a fractional solution", config.strategy)))
    };
    let budget = || {
        config
            .k
            .ok_or_else(|| Error::Config(format!("{} needs k", config.strategy)))
    };
    Ok(match config.strategy {
        Strategy::Offline => outcome_from_matching(&full_graph(graph)),
        Strategy::Kvv => kvv_ranking(graph, stream),
        Strategy::Mgs => mgs(graph, need_x()?, stream),
        Strategy::Random => {
            let reports = random_subgraph(graph, budget()?, stream);
            outcome_from_matching(&sparse_graph(graph, &reports))
        }
        Strategy::VarOpt => {
            let reports = varopt_sparsify(graph, need_x()?, budget()?, stream)?;
            outcome_from_matching(&sparse_graph(graph, &reports))
        }
    })
}
