//! Fractional solutions of the expected-instance LP.
//!
//! `x_ij` is the probability that a type-`j` arrival is served by resource
//! `i`. A solution is feasible when every resource receives expected load
//! `Σ_j n·p_j·x_ij <= 1` and every type routes `Σ_i x_ij <= 1`. Its objective is
//! `Z = Σ_j n·p_j·Σ_i x_ij`.
//!
//! The exact optimum is obtained as a max-flow. Substituting `y_ij = n·p_j·x_ij`
//! turns the type limit into `Σ_i y_ij <= n·p_j` and the capacity constraint
//! into `Σ_j y_ij <= 1`, i.e. a flow network
//! `source -(n·p_j)-> type j -(∞)-> resource i -(1)-> sink`. Every feasible flow
//! maps back to a feasible `x` with the same value and vice versa, so the
//! maximum flow equals `OPT_LP`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{realize, RngStream, StochasticInstance};
use crate::matching::{max_matching_shuffled, BipartiteEdgeList};

const CAPACITY_TOLERANCE: f64 = 1e-7;
const TYPE_TOLERANCE: f64 = 1e-9;

/// `rows[j][p]` holds `x` for type `j` and resource `Γ(t_j)[p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalSolution {
    arrivals: usize,
    rows: Vec<Vec<f64>>,
    objective: f64,
}

impl FractionalSolution {
    pub fn from_rows(instance: &StochasticInstance, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != instance.types().len() {
            return Err(Error::Infeasible(format!(
                "{} rows for {} types",
                rows.len(),
                instance.types().len()
            )));
        }
        for (j, row) in rows.iter().enumerate() {
            if row.len() != instance.demand_type(j).degree() {
                return Err(Error::Infeasible(format!(
                    "row {j} does not match Γ(t_{j})"
                )));
            }
            if let Some(v) = row.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                return Err(Error::Infeasible(format!("row {j} has value {v}")));
            }
        }
        let objective = rows
            .iter()
            .enumerate()
            .map(|(j, row)| instance.expected_arrivals(j) * row.iter().sum::<f64>())
            .sum();
        Ok(Self {
            arrivals: instance.arrivals(),
            rows,
            objective,
        })
    }

    /// Same value on every compatible edge of a type.
    pub fn uniform(instance: &StochasticInstance, value: f64) -> Result<Self> {
        let rows = instance
            .types()
            .iter()
            .map(|t| vec![value; t.degree()])
            .collect();
        Self::from_rows(instance, rows)
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn arrivals(&self) -> usize {
        self.arrivals
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.rows[j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// `x_ij`, zero when `i ∉ Γ(t_j)`.
    pub fn value(&self, instance: &StochasticInstance, j: usize, resource: usize) -> f64 {
        instance
            .demand_type(j)
            .position(resource)
            .map_or(0.0, |p| self.rows[j][p])
    }

    /// Expected load `Σ_j n·p_j·x_ij` of every resource.
    pub fn resource_loads(&self, instance: &StochasticInstance) -> Vec<f64> {
        let mut load = vec![0.0; instance.resource_count()];
        for (j, row) in self.rows.iter().enumerate() {
            let mass = instance.expected_arrivals(j);
            for (&r, &x) in instance.demand_type(j).compatible.iter().zip(row) {
                load[r] += mass * x;
            }
        }
        load
    }

    pub fn check_feasible(&self, instance: &StochasticInstance) -> Result<()> {
        for (j, row) in self.rows.iter().enumerate() {
            let total: f64 = row.iter().sum();
            if total > 1.0 + TYPE_TOLERANCE {
                return Err(Error::Infeasible(format!("type {j} routes {total}")));
            }
        }
        for (i, load) in self.resource_loads(instance).into_iter().enumerate() {
            if load > 1.0 + CAPACITY_TOLERANCE {
                return Err(Error::Infeasible(format!("resource {i} has load {load}")));
            }
        }
        Ok(())
    }

    pub fn to_json_string(&self, instance: &StochasticInstance) -> String {
        let entries = self
            .rows
            .iter()
            .enumerate()
            .flat_map(|(j, row)| {
                instance
                    .demand_type(j)
                    .compatible
                    .iter()
                    .zip(row)
                    .filter(|(_, &x)| x > 0.0)
                    .map(move |(&resource, &x)| SolutionEntry {
                        type_id: j,
                        resource,
                        x,
                    })
            })
            .collect();
        serde_json::to_string_pretty(&SolutionDocument {
            entries,
            n: self.arrivals,
        })
        .expect("solution serializes")
    }

    /// Parses a cached solution for `instance`; omitted entries are zero.
    pub fn from_json_str(instance: &StochasticInstance, text: &str) -> Result<Self> {
        let doc: SolutionDocument = serde_json::from_str(text)
            .map_err(|e| Error::Infeasible(format!("bad solution JSON: {e}")))?;
        if doc.n != instance.arrivals() {
            return Err(Error::Infeasible(format!(
                "solution is for n = {}, instance has n = {}",
                doc.n,
                instance.arrivals()
            )));
        }
        let mut rows: Vec<Vec<f64>> = instance
            .types()
            .iter()
            .map(|t| vec![0.0; t.degree()])
            .collect();
        for e in doc.entries {
            let pos = instance
                .types()
                .get(e.type_id)
                .and_then(|t| t.position(e.resource))
                .ok_or_else(|| {
                    Error::Infeasible(format!(
                        "entry ({}, {}) is not a compatible pair",
                        e.type_id, e.resource
                    ))
                })?;
            rows[e.type_id][pos] = e.x;
        }
        Self::from_rows(instance, rows)
    }

    pub fn load(instance: &StochasticInstance, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(instance, &text).map_err(|e| match e {
            Error::Infeasible(reason) => Error::Format {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    pub fn save(&self, instance: &StochasticInstance, path: &Path) -> Result<()> {
        fs::write(path, self.to_json_string(instance)).map_err(|e| Error::io(path, e))
    }
}

#[derive(Serialize, Deserialize)]
struct SolutionDocument {
    entries: Vec<SolutionEntry>,
    n: usize,
}

#[derive(Serialize, Deserialize)]
struct SolutionEntry {
    #[serde(rename = "type")]
    type_id: usize,
    resource: usize,
    x: f64,
}

/// Optimal expected-instance LP solution via max-flow.
pub fn solve_expected_lp(instance: &StochasticInstance) -> Result<FractionalSolution> {
    if let Some(t) = instance.types().iter().find(|t| t.probability == 0.0) {
        return Err(Error::DegenerateType(t.type_id));
    }
    let m = instance.types().len();
    let v = instance.resource_count();
    let source = 0;
    let sink = 1 + m + v;
    let mut net = FlowNetwork::new(sink + 1);

    let mut middle_arcs = Vec::with_capacity(instance.edge_count());
    for (j, t) in instance.types().iter().enumerate() {
        net.add_arc(source, 1 + j, instance.expected_arrivals(j));
        for &r in &t.compatible {
            middle_arcs.push(net.add_arc(1 + j, 1 + m + r, f64::INFINITY));
        }
    }
    for r in 0..v {
        net.add_arc(1 + m + r, sink, 1.0);
    }
    net.max_flow(source, sink);

    let mut arcs = middle_arcs.into_iter();
    let rows = instance
        .types()
        .iter()
        .enumerate()
        .map(|(j, t)| {
            let mass = instance.expected_arrivals(j);
            t.compatible
                .iter()
                .map(|_| {
                    let arc = arcs.next().expect("one arc per compatible pair");
                    (net.flow_on(arc) / mass).max(0.0)
                })
                .collect()
        })
        .collect();
    FractionalSolution::from_rows(instance, rows)
}

/// Dinic's algorithm on real capacities.
struct FlowNetwork {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
}

const FLOW_EPS: f64 = 1e-12;

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        Self {
            head: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    fn add_arc(&mut self, from: usize, to: usize, cap: f64) -> usize {
        let id = self.to.len();
        self.head[from].push(id);
        self.to.push(to);
        self.cap.push(cap);
        self.head[to].push(id + 1);
        self.to.push(from);
        self.cap.push(0.0);
        id
    }

    fn flow_on(&self, arc: usize) -> f64 {
        self.cap[arc ^ 1]
    }

    fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let n = self.head.len();
        let mut total = 0.0;
        let mut level = vec![u32::MAX; n];
        let mut iter = vec![0usize; n];
        loop {
            level.iter_mut().for_each(|l| *l = u32::MAX);
            level[s] = 0;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &a in &self.head[u] {
                    let w = self.to[a];
                    if self.cap[a] > FLOW_EPS && level[w] == u32::MAX {
                        level[w] = level[u] + 1;
                        queue.push_back(w);
                    }
                }
            }
            if level[t] == u32::MAX {
                return total;
            }
            iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let pushed = self.augment(s, t, f64::INFINITY, &level, &mut iter);
                if pushed <= FLOW_EPS {
                    break;
                }
                total += pushed;
            }
        }
    }

    fn augment(
        &mut self,
        u: usize,
        t: usize,
        limit: f64,
        level: &[u32],
        iter: &mut [usize],
    ) -> f64 {
        if u == t {
            return limit;
        }
        while iter[u] < self.head[u].len() {
            let a = self.head[u][iter[u]];
            let w = self.to[a];
            if self.cap[a] > FLOW_EPS && level[w] == level[u] + 1 {
                let pushed = self.augment(w, t, limit.min(self.cap[a]), level, iter);
                if pushed > FLOW_EPS {
                    self.cap[a] -= pushed;
                    self.cap[a ^ 1] += pushed;
                    return pushed;
                }
            }
            iter[u] += 1;
        }
        0.0
    }
}

/// Match-frequency weights learned by simulation.
///
/// Each of the `simulations` rounds realizes the instance, computes a maximum
/// matching under random relabelling, and counts how often type-`j` arrivals
/// land on each resource. `x_ij = C_ij / A_j`, with a uniform `1/|Γ(t_j)|`
/// fallback for types never seen or never matched. Resources whose estimated
/// load exceeds 1 have their column scaled down to unit load.
pub fn monte_carlo_weights(
    instance: &StochasticInstance,
    simulations: usize,
    stream: &RngStream,
) -> Result<FractionalSolution> {
    if simulations == 0 {
        return Err(Error::Config(
            "Monte Carlo simulation count must be >= 1".into(),
        ));
    }
    let per_sim: Vec<(Vec<usize>, Vec<(usize, usize)>)> = (0..simulations)
        .into_par_iter()
        .map(|m| {
            let sim = stream.derive(m as u64);
            let graph = realize(instance, &sim.derive(0));
            let edges = BipartiteEdgeList::from_trusted(
                graph.len(),
                instance.resource_count(),
                graph.edges().collect(),
            );
            let matching = max_matching_shuffled(&edges, &sim.derive(1));
            let matched = matching
                .pairs
                .iter()
                .map(|&(arrival, r)| {
                    let j = graph.arrival_type(arrival);
                    (
                        j,
                        instance
                            .demand_type(j)
                            .position(r)
                            .expect("edge is compatible"),
                    )
                })
                .collect();
            (graph.arrivals().to_vec(), matched)
        })
        .collect();

    let mut arrivals = vec![0usize; instance.types().len()];
    let mut counts: Vec<Vec<usize>> = instance
        .types()
        .iter()
        .map(|t| vec![0; t.degree()])
        .collect();
    for (types, matched) in &per_sim {
        for &j in types {
            arrivals[j] += 1;
        }
        for &(j, pos) in matched {
            counts[j][pos] += 1;
        }
    }

    let mut rows: Vec<Vec<f64>> = counts
        .iter()
        .enumerate()
        .map(|(j, row)| {
            let matched: usize = row.iter().sum();
            if matched > 0 {
                row.iter().map(|&c| c as f64 / arrivals[j] as f64).collect()
            } else {
                let d = row.len() as f64;
                vec![1.0 / d; row.len()]
            }
        })
        .collect();

    let draft = FractionalSolution::from_rows(instance, rows.clone())?;
    let loads = draft.resource_loads(instance);
    let warn_at = 1.0 + 3.0 / (simulations as f64).sqrt();
    for (r, &load) in loads.iter().enumerate() {
        if load > warn_at {
            log::warn!("resource {r}: Monte Carlo load {load:.4} exceeds statistical tolerance");
        }
    }
    if loads.iter().any(|&l| l > 1.0) {
        for (j, t) in instance.types().iter().enumerate() {
            for (p, &r) in t.compatible.iter().enumerate() {
                if loads[r] > 1.0 {
                    rows[j][p] /= loads[r];
                }
            }
        }
    }
    FractionalSolution::from_rows(instance, rows)
}

/// Split of the support of `x` around the threshold `1/k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeavyLightSplit {
    pub k: usize,
    /// `(type, resource)` pairs with `x > 1/k`.
    pub heavy_edges: Vec<(usize, usize)>,
    /// `(type, resource)` pairs with `0 < x <= 1/k`.
    pub light_edges: Vec<(usize, usize)>,
    pub z_heavy: f64,
    pub z_light: f64,
}

impl HeavyLightSplit {
    pub fn z(&self) -> f64 {
        self.z_heavy + self.z_light
    }

    /// `Z_H / Z`, or 0 for an empty solution.
    pub fn heavy_fraction(&self) -> f64 {
        let z = self.z();
        if z > 0.0 {
            self.z_heavy / z
        } else {
            0.0
        }
    }
}

pub fn heavy_light(
    instance: &StochasticInstance,
    x: &FractionalSolution,
    k: usize,
) -> Result<HeavyLightSplit> {
    if k == 0 {
        return Err(Error::Domain("budget k = 0".into()));
    }
    let cut = 1.0 / k as f64;
    let mut split = HeavyLightSplit {
        k,
        heavy_edges: Vec::new(),
        light_edges: Vec::new(),
        z_heavy: 0.0,
        z_light: 0.0,
    };
    for (j, t) in instance.types().iter().enumerate() {
        let mass = instance.expected_arrivals(j);
        for (&r, &v) in t.compatible.iter().zip(x.row(j)) {
            if v <= 0.0 {
                continue;
            }
            if v > cut {
                split.heavy_edges.push((j, r));
                split.z_heavy += mass * v;
            } else {
                split.light_edges.push((j, r));
                split.z_light += mass * v;
            }
        }
    }
    Ok(split)
}

/// Averages `x` over every class of interchangeable resources (identical
/// sets of compatible types), making each class-incident edge `1/ℓ`-light.
pub fn spread_equivalence_classes(
    instance: &StochasticInstance,
    x: &FractionalSolution,
) -> Result<FractionalSolution> {
    let mut membership: Vec<Vec<usize>> = vec![Vec::new(); instance.resource_count()];
    for (j, t) in instance.types().iter().enumerate() {
        for &r in &t.compatible {
            membership[r].push(j);
        }
    }
    let mut classes: HashMap<&[usize], Vec<usize>> = HashMap::new();
    for (r, types) in membership.iter().enumerate() {
        if !types.is_empty() {
            classes.entry(types.as_slice()).or_default().push(r);
        }
    }

    let mut rows = x.rows().to_vec();
    for (types, members) in classes {
        if members.len() < 2 {
            continue;
        }
        let ell = members.len() as f64;
        for &j in types {
            let t = instance.demand_type(j);
            let positions: Vec<usize> = members
                .iter()
                .map(|&r| t.position(r).expect("class member is compatible"))
                .collect();
            let mean = positions.iter().map(|&p| x.row(j)[p]).sum::<f64>() / ell;
            for p in positions {
                rows[j][p] = mean;
            }
        }
    }
    FractionalSolution::from_rows(instance, rows)
}
