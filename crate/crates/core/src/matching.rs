//! Maximum-cardinality bipartite matching and the scaled fractional matching
//! used to certify the sparsifier guarantee.

use std::collections::{HashSet, VecDeque};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::instance::RngStream;

const NONE: usize = usize::MAX;

/// Left side = arrivals, right side = resources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteEdgeList {
    pub left_count: usize,
    pub right_count: usize,
    pub edges: Vec<(usize, usize)>,
}

impl BipartiteEdgeList {
    pub fn new(left_count: usize, right_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        for &(l, r) in &edges {
            if l >= left_count || r >= right_count {
                return Err(Error::InvalidGraph(format!(
                    "edge ({l}, {r}) outside {left_count}x{right_count}"
                )));
            }
            if !seen.insert((l, r)) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({l}, {r})")));
            }
        }
        Ok(Self {
            left_count,
            right_count,
            edges,
        })
    }

    /// Skips validation; for edge lists built internally from valid sources.
    pub(crate) fn from_trusted(
        left_count: usize,
        right_count: usize,
        edges: Vec<(usize, usize)>,
    ) -> Self {
        Self {
            left_count,
            right_count,
            edges,
        }
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.left_count];
        for &(l, r) in &self.edges {
            adj[l].push(r);
        }
        adj
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchingResult {
    pub size: usize,
    /// Matched `(left, right)` pairs sorted by left vertex.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_left: Vec<usize>,
}

impl MatchingResult {
    fn from_mates(mate_left: &[usize]) -> Self {
        let mut pairs = Vec::new();
        let mut unmatched_left = Vec::new();
        for (l, &r) in mate_left.iter().enumerate() {
            if r == NONE {
                unmatched_left.push(l);
            } else {
                pairs.push((l, r));
            }
        }
        Self {
            size: pairs.len(),
            pairs,
            unmatched_left,
        }
    }
}

/// Hopcroft–Karp, `O(E √V)`. Tie-breaking follows the edge order.
pub fn max_matching(graph: &BipartiteEdgeList) -> MatchingResult {
    let mate_left = hopcroft_karp(&graph.adjacency(), graph.right_count);
    MatchingResult::from_mates(&mate_left)
}

/// Maximum matching after a uniformly random relabelling of both sides, so
/// that among several maximum matchings a random one is returned.
pub fn max_matching_shuffled(graph: &BipartiteEdgeList, stream: &RngStream) -> MatchingResult {
    let mut rng = stream.rng();
    let mut left_perm: Vec<usize> = (0..graph.left_count).collect();
    let mut right_perm: Vec<usize> = (0..graph.right_count).collect();
    left_perm.shuffle(&mut rng);
    right_perm.shuffle(&mut rng);

    let mut edges: Vec<(usize, usize)> = graph
        .edges
        .iter()
        .map(|&(l, r)| (left_perm[l], right_perm[r]))
        .collect();
    edges.shuffle(&mut rng);
    let relabelled = BipartiteEdgeList::from_trusted(graph.left_count, graph.right_count, edges);
    let mate = hopcroft_karp(&relabelled.adjacency(), graph.right_count);

    let mut left_inv = vec![0; graph.left_count];
    for (orig, &new) in left_perm.iter().enumerate() {
        left_inv[new] = orig;
    }
    let mut right_inv = vec![0; graph.right_count];
    for (orig, &new) in right_perm.iter().enumerate() {
        right_inv[new] = orig;
    }
    let mut mate_left = vec![NONE; graph.left_count];
    for (new_l, &new_r) in mate.iter().enumerate() {
        if new_r != NONE {
            mate_left[left_inv[new_l]] = right_inv[new_r];
        }
    }
    MatchingResult::from_mates(&mate_left)
}

fn hopcroft_karp(adj: &[Vec<usize>], right_count: usize) -> Vec<usize> {
    let n_left = adj.len();
    let mut mate_left = vec![NONE; n_left];
    let mut mate_right = vec![NONE; right_count];
    let mut dist = vec![0u32; n_left];
    let mut queue = VecDeque::with_capacity(n_left);
    let mut next_edge = vec![0usize; n_left];
    let mut stack: Vec<usize> = Vec::new();

    // Greedy warm start.
    for l in 0..n_left {
        for &r in &adj[l] {
            if mate_right[r] == NONE {
                mate_left[l] = r;
                mate_right[r] = l;
                break;
            }
        }
    }

    loop {
        // Layered BFS from free left vertices.
        queue.clear();
        for l in 0..n_left {
            if mate_left[l] == NONE {
                dist[l] = 0;
                queue.push_back(l);
            } else {
                dist[l] = u32::MAX;
            }
        }
        let mut found = false;
        while let Some(l) = queue.pop_front() {
            for &r in &adj[l] {
                let m = mate_right[r];
                if m == NONE {
                    found = true;
                } else if dist[m] == u32::MAX {
                    dist[m] = dist[l] + 1;
                    queue.push_back(m);
                }
            }
        }
        if !found {
            break;
        }

        // Iterative DFS along the layers.
        next_edge.iter_mut().for_each(|e| *e = 0);
        for root in 0..n_left {
            if mate_left[root] != NONE {
                continue;
            }
            stack.clear();
            stack.push(root);
            while let Some(&l) = stack.last() {
                if next_edge[l] == adj[l].len() {
                    dist[l] = u32::MAX;
                    stack.pop();
                    continue;
                }
                let r = adj[l][next_edge[l]];
                next_edge[l] += 1;
                let m = mate_right[r];
                if m == NONE {
                    // Augment along the stack: each left vertex takes the
                    // right vertex its last explored edge pointed at.
                    for &u in stack.iter().rev() {
                        let target = adj[u][next_edge[u] - 1];
                        mate_left[u] = target;
                        mate_right[target] = u;
                    }
                    break;
                } else if dist[m] == dist[l].wrapping_add(1) {
                    stack.push(m);
                }
            }
        }
    }
    mate_left
}

/// Per-resource loads of the inverse-probability weights on a sparsified
/// graph and the value of the fractional matching obtained by scaling every
/// overloaded resource down to unit load.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalLoadReport {
    pub per_resource_load: Vec<f64>,
    pub excess: f64,
    pub scaled_value: f64,
}

/// `weights[e]` is the weight of `graph.edges[e]`.
pub fn fractional_scaled_matching(
    graph: &BipartiteEdgeList,
    weights: &[f64],
) -> Result<FractionalLoadReport> {
    if weights.len() != graph.edges.len() {
        return Err(Error::InvalidGraph(format!(
            "{} weights for {} edges",
            weights.len(),
            graph.edges.len()
        )));
    }
    let mut outflow = vec![0.0; graph.left_count];
    let mut load = vec![0.0; graph.right_count];
    for (&(l, r), &w) in graph.edges.iter().zip(weights) {
        outflow[l] += w;
        load[r] += w;
    }
    if let Some((arrival, &total)) = outflow.iter().enumerate().find(|(_, &t)| t > 1.0 + 1e-9) {
        return Err(Error::ArrivalOverflow { arrival, total });
    }
    let excess: f64 = load.iter().map(|&y| (y - 1.0).max(0.0)).sum();
    let scaled_value = graph
        .edges
        .iter()
        .zip(weights)
        .map(|(&(_, r), &w)| w / load[r].max(1.0))
        .sum();
    Ok(FractionalLoadReport {
        per_resource_load: load,
        excess,
        scaled_value,
    })
}
