use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    Complete,
    /// Agents on a circle; each trades with everyone except itself and its
    /// `comparison_radius` nearest neighbours on either side.
    CircleExcludingComparison { comparison_radius: usize },
    /// Undirected edges `(i, j, rate)` with positive rates.
    ExplicitEdges { edges: Vec<(usize, usize, f64)> },
}

/// Who meets whom. Edges are drawn with probability proportional to their rate.
#[derive(Clone, Debug)]
pub struct EncounterGraph {
    n_agents: usize,
    topology: Topology,
    /// Cumulative rates for explicit edges.
    cumulative: Vec<f64>,
}

impl EncounterGraph {
    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn edge_count(&self) -> usize {
        let n = self.n_agents;
        match &self.topology {
            Topology::Complete => n * (n - 1) / 2,
            Topology::CircleExcludingComparison { comparison_radius } => {
                n * (n - 1 - 2 * comparison_radius) / 2
            }
            Topology::ExplicitEdges { edges } => edges.len(),
        }
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        let n = self.n_agents;
        if i == j || i >= n || j >= n {
            return false;
        }
        match &self.topology {
            Topology::Complete => true,
            Topology::CircleExcludingComparison { comparison_radius } => {
                circle_distance(i, j, n) > *comparison_radius
            }
            Topology::ExplicitEdges { edges } => edges
                .iter()
                .any(|&(a, b, _)| (a == i && b == j) || (a == j && b == i)),
        }
    }

    pub fn neighbours(&self, i: usize) -> Vec<usize> {
        let n = self.n_agents;
        match &self.topology {
            Topology::Complete => (0..n).filter(|&j| j != i).collect(),
            Topology::CircleExcludingComparison { comparison_radius } => (0..n)
                .filter(|&j| j != i && circle_distance(i, j, n) > *comparison_radius)
                .collect(),
            Topology::ExplicitEdges { edges } => edges
                .iter()
                .filter_map(|&(a, b, _)| {
                    if a == i {
                        Some(b)
                    } else if b == i {
                        Some(a)
                    } else {
                        None
                    }
                })
                .collect(),
        }
    }

    /// Draw one edge; endpoints come back in random order.
    #[inline]
    pub fn sample_edge<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let n = self.n_agents;
        match &self.topology {
            Topology::Complete => {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                (i, j)
            }
            Topology::CircleExcludingComparison { comparison_radius } => {
                let r = *comparison_radius;
                let i = rng.random_range(0..n);
                let offset = r + 1 + rng.random_range(0..n - 1 - 2 * r);
                (i, (i + offset) % n)
            }
            Topology::ExplicitEdges { edges } => {
                let total = *self.cumulative.last().expect("validated non-empty");
                let x = rng.random::<f64>() * total;
                let k = self.cumulative.partition_point(|&c| c <= x).min(edges.len() - 1);
                let (a, b, _) = edges[k];
                if rng.random::<bool>() {
                    (a, b)
                } else {
                    (b, a)
                }
            }
        }
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n_agents;
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for w in self.neighbours(v) {
                if !seen[w] {
                    seen[w] = true;
                    reached += 1;
                    queue.push_back(w);
                }
            }
        }
        reached == n
    }
}

/// Hop distance between two seats on a circle of `n`.
pub fn circle_distance(i: usize, j: usize, n: usize) -> usize {
    let d = i.abs_diff(j);
    d.min(n - d)
}

/// Indices of the `radius` nearest neighbours on each side of `i`.
pub fn comparison_neighbourhood(i: usize, n: usize, radius: usize) -> impl Iterator<Item = usize> {
    (1..=radius).flat_map(move |d| [(i + d) % n, (i + n - d) % n])
}

/// Build and validate a graph. Connectivity of the encounter graph is required
/// for the exchange process to have a single equilibrium per macro-state.
pub fn build_encounter_graph(topology: Topology, n_agents: usize) -> Result<EncounterGraph> {
    if n_agents < 2 {
        return Err(Error::Graph(format!("need at least 2 agents, got {n_agents}")));
    }
    let mut cumulative = Vec::new();
    match &topology {
        Topology::Complete => {}
        Topology::CircleExcludingComparison { comparison_radius } => {
            if *comparison_radius == 0 {
                return Err(Error::Graph("comparison radius must be positive".into()));
            }
            if n_agents < 2 * comparison_radius + 2 {
                return Err(Error::Graph(format!(
                    "{n_agents} agents leave nobody to trade with at comparison radius {comparison_radius}"
                )));
            }
        }
        Topology::ExplicitEdges { edges } => {
            if edges.is_empty() {
                return Err(Error::Graph("explicit edge list is empty".into()));
            }
            let mut acc = 0.0;
            for &(a, b, rate) in edges {
                if a >= n_agents || b >= n_agents {
                    return Err(Error::Graph(format!("edge ({a}, {b}) out of range")));
                }
                if a == b {
                    return Err(Error::Graph(format!("self-loop at agent {a}")));
                }
                if !(rate.is_finite() && rate > 0.0) {
                    return Err(Error::Graph(format!("edge ({a}, {b}) has rate {rate}")));
                }
                acc += rate;
                cumulative.push(acc);
            }
        }
    }
    let graph = EncounterGraph {
        n_agents,
        topology,
        cumulative,
    };
    if !graph.is_connected() {
        return Err(Error::Graph(
            "encounter graph is disconnected; every pair of agents must be joined by a path of positive-rate edges".into(),
        ));
    }
    Ok(graph)
}
