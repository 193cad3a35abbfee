//! Agents, their utilities, and the pairwise-exchange Markov process.

mod graph;
mod holdings;
mod sampler;
mod utility;

pub use graph::{build_encounter_graph, circle_distance, comparison_neighbourhood, EncounterGraph, Topology};
pub use holdings::{Holdings, MAX_GOODS};
pub use sampler::{sample_cd_split, sample_outcome_general, Outcome, SamplerPolicy, SamplerStats};
pub use utility::{implied_price, BandRule, Comparison, EncounterContext, UtilitySpec};

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Totals are re-summed from scratch this often to stop rounding drift.
const RECOMPUTE_EVERY: u64 = 10_000;

/// Comparison radius used when the topology does not fix one.
pub const DEFAULT_COMPARISON_RADIUS: usize = 1;

/// How macro totals are shared out among agents at construction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialHoldings {
    /// Every agent gets `total / N` of each commodity.
    #[default]
    Equal,
    /// Each commodity is split by a Dirichlet draw whose weights are the
    /// agents' exponents for it, i.e. the stationary split of a Cobb–Douglas
    /// economy with the same exponents. Useful when trade is so constrained
    /// that relaxing from equal shares would take very long.
    Dirichlet,
}

#[derive(Clone, Debug)]
pub struct Economy {
    n_goods: usize,
    /// Distinct utility specs; agents refer to them by index.
    specs: Vec<UtilitySpec>,
    kind: Vec<usize>,
    holdings: Vec<Holdings>,
    graph: EncounterGraph,
    comparison_radius: usize,
    totals: Holdings,
    since_recompute: u64,
    stats: SamplerStats,
}

impl Economy {
    /// Economy from explicit per-agent specs and holdings.
    pub fn new(agents: Vec<(UtilitySpec, Holdings)>, topology: Topology) -> Result<Self> {
        let n = agents.len();
        let graph = build_encounter_graph(topology, n)?;
        let mut specs: Vec<UtilitySpec> = Vec::new();
        let mut kind = Vec::with_capacity(n);
        let mut holdings = Vec::with_capacity(n);
        for (spec, h) in agents {
            let k = match specs.iter().position(|s| *s == spec) {
                Some(k) => k,
                None => {
                    spec.validate()?;
                    specs.push(spec);
                    specs.len() - 1
                }
            };
            kind.push(k);
            holdings.push(h);
        }
        let n_goods = specs[0].goods_count();
        if let Some(s) = specs.iter().find(|s| s.goods_count() != n_goods) {
            return Err(Error::DimensionMismatch(format!(
                "agents trade {n_goods} goods, but {s:?} trades {}",
                s.goods_count()
            )));
        }
        for h in &holdings {
            h.check(n_goods)?;
        }
        let comparison_radius = match graph.topology() {
            Topology::CircleExcludingComparison { comparison_radius } => *comparison_radius,
            _ => DEFAULT_COMPARISON_RADIUS,
        };
        if specs.iter().any(UtilitySpec::needs_neighbourhood) && n < 2 * comparison_radius + 1 {
            return Err(Error::Graph(format!(
                "{n} agents cannot host a comparison neighbourhood of radius {comparison_radius}"
            )));
        }
        let mut economy = Economy {
            n_goods,
            specs,
            kind,
            holdings,
            graph,
            comparison_radius,
            totals: Holdings::zero(),
            since_recompute: 0,
            stats: SamplerStats::default(),
        };
        economy.recompute_totals();
        Ok(economy)
    }

    /// Economy of `(count, spec)` groups, laid out contiguously, with `totals`
    /// shared equally among all agents.
    pub fn from_groups(groups: &[(usize, UtilitySpec)], topology: Topology, totals: Holdings) -> Result<Self> {
        let n: usize = groups.iter().map(|(c, _)| c).sum();
        if n == 0 {
            return Err(Error::Config(vec!["economy has no agents".into()]));
        }
        let share = totals.scale(1.0 / n as f64);
        let agents = groups
            .iter()
            .flat_map(|(count, spec)| std::iter::repeat_n((spec.clone(), share), *count))
            .collect();
        Self::new(agents, topology)
    }

    /// Like [`Economy::from_groups`], with the initial split chosen by `init`.
    pub fn from_groups_with<R: Rng + ?Sized>(
        groups: &[(usize, UtilitySpec)],
        topology: Topology,
        totals: Holdings,
        init: InitialHoldings,
        rng: &mut R,
    ) -> Result<Self> {
        let mut economy = Self::from_groups(groups, topology, totals)?;
        if init == InitialHoldings::Dirichlet {
            economy.dirichlet_spread(&totals, rng);
        }
        Ok(economy)
    }

    fn dirichlet_spread<R: Rng + ?Sized>(&mut self, totals: &Holdings, rng: &mut R) {
        let n = self.n_agents();
        let mut w = vec![0.0; n];
        for c in 0..=self.n_goods {
            for (i, wi) in w.iter_mut().enumerate() {
                let spec = self.spec(i);
                let shape = if c == 0 { spec.eta() } else { spec.goods_exponents()[c - 1] };
                *wi = Gamma::new(shape, 1.0).expect("validated exponent").sample(rng);
            }
            let sum: f64 = w.iter().sum();
            for (h, wi) in self.holdings.iter_mut().zip(&w) {
                h.set(c, totals.get(c) * wi / sum);
            }
        }
        self.recompute_totals();
    }

    pub fn n_agents(&self) -> usize {
        self.holdings.len()
    }

    pub fn n_goods(&self) -> usize {
        self.n_goods
    }

    pub fn graph(&self) -> &EncounterGraph {
        &self.graph
    }

    pub fn spec(&self, i: usize) -> &UtilitySpec {
        &self.specs[self.kind[i]]
    }

    pub fn holdings(&self) -> &[Holdings] {
        &self.holdings
    }

    /// Direct access for bookkeeping that keeps totals fixed (the meter's
    /// reserve offset). Call [`Economy::recompute_totals`] if totals change.
    pub fn holdings_mut(&mut self) -> &mut [Holdings] {
        &mut self.holdings
    }

    /// Cached totals, refreshed every few thousand encounters.
    pub fn totals(&self) -> Holdings {
        self.totals
    }

    pub fn recompute_totals(&mut self) {
        let mut t = Holdings::zero();
        for h in &self.holdings {
            t = t.add(h);
        }
        self.totals = t;
        self.since_recompute = 0;
    }

    pub fn stats(&self) -> &SamplerStats {
        &self.stats
    }

    pub fn comparison_radius(&self) -> usize {
        self.comparison_radius
    }

    /// Mean goods of agent `i`'s comparison neighbourhood.
    pub fn neighbourhood_mean(&self, i: usize) -> f64 {
        let n = self.n_agents();
        let r = self.comparison_radius;
        let sum: f64 = comparison_neighbourhood(i, n, r)
            .map(|k| self.holdings[k].goods[0])
            .sum();
        sum / (2 * r) as f64
    }

    /// What agent `i` conditions on at the start of an encounter.
    pub fn context(&self, i: usize) -> EncounterContext {
        EncounterContext {
            current: self.holdings[i],
            neighbourhood_mean: self
                .spec(i)
                .needs_neighbourhood()
                .then(|| self.neighbourhood_mean(i)),
        }
    }

    /// One encounter along the edge `(i, j)`.
    pub fn encounter<R: Rng + ?Sized>(&mut self, i: usize, j: usize, rng: &mut R, policy: &SamplerPolicy) -> Result<()> {
        if !self.graph.is_edge(i, j) {
            return Err(Error::NotAnEdge { i, j });
        }
        self.encounter_unchecked(i, j, rng, policy);
        Ok(())
    }

    pub(crate) fn encounter_unchecked<R: Rng + ?Sized>(&mut self, i: usize, j: usize, rng: &mut R, policy: &SamplerPolicy) {
        let ci = self.context(i);
        let cj = self.context(j);
        let (si, sj) = (&self.specs[self.kind[i]], &self.specs[self.kind[j]]);
        match sample_outcome_general(si, &ci, sj, &cj, rng, policy, &mut self.stats) {
            Ok(Outcome::Trade(a, b)) => {
                self.holdings[i] = a;
                self.holdings[j] = b;
            }
            Ok(Outcome::NoTrade) => {}
            Err(_) => {
                self.stats.errors += 1;
                self.stats.no_trades += 1;
            }
        }
        self.since_recompute += 1;
        if self.since_recompute >= RECOMPUTE_EVERY {
            self.recompute_totals();
        }
    }

    /// `n` encounters along edges drawn from the encounter graph.
    pub fn sweep<R: Rng + ?Sized>(&mut self, n: u64, rng: &mut R, policy: &SamplerPolicy) {
        for _ in 0..n {
            let (i, j) = self.graph.sample_edge(rng);
            self.encounter_unchecked(i, j, rng, policy);
        }
    }

    /// Actual component-wise sums, bypassing the cache.
    pub fn summed_totals(&self) -> Holdings {
        self.holdings.iter().fold(Holdings::zero(), |t, h| t.add(h))
    }
}
