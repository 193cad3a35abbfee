use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::calorimetry::{ConcavityTolerance, IncrementRule, MacroGrid};
use crate::economy::{build_encounter_graph, Comparison, InitialHoldings, SamplerPolicy, Topology, UtilitySpec};
use crate::error::{Error, Result};
use crate::meter::{MeasurementProtocol, MeterSpec};
use crate::oracles::{ExponentGroup, FreeEnergySpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentGroup {
    pub count: usize,
    pub utility: UtilitySpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomyConfig {
    pub n_agents: usize,
    pub goods_count: usize,
    pub population: Vec<AgentGroup>,
    #[serde(default = "default_topology")]
    pub topology: Topology,
    #[serde(default)]
    pub initial_holdings: InitialHoldings,
}

fn default_topology() -> Topology {
    Topology::Complete
}

impl EconomyConfig {
    pub fn groups(&self) -> Vec<(usize, UtilitySpec)> {
        self.population.iter().map(|g| (g.count, g.utility.clone())).collect()
    }
}

/// Reference surface to compare the fitted entropy against. Parameters come
/// from the economy's population.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleSelector {
    /// Closed-form (possibly heterogeneous) Cobb–Douglas entropy.
    CobbDouglas,
    /// `-F` at the measured values.
    FreeEnergy,
    /// Legendre transform of `F` at each node's totals.
    Legendre,
    /// Closed form for interdependent agents with exponential comparison.
    InterdependentExp,
    /// Cobb–Douglas entropy for identical-threshold price-band agents.
    PriceBandCd,
}

/// Extra readings along a line of money totals at fixed goods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PureMoneyConfig {
    pub money: Vec<f64>,
    pub goods: Vec<f64>,
}

/// Replace simulation by exact Cobb–Douglas values with Gaussian noise of
/// relative size `noise_rel` (test fixture for the fitting pipeline).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub noise_rel: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub economy: EconomyConfig,
    /// Defaults to the standard meter for the economy's goods count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meter: Option<MeterSpec>,
    #[serde(default)]
    pub protocol: MeasurementProtocol,
    #[serde(default)]
    pub sampler: SamplerPolicy,
    pub grid: MacroGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSelector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pure_money: Option<PureMoneyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticConfig>,
    #[serde(default)]
    pub increment_rule: IncrementRule,
    #[serde(default)]
    pub concavity_tolerance: ConcavityTolerance,
    pub seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_parallelism() -> usize {
    1
}

fn problems_of(result: Result<()>, context: &str, out: &mut Vec<String>) {
    match result {
        Ok(()) => {}
        Err(Error::Config(list)) => out.extend(list.into_iter().map(|p| format!("{context}: {p}"))),
        Err(e) => out.push(format!("{context}: {e}")),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises") + "\n"
    }

    pub fn meter_spec(&self) -> MeterSpec {
        self.meter.clone().unwrap_or_else(|| MeterSpec::for_goods(self.economy.goods_count))
    }

    /// Check everything that can be checked without running, reporting every
    /// problem at once.
    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        let e = &self.economy;
        if e.population.is_empty() {
            p.push("economy.population is empty".into());
        }
        let total: usize = e.population.iter().map(|g| g.count).sum();
        if total != e.n_agents {
            p.push(format!("economy.population counts sum to {total}, n_agents is {}", e.n_agents));
        }
        for (k, g) in e.population.iter().enumerate() {
            if g.count == 0 {
                p.push(format!("economy.population[{k}].count is zero"));
            }
            problems_of(g.utility.validate(), &format!("economy.population[{k}].utility"), &mut p);
            if g.utility.goods_count() != e.goods_count {
                p.push(format!(
                    "economy.population[{k}] has {} goods, goods_count is {}",
                    g.utility.goods_count(),
                    e.goods_count
                ));
            }
        }
        problems_of(
            build_encounter_graph(e.topology.clone(), e.n_agents).map(|_| ()),
            "economy.topology",
            &mut p,
        );
        let meter = self.meter_spec();
        problems_of(meter.validate(), "meter", &mut p);
        if meter.alphas.len() != e.goods_count {
            p.push(format!("meter has {} goods, economy has {}", meter.alphas.len(), e.goods_count));
        }
        problems_of(self.protocol.validate(), "protocol", &mut p);
        problems_of(self.sampler.validate(), "sampler", &mut p);
        problems_of(self.grid.validate(), "grid", &mut p);
        if self.grid.n_goods() != e.goods_count {
            p.push(format!("grid has {} goods axes, economy has {} goods", self.grid.n_goods(), e.goods_count));
        }
        if self.grid.node_count() < 2 {
            p.push("grid needs at least two nodes to fit".into());
        }
        if self.parallelism == 0 {
            p.push("parallelism must be at least 1".into());
        }
        if let Some(pm) = &self.pure_money {
            if pm.money.len() < 2 || pm.money.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
                p.push("pure_money.money needs at least two positive totals".into());
            }
            if pm.goods.len() != e.goods_count || pm.goods.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
                p.push(format!("pure_money.goods needs {} positive totals", e.goods_count));
            }
        }
        if let Some(s) = &self.synthetic {
            if !(s.noise_rel.is_finite() && s.noise_rel >= 0.0) {
                p.push("synthetic.noise_rel must be non-negative".into());
            }
            if let Err(err) = self.cd_groups() {
                p.push(format!("synthetic readings need a Cobb-Douglas population: {err}"));
            }
        }
        if let Some(oracle) = self.oracle {
            if let Err(err) = self.check_oracle(oracle) {
                p.push(format!("oracle {oracle:?}: {err}"));
            }
        }
        let (ConcavityTolerance::Absolute(t) | ConcavityTolerance::StandardErrors(t)) = self.concavity_tolerance;
        if !(t.is_finite() && t >= 0.0) {
            p.push("concavity_tolerance must be non-negative".into());
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    fn check_oracle(&self, oracle: OracleSelector) -> Result<()> {
        match oracle {
            OracleSelector::CobbDouglas => self.cd_groups().map(|_| ()),
            OracleSelector::FreeEnergy | OracleSelector::Legendre => self.free_energy_spec().map(|_| ()),
            OracleSelector::InterdependentExp => self.interdependent_exp_params().map(|_| ()),
            OracleSelector::PriceBandCd => self.price_band_params().map(|_| ()),
        }
    }

    fn single_group(&self) -> Result<&UtilitySpec> {
        let first = &self.economy.population.first().ok_or_else(|| Error::Config(vec!["no agents".into()]))?.utility;
        if self.economy.population.iter().any(|g| &g.utility != first) {
            return Err(Error::Config(vec!["population must be homogeneous".into()]));
        }
        Ok(first)
    }

    pub fn cd_groups(&self) -> Result<Vec<ExponentGroup>> {
        self.economy
            .population
            .iter()
            .map(|g| match &g.utility {
                UtilitySpec::CobbDouglas { eta, alphas } => Ok(ExponentGroup {
                    count: g.count,
                    eta: *eta,
                    alphas: alphas.clone(),
                }),
                other => Err(Error::Config(vec![format!("{other:?} is not Cobb-Douglas")])),
            })
            .collect()
    }

    pub fn free_energy_spec(&self) -> Result<FreeEnergySpec> {
        let components = self
            .economy
            .population
            .iter()
            .map(|g| {
                let count = g.count;
                Ok(match g.utility.clone() {
                    UtilitySpec::CobbDouglas { eta, alphas } => FreeEnergySpec::CobbDouglas { count, eta, alphas },
                    UtilitySpec::Substitutes { eta, alpha } => FreeEnergySpec::Substitutes { count, eta, alpha },
                    UtilitySpec::Complements { eta, alpha } => FreeEnergySpec::Complements { count, eta, alpha },
                    UtilitySpec::Interdependent { eta, alpha, comparison: Comparison::Exp } => {
                        FreeEnergySpec::ExpTilted { count, eta, alpha }
                    }
                    other => return Err(Error::Config(vec![format!("no free energy known for {other:?}")])),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = FreeEnergySpec::Mixture { components };
        spec.validate()?;
        Ok(spec)
    }

    /// `(n, eta, alpha)` of a homogeneous exponential-comparison economy.
    pub fn interdependent_exp_params(&self) -> Result<(f64, f64, f64)> {
        match self.single_group()? {
            UtilitySpec::Interdependent { eta, alpha, comparison: Comparison::Exp } => {
                if !matches!(self.economy.topology, Topology::CircleExcludingComparison { .. }) {
                    return Err(Error::Config(vec![
                        "the closed form assumes nobody trades with their comparison neighbours".into(),
                    ]));
                }
                Ok((self.economy.n_agents as f64, *eta, *alpha))
            }
            other => Err(Error::Config(vec![format!("{other:?} is not exponential-comparison interdependent")])),
        }
    }

    /// `(n, eta, alpha)` of identical separable price-band agents.
    pub fn price_band_params(&self) -> Result<(f64, f64, f64)> {
        match self.single_group()? {
            UtilitySpec::PriceBandSeparable { eta, alpha, .. } => Ok((self.economy.n_agents as f64, *eta, *alpha)),
            other => Err(Error::Config(vec![format!("{other:?} is not a separable price-band agent")])),
        }
    }
}

/// Set `path` (dot-separated keys, numeric segments index arrays) in a JSON
/// document. The value is parsed as JSON, or taken as a string if that fails.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(vec![format!("override {assignment:?} is not key=value")]))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let segments: Vec<&str> = path.split('.').collect();
    for (k, seg) in segments.iter().enumerate() {
        let last = k + 1 == segments.len();
        cur = match cur {
            Value::Array(items) => {
                let i: usize = seg
                    .parse()
                    .map_err(|_| Error::Config(vec![format!("override {path}: {seg:?} is not an array index")]))?;
                let len = items.len();
                items
                    .get_mut(i)
                    .ok_or_else(|| Error::Config(vec![format!("override {path}: index {i} out of range ({len})")]))?
            }
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                map.entry(seg.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            _ => return Err(Error::Config(vec![format!("override {path}: {seg:?} is not inside an object or array")])),
        };
        if last {
            *cur = value;
            return Ok(());
        }
    }
    Err(Error::Config(vec![format!("override {assignment:?} has an empty key")]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calorimetry::linspace;

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            name: "t".into(),
            description: None,
            economy: EconomyConfig {
                n_agents: 10,
                goods_count: 2,
                population: vec![AgentGroup { count: 10, utility: UtilitySpec::cobb_douglas(3.0, &[3.0, 3.0]) }],
                topology: Topology::Complete,
                initial_holdings: InitialHoldings::Equal,
            },
            meter: None,
            protocol: MeasurementProtocol::default(),
            sampler: SamplerPolicy::default(),
            grid: MacroGrid::new(vec![vec![10.0], linspace(5.0, 20.0, 3), linspace(5.0, 20.0, 3)]).unwrap(),
            oracle: Some(OracleSelector::CobbDouglas),
            pure_money: None,
            synthetic: None,
            increment_rule: IncrementRule::Trapezoid,
            concavity_tolerance: ConcavityTolerance::default(),
            seed: 1,
            parallelism: 1,
            output_dir: None,
        }
    }

    #[test]
    fn valid_config_round_trips() {
        let c = config();
        c.validate().unwrap();
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn every_problem_is_listed() {
        let mut c = config();
        c.economy.n_agents = 11;
        c.parallelism = 0;
        c.economy.topology = Topology::ExplicitEdges { edges: vec![(0, 1, 1.0), (2, 3, 1.0)] };
        c.oracle = Some(OracleSelector::InterdependentExp);
        match c.validate() {
            Err(Error::Config(list)) => assert!(list.len() >= 4, "{list:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn seed_is_mandatory() {
        let mut v: Value = serde_json::from_str(&config().to_json()).unwrap();
        v.as_object_mut().unwrap().remove("seed");
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn overrides() {
        let mut v: Value = serde_json::from_str(&config().to_json()).unwrap();
        apply_override(&mut v, "protocol.n_samples=40").unwrap();
        apply_override(&mut v, "grid.axes.0=[20.0]").unwrap();
        apply_override(&mut v, "name=other").unwrap();
        let c = ExperimentConfig::from_json(&v.to_string()).unwrap();
        assert_eq!(c.protocol.n_samples, 40);
        assert_eq!(c.grid.axes[0], vec![20.0]);
        assert_eq!(c.name, "other");
        assert!(apply_override(&mut v, "grid.axes.9=1").is_err());
        assert!(apply_override(&mut v, "nokey").is_err());
    }

    #[test]
    fn derived_free_energy() {
        let mut c = config();
        c.economy.population = vec![
            AgentGroup { count: 5, utility: UtilitySpec::Substitutes { eta: 3.0, alpha: 3.0 } },
            AgentGroup { count: 5, utility: UtilitySpec::Complements { eta: 3.0, alpha: 3.0 } },
        ];
        assert_eq!(c.free_energy_spec().unwrap().count(), 10);
        assert!(c.cd_groups().is_err());
    }
}
