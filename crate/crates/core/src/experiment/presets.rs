//! Bundled experiment configurations, one per reference pipeline plus a
//! synthetic fixture. Axis ranges are chosen here (goods per agent between
//! 0.5 and 2), not taken from anywhere.

use super::config::{AgentGroup, EconomyConfig, ExperimentConfig, OracleSelector, PureMoneyConfig, SyntheticConfig};
use crate::calorimetry::{linspace, ConcavityTolerance, IncrementRule, MacroGrid};
use crate::economy::{BandRule, Comparison, InitialHoldings, SamplerPolicy, Topology, UtilitySpec};
use crate::error::{Error, Result};
use crate::meter::{MeasurementProtocol, MeterSpec, MeterStart};

const N: usize = 1000;
const SEED: u64 = 20240601;

struct Preset {
    name: &'static str,
    description: &'static str,
    build: fn() -> ExperimentConfig,
}

const PRESETS: &[Preset] = &[
    Preset { name: "cd_homogeneous", description: "Cobb-Douglas (3,3,3), 8x8 goods grid", build: cd_homogeneous },
    Preset { name: "cd_heterogeneous", description: "half (3,3,3), half (2,2,2) Cobb-Douglas", build: cd_heterogeneous },
    Preset { name: "substitutes_complements", description: "500 substitutes and 500 complements", build: subs_compl },
    Preset { name: "three_family_mixture", description: "300 substitutes, 300 complements, 400 Cobb-Douglas", build: three_family },
    Preset { name: "satiable", description: "satiable first good (c=0.3, k=0.6)", build: satiable },
    Preset { name: "price_band", description: "separable price band (0.9,1.1)", build: price_band },
    Preset { name: "price_band_wide", description: "separable price band (0.5,1.5)", build: price_band_wide },
    Preset { name: "price_band_aggregate", description: "aggregate price band (0.9,1.1)", build: price_band_aggregate },
    Preset { name: "five_bands", description: "five 200-agent aggregate bands (0.5,1.5)..(0.9,1.1)", build: five_bands },
    Preset { name: "interdependent_exp", description: "neighbour comparison U(x)=e^x on a circle", build: interdependent_exp },
    Preset { name: "interdependent_sigmoid", description: "sigmoid neighbour comparison (a=1.5, b=0.5)", build: interdependent_sigmoid },
    Preset { name: "synthetic_noise", description: "exact Cobb-Douglas values with 1% noise", build: synthetic_noise },
];

/// `(name, description)` of every preset.
pub fn list_presets() -> Vec<(&'static str, &'static str)> {
    PRESETS.iter().map(|p| (p.name, p.description)).collect()
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .map(|p| (p.build)())
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))
}

/// The preset as JSON text.
pub fn emit_preset(name: &str) -> Result<String> {
    Ok(preset(name)?.to_json())
}

fn goods_axis() -> Vec<f64> {
    linspace(500.0, 2000.0, 8)
}

fn two_goods_grid() -> MacroGrid {
    MacroGrid::new(vec![vec![1000.0], goods_axis(), goods_axis()]).expect("valid grid")
}

fn money_goods_grid(low: f64, n: usize) -> MacroGrid {
    MacroGrid::new(vec![linspace(low, 2000.0, n), linspace(low, 2000.0, n)]).expect("valid grid")
}

fn base(
    name: &str,
    description: &str,
    goods_count: usize,
    population: Vec<AgentGroup>,
    grid: MacroGrid,
    oracle: Option<OracleSelector>,
) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        description: Some(description.into()),
        economy: EconomyConfig {
            n_agents: population.iter().map(|g| g.count).sum(),
            goods_count,
            population,
            topology: Topology::Complete,
            initial_holdings: InitialHoldings::Equal,
        },
        meter: None,
        protocol: MeasurementProtocol::default(),
        sampler: SamplerPolicy::default(),
        grid,
        oracle,
        pure_money: None,
        synthetic: None,
        increment_rule: IncrementRule::Trapezoid,
        concavity_tolerance: ConcavityTolerance::default(),
        seed: SEED,
        parallelism: 1,
        output_dir: None,
    }
}

fn group(count: usize, utility: UtilitySpec) -> AgentGroup {
    AgentGroup { count, utility }
}

fn pure_money_line(goods: &[f64]) -> PureMoneyConfig {
    PureMoneyConfig { money: vec![500.0, 1000.0, 2000.0], goods: goods.to_vec() }
}

fn cd_homogeneous() -> ExperimentConfig {
    let mut c = base(
        "cd_homogeneous",
        "Cobb-Douglas economy, eta = alpha1 = alpha2 = 3",
        2,
        vec![group(N, UtilitySpec::cobb_douglas(3.0, &[3.0, 3.0]))],
        two_goods_grid(),
        Some(OracleSelector::CobbDouglas),
    );
    c.pure_money = Some(pure_money_line(&[1000.0, 1000.0]));
    c
}

fn cd_heterogeneous() -> ExperimentConfig {
    base(
        "cd_heterogeneous",
        "half the agents with exponents (3,3,3), half with (2,2,2)",
        2,
        vec![
            group(N / 2, UtilitySpec::cobb_douglas(3.0, &[3.0, 3.0])),
            group(N / 2, UtilitySpec::cobb_douglas(2.0, &[2.0, 2.0])),
        ],
        two_goods_grid(),
        Some(OracleSelector::CobbDouglas),
    )
}

// Joint goods blocks make these the slowest economies per sweep; fewer,
// sparser samples keep the readings' relative error near one per cent.
fn mixture_protocol() -> MeasurementProtocol {
    MeasurementProtocol { burn_in_sweeps: 300, n_samples: 120, sample_stride_sweeps: 4, ..Default::default() }
}

fn subs_compl() -> ExperimentConfig {
    let mut c = base(
        "substitutes_complements",
        "500 substitutes and 500 complements, eta = alpha = 3",
        2,
        vec![
            group(500, UtilitySpec::Substitutes { eta: 3.0, alpha: 3.0 }),
            group(500, UtilitySpec::Complements { eta: 3.0, alpha: 3.0 }),
        ],
        two_goods_grid(),
        Some(OracleSelector::FreeEnergy),
    );
    c.protocol = mixture_protocol();
    c
}

fn three_family() -> ExperimentConfig {
    let mut c = base(
        "three_family_mixture",
        "300 substitutes, 300 complements and 400 Cobb-Douglas agents, all exponents 3",
        2,
        vec![
            group(300, UtilitySpec::Substitutes { eta: 3.0, alpha: 3.0 }),
            group(300, UtilitySpec::Complements { eta: 3.0, alpha: 3.0 }),
            group(400, UtilitySpec::cobb_douglas(3.0, &[3.0, 3.0])),
        ],
        two_goods_grid(),
        Some(OracleSelector::FreeEnergy),
    );
    c.protocol = mixture_protocol();
    c
}

fn satiable() -> ExperimentConfig {
    let mut c = base(
        "satiable",
        "first good satiable with c = 0.3, k = 0.6; eta = alpha = 3",
        2,
        vec![group(N, UtilitySpec::Satiable { eta: 3.0, alpha: 3.0, c: 0.3, k: 0.6 })],
        two_goods_grid(),
        None,
    );
    c.protocol = MeasurementProtocol { burn_in_sweeps: 400, n_samples: 150, sample_stride_sweeps: 4, ..Default::default() };
    c.pure_money = Some(pure_money_line(&[1000.0, 1000.0]));
    c
}

/// Trades inside a narrow band hardly move wealth, so these economies start
/// from the Cobb-Douglas split, the meter from its matched state, and the
/// meter is coupled strongly. Its wealth still relaxes over thousands of
/// sweeps; a small meter and a coarse grid keep the long runs affordable.
fn banded(name: &str, description: &str, population: Vec<AgentGroup>, oracle: Option<OracleSelector>) -> ExperimentConfig {
    let mut c = base(name, description, 1, population, money_goods_grid(500.0, 5), oracle);
    c.economy.initial_holdings = InitialHoldings::Dirichlet;
    c.meter = Some(MeterSpec { initial: MeterStart::Matched, ..MeterSpec::for_goods(1) });
    c.protocol = MeasurementProtocol { burn_in_sweeps: 12000, n_samples: 200, sample_stride_sweeps: 450, cross_rate: 0.9, ..Default::default() };
    c
}

fn band_agent(mu1: f64, mu2: f64, rule: BandRule) -> UtilitySpec {
    UtilitySpec::PriceBandSeparable { eta: 3.0, alpha: 3.0, mu1, mu2, rule }
}

// Compared against the closed form: a coarse grid reaching down to 500
// would spend most of the agreement budget on trapezoid error alone.
fn separable_grid() -> MacroGrid {
    money_goods_grid(1000.0, 5)
}

fn price_band() -> ExperimentConfig {
    let mut c = banded(
        "price_band",
        "separable Cobb-Douglas utility, trades only at prices in (0.9, 1.1)",
        vec![group(N, band_agent(0.9, 1.1, BandRule::Bilateral))],
        Some(OracleSelector::PriceBandCd),
    );
    c.grid = separable_grid();
    c.protocol.n_samples = 300;
    c
}

fn price_band_wide() -> ExperimentConfig {
    let mut c = banded(
        "price_band_wide",
        "separable Cobb-Douglas utility, trades only at prices in (0.5, 1.5)",
        vec![group(N, band_agent(0.5, 1.5, BandRule::Bilateral))],
        Some(OracleSelector::PriceBandCd),
    );
    c.grid = separable_grid();
    c.protocol = MeasurementProtocol { burn_in_sweeps: 500, n_samples: 1000, sample_stride_sweeps: 5, cross_rate: 0.5, ..Default::default() };
    c
}

fn aggregate_agent(mu1: f64, mu2: f64, rule: BandRule) -> UtilitySpec {
    UtilitySpec::PriceBandAggregate { eta: 3.0, alpha: 3.0, mu1, mu2, rule }
}

fn price_band_aggregate() -> ExperimentConfig {
    banded(
        "price_band_aggregate",
        "aggregate-holdings utility, trades only at prices in (0.9, 1.1)",
        vec![group(N, aggregate_agent(0.9, 1.1, BandRule::Bilateral))],
        None,
    )
}

fn five_bands() -> ExperimentConfig {
    let bands = [(0.5, 1.5), (0.6, 1.4), (0.7, 1.3), (0.8, 1.2), (0.9, 1.1)];
    let mut c = banded(
        "five_bands",
        "200 agents of each of five aggregate price bands",
        bands.iter().map(|&(a, b)| group(200, aggregate_agent(a, b, BandRule::Bilateral))).collect(),
        None,
    );
    // the mixed bands read noisier than a single one
    c.protocol.n_samples = 300;
    c
}

fn interdependent(name: &str, description: &str, comparison: Comparison, oracle: Option<OracleSelector>) -> ExperimentConfig {
    let mut c = base(
        name,
        description,
        1,
        vec![group(N, UtilitySpec::Interdependent { eta: 3.0, alpha: 3.0, comparison })],
        money_goods_grid(500.0, 8),
        oracle,
    );
    c.economy.topology = Topology::CircleExcludingComparison { comparison_radius: 1 };
    c
}

fn interdependent_exp() -> ExperimentConfig {
    interdependent(
        "interdependent_exp",
        "U(x) = e^x of goods relative to the two circle neighbours, who are never met",
        Comparison::Exp,
        Some(OracleSelector::InterdependentExp),
    )
}

fn interdependent_sigmoid() -> ExperimentConfig {
    let mut c = interdependent(
        "interdependent_sigmoid",
        "sigmoid comparison with a = 1.5, b = 0.5 against the two circle neighbours",
        Comparison::Sigmoid { a: 1.5, b: 0.5 },
        None,
    );
    c.protocol = MeasurementProtocol { burn_in_sweeps: 400, n_samples: 150, sample_stride_sweeps: 4, ..Default::default() };
    c
}

fn synthetic_noise() -> ExperimentConfig {
    let mut c = cd_homogeneous();
    c.name = "synthetic_noise".into();
    c.description = Some("exact Cobb-Douglas values with 1% Gaussian noise; no simulation".into());
    c.pure_money = None;
    c.synthetic = Some(SyntheticConfig { noise_rel: 0.01 });
    c
}
