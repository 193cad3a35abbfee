use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, OracleSelector};
use crate::calorimetry::{
    concavity_check, fit_entropy, goodness_of_agreement, grid_sweep, node_seed, pure_money_check, ConcavityReport,
    EntropyField, MacroGrid, PureMoneyReport,
};
use crate::economy::{Economy, Holdings, SamplerStats};
use crate::error::{Error, Result};
use crate::meter::MeterReading;
use crate::oracles::{
    free_energy_comparison_surface, hetero_cd_entropy, interdependent_exp_entropy, interdependent_exp_nu,
    legendre_entropy, legendre_transform, price_band_cd_entropy,
};

/// Mean squared relative error of measured values against the oracle's.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueAgreement {
    pub beta_mse_rel: f64,
    pub nu_mse_rel: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub rss: f64,
    pub tss: f64,
    pub goodness_of_fit: f64,
    pub oracle: Option<OracleSelector>,
    pub goodness_of_agreement: Option<f64>,
    pub value_agreement: Option<ValueAgreement>,
    pub concavity: ConcavityReport,
    pub pure_money: Option<PureMoneyReport>,
    pub flagged_nodes: usize,
    pub flagged_node_list: Vec<usize>,
    /// Largest relative standard error of any reading.
    pub max_rel_se: f64,
    pub sampler: SamplerStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node: usize,
    pub flagged: bool,
    pub sampler: SamplerStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub wall_clock_seconds: f64,
    pub nodes: Vec<NodeRecord>,
    pub stats: RunStats,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub field: EntropyField,
    /// Oracle entropy per node, shifted to the fitted surface's mean.
    pub oracle_surface: Option<Vec<f64>>,
    pub money_line: Vec<MeterReading>,
    pub stats: RunStats,
    pub manifest: RunManifest,
}

fn synthetic_readings(config: &ExperimentConfig, grid: &MacroGrid, seed: u64, noise: f64) -> Result<Vec<MeterReading>> {
    let groups = config.cd_groups()?;
    let eta_sum: f64 = groups.iter().map(|g| g.count as f64 * g.eta).sum();
    let alpha_sum: Vec<f64> = (0..grid.n_goods())
        .map(|j| groups.iter().map(|g| g.count as f64 * g.alphas[j]).sum())
        .collect();
    Ok((0..grid.node_count())
        .map(|node| {
            let mut rng = ChaCha8Rng::seed_from_u64(node_seed(seed, node));
            let s = grid.macro_state(node);
            let mut noisy = |v: f64| {
                let z: f64 = StandardNormal.sample(&mut rng);
                v * (1.0 + noise * z)
            };
            let beta0 = eta_sum / s.money;
            let nu0: Vec<f64> = alpha_sum.iter().enumerate().map(|(j, a)| a / s.goods[j]).collect();
            MeterReading {
                beta: noisy(beta0),
                nu: nu0.iter().map(|v| noisy(*v)).collect(),
                se_beta: noise * beta0,
                se_nu: nu0.iter().map(|v| noise * v).collect(),
                macro_state: s,
                n_samples: 0,
                flagged: false,
                stats: SamplerStats::default(),
            }
        })
        .collect())
}

fn measure(config: &ExperimentConfig, grid: &MacroGrid, seed: u64) -> Result<Vec<MeterReading>> {
    if let Some(s) = &config.synthetic {
        return synthetic_readings(config, grid, seed, s.noise_rel);
    }
    let groups = config.economy.groups();
    let e = &config.economy;
    let factory = |totals: &Holdings, rng: &mut ChaCha8Rng| {
        Economy::from_groups_with(&groups, e.topology.clone(), *totals, e.initial_holdings, rng)
    };
    grid_sweep(
        factory,
        grid,
        &config.meter_spec(),
        &config.protocol,
        &config.sampler,
        seed,
        config.parallelism,
    )
}

/// Entropy the oracle assigns to each node.
fn oracle_surface(config: &ExperimentConfig, oracle: OracleSelector, field: &EntropyField) -> Result<Vec<f64>> {
    let grid = &field.grid;
    let per_node = |f: &dyn Fn(&Holdings) -> Result<f64>| -> Result<Vec<f64>> {
        (0..grid.node_count())
            .map(|n| f(&grid.macro_state(n)).map_err(|e| Error::at_node(n, e)))
            .collect()
    };
    let k = grid.n_goods();
    match oracle {
        OracleSelector::CobbDouglas => {
            let groups = config.cd_groups()?;
            per_node(&|s| hetero_cd_entropy(&groups, s.money, &s.goods[..k]))
        }
        OracleSelector::FreeEnergy => free_energy_comparison_surface(&config.free_energy_spec()?, &field.readings),
        OracleSelector::Legendre => {
            let spec = config.free_energy_spec()?;
            per_node(&|s| legendre_entropy(&spec, s.money, &s.goods[..k]))
        }
        OracleSelector::InterdependentExp => {
            let (n, eta, alpha) = config.interdependent_exp_params()?;
            per_node(&|s| interdependent_exp_entropy(n, eta, alpha, s.money, s.goods[0]))
        }
        OracleSelector::PriceBandCd => {
            let (n, eta, alpha) = config.price_band_params()?;
            per_node(&|s| price_band_cd_entropy(n, eta, alpha, s.money, s.goods[0]))
        }
    }
}

/// Values `(beta, nu)` the oracle predicts at a node.
fn oracle_values(config: &ExperimentConfig, oracle: OracleSelector, s: &Holdings, k: usize) -> Result<(f64, Vec<f64>)> {
    match oracle {
        OracleSelector::CobbDouglas => {
            let groups = config.cd_groups()?;
            let beta = groups.iter().map(|g| g.count as f64 * g.eta).sum::<f64>() / s.money;
            let nu = (0..k)
                .map(|j| groups.iter().map(|g| g.count as f64 * g.alphas[j]).sum::<f64>() / s.goods[j])
                .collect();
            Ok((beta, nu))
        }
        OracleSelector::FreeEnergy | OracleSelector::Legendre => {
            let p = legendre_transform(&config.free_energy_spec()?, s.money, &s.goods[..k])?;
            Ok((p.beta, p.nu))
        }
        OracleSelector::InterdependentExp => {
            let (n, eta, alpha) = config.interdependent_exp_params()?;
            Ok((n * eta / s.money, vec![interdependent_exp_nu(n, alpha, s.goods[0])]))
        }
        OracleSelector::PriceBandCd => {
            let (n, eta, alpha) = config.price_band_params()?;
            Ok((n * eta / s.money, vec![n * alpha / s.goods[0]]))
        }
    }
}

fn value_agreement(config: &ExperimentConfig, oracle: OracleSelector, field: &EntropyField) -> Result<ValueAgreement> {
    let k = field.grid.n_goods();
    let (mut b, mut v) = (0.0, 0.0);
    for (node, r) in field.readings.iter().enumerate() {
        let (beta, nu) = oracle_values(config, oracle, &r.macro_state, k).map_err(|e| Error::at_node(node, e))?;
        b += ((r.beta - beta) / beta).powi(2);
        v += r.nu.iter().zip(&nu).map(|(m, p)| ((m - p) / p).powi(2)).sum::<f64>() / k as f64;
    }
    let n = field.readings.len() as f64;
    Ok(ValueAgreement {
        beta_mse_rel: b / n,
        nu_mse_rel: v / n,
    })
}

/// Measure, fit and diagnose; nothing is written.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    let started = Instant::now();
    let readings = measure(config, &config.grid, config.seed)?;
    let field = fit_entropy(&config.grid, readings, config.increment_rule)?;

    let (oracle_surface, goodness_of_agreement, value_agreement) = match config.oracle {
        Some(oracle) => {
            let mut surface = oracle_surface(config, oracle, &field)?;
            let agreement = goodness_of_agreement(&field.fitted_s, &surface)?;
            let shift = mean(&field.fitted_s) - mean(&surface);
            surface.iter_mut().for_each(|s| *s += shift);
            (Some(surface), Some(agreement), Some(value_agreement(config, oracle, &field)?))
        }
        None => (None, None, None),
    };

    let concavity = concavity_check(&field, config.concavity_tolerance);

    let (money_line, pure_money) = match &config.pure_money {
        Some(pm) => {
            let mut axes = vec![pm.money.clone()];
            axes.extend(pm.goods.iter().map(|g| vec![*g]));
            let line_grid = MacroGrid::new(axes)?;
            let line = measure(config, &line_grid, node_seed(config.seed, usize::MAX))?;
            let grid = &field.grid;
            let m_ref = grid.coords_of(grid.reference_index())[0];
            let goods_grid: Vec<MeterReading> = (0..grid.node_count())
                .filter(|&n| grid.coords_of(n)[0] == m_ref)
                .map(|n| field.readings[n].clone())
                .collect();
            let report = pure_money_check(&goods_grid, &line);
            (line, Some(report))
        }
        None => (Vec::new(), None),
    };

    let mut sampler = SamplerStats::default();
    for r in field.readings.iter().chain(&money_line) {
        sampler.merge(&r.stats);
    }
    let max_rel_se = field
        .readings
        .iter()
        .flat_map(|r| std::iter::once(r.se_beta / r.beta).chain(r.se_nu.iter().zip(&r.nu).map(|(s, v)| s / v)))
        .fold(0.0, f64::max);
    let flagged_node_list: Vec<usize> = (0..field.readings.len()).filter(|&n| field.readings[n].flagged).collect();
    let stats = RunStats {
        n_nodes: field.grid.node_count(),
        n_edges: field.grid.edges().len(),
        rss: field.rss,
        tss: field.tss,
        goodness_of_fit: field.goodness_of_fit,
        oracle: config.oracle,
        goodness_of_agreement,
        value_agreement,
        concavity,
        pure_money,
        flagged_nodes: field.flagged_nodes,
        flagged_node_list,
        max_rel_se,
        sampler,
    };
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        nodes: field
            .readings
            .iter()
            .enumerate()
            .map(|(node, r)| NodeRecord {
                node,
                flagged: r.flagged,
                sampler: r.stats,
            })
            .collect(),
        stats: stats.clone(),
    };
    Ok(RunOutcome {
        field,
        oracle_surface,
        money_line,
        stats,
        manifest,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const FIELD_HEADER: &str = "M,G1,G2,beta,se_beta,nu1,se_nu1,nu2,se_nu2,S_fit,S_oracle";

/// One row per node. Columns for an absent second good are left empty.
pub fn field_csv(outcome: &RunOutcome) -> String {
    let f = &outcome.field;
    let mut out = String::from(FIELD_HEADER);
    out.push('\n');
    for (node, r) in f.readings.iter().enumerate() {
        let s = &r.macro_state;
        let g2 = (r.nu.len() > 1).then(|| s.goods[1]);
        let nu = |j: usize| (r.nu.get(j).copied(), r.se_nu.get(j).copied());
        let (nu1, se1) = nu(0);
        let (nu2, se2) = nu(1);
        let oracle = outcome.oracle_surface.as_ref().map(|o| o[node]);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            s.money,
            s.goods[0],
            opt(g2),
            r.beta,
            r.se_beta,
            opt(nu1),
            opt(se1),
            opt(nu2),
            opt(se2),
            f.fitted_s[node],
            opt(oracle),
        );
    }
    out
}

/// Long format for plotting: `series,M,G1,G2,value`.
pub fn plot_csv(outcome: &RunOutcome) -> String {
    let f = &outcome.field;
    let mut out = String::from("series,M,G1,G2,value\n");
    let mut row = |series: &str, s: &Holdings, n_goods: usize, v: f64| {
        let g2 = if n_goods > 1 { s.goods[1].to_string() } else { String::new() };
        let _ = writeln!(out, "{series},{},{},{g2},{v}", s.money, s.goods[0]);
    };
    for (node, r) in f.readings.iter().enumerate() {
        let s = &r.macro_state;
        let k = r.nu.len();
        row("S_fit", s, k, f.fitted_s[node]);
        if let Some(o) = &outcome.oracle_surface {
            row("S_oracle", s, k, o[node]);
        }
        row("beta", s, k, r.beta);
        for (j, v) in r.nu.iter().enumerate() {
            row(&format!("nu{}", j + 1), s, k, *v);
        }
    }
    for r in &outcome.money_line {
        row("beta_money_line", &r.macro_state, r.nu.len(), r.beta);
    }
    out
}

/// Write `field.csv`, `plot.csv`, `stats.json` and `manifest.json` into `dir`.
pub fn write_artifacts(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("field.csv"), field_csv(outcome))?;
    fs::write(dir.join("plot.csv"), plot_csv(outcome))?;
    fs::write(dir.join("stats.json"), serde_json::to_string_pretty(&outcome.stats)? + "\n")?;
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&outcome.manifest)? + "\n")?;
    Ok(())
}
