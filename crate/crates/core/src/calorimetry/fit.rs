use serde::{Deserialize, Serialize};

use super::grid::MacroGrid;
use super::solver::fit_potential;
use crate::error::{Error, Result};
use crate::meter::MeterReading;

/// How the values at the two ends of an edge are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncrementRule {
    /// Average of both ends.
    #[default]
    Trapezoid,
    /// Values at the starting node only.
    OneSided,
}

/// Entropy change from `a` to `b`, for macro-states differing in at most
/// one total.
const SAME_STATE_TOLERANCE: f64 = 1e-9;

pub fn edge_increment(a: &MeterReading, b: &MeterReading, rule: IncrementRule) -> Result<f64> {
    let (sa, sb) = (&a.macro_state, &b.macro_state);
    let n_goods = a.nu.len();
    if b.nu.len() != n_goods {
        return Err(Error::DimensionMismatch(format!(
            "readings have {} and {} goods",
            n_goods,
            b.nu.len()
        )));
    }
    // totals of a simulated economy may sit a few ulps off the grid node
    let differs = |c: usize| (sa.get(c) - sb.get(c)).abs() > SAME_STATE_TOLERANCE * sa.get(c).abs().max(sb.get(c).abs());
    let changed: Vec<usize> = (0..=n_goods).filter(|&c| differs(c)).collect();
    let Some(&axis) = changed.first() else {
        return Ok(0.0);
    };
    if changed.len() > 1 {
        return Err(Error::NotAdjacent {
            a: format!("{sa:?}"),
            b: format!("{sb:?}"),
        });
    }
    let value = |r: &MeterReading| if axis == 0 { r.beta } else { r.nu[axis - 1] };
    let step = sb.get(axis) - sa.get(axis);
    Ok(match rule {
        IncrementRule::Trapezoid => 0.5 * (value(a) + value(b)) * step,
        IncrementRule::OneSided => value(a) * step,
    })
}

/// Least-squares entropy surface over a measured grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyField {
    pub grid: MacroGrid,
    pub readings: Vec<MeterReading>,
    pub fitted_s: Vec<f64>,
    pub rss: f64,
    pub tss: f64,
    pub goodness_of_fit: f64,
    pub flagged_nodes: usize,
    pub rule: IncrementRule,
}

impl EntropyField {
    /// The measured marginal along `axis` (beta for money, nu_j for goods)
    /// and its standard error.
    pub fn marginal(&self, node: usize, axis: usize) -> (f64, f64) {
        let r = &self.readings[node];
        if axis == 0 {
            (r.beta, r.se_beta)
        } else {
            (r.nu[axis - 1], r.se_nu[axis - 1])
        }
    }
}

pub fn fit_entropy(grid: &MacroGrid, readings: Vec<MeterReading>, rule: IncrementRule) -> Result<EntropyField> {
    grid.validate()?;
    let n = grid.node_count();
    if n < 2 {
        return Err(Error::Grid("fitting needs at least two nodes".into()));
    }
    if readings.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} readings for {n} grid nodes",
            readings.len()
        )));
    }
    for (node, r) in readings.iter().enumerate() {
        let want = grid.macro_state(node);
        if r.macro_state.max_rel_diff(&want, grid.n_goods()) > 1e-9 {
            return Err(Error::at_node(
                node,
                Error::Grid(format!("reading taken at {:?}, node is {want:?}", r.macro_state)),
            ));
        }
    }
    let edges = grid
        .edges()
        .iter()
        .map(|e| Ok((e.from, e.to, edge_increment(&readings[e.from], &readings[e.to], rule)?)))
        .collect::<Result<Vec<_>>>()?;
    // Pin at zero and shift afterwards so the reference value cannot change
    // anything but the constant.
    let fit = fit_potential(n, &edges, grid.reference_index(), 0.0)?;
    if !(fit.tss > 0.0) {
        return Err(Error::Grid("all edge increments are zero".into()));
    }
    let fitted_s = fit.values.iter().map(|s| s + grid.reference_entropy).collect();
    Ok(EntropyField {
        grid: grid.clone(),
        flagged_nodes: readings.iter().filter(|r| r.flagged).count(),
        readings,
        fitted_s,
        rss: fit.rss,
        tss: fit.tss,
        goodness_of_fit: fit.rss / fit.tss,
        rule,
    })
}

/// Readings with no noise: `beta = eta/m`, `nu_j = alpha_j/g_j` per capita,
/// standard errors set to `se_rel` times the value.
pub fn exact_cd_readings(grid: &MacroGrid, n: f64, eta: f64, alphas: &[f64], se_rel: f64) -> Vec<MeterReading> {
    (0..grid.node_count())
        .map(|node| {
            let s = grid.macro_state(node);
            let beta = eta * n / s.money;
            let nu: Vec<f64> = alphas.iter().enumerate().map(|(j, a)| a * n / s.goods[j]).collect();
            MeterReading {
                beta,
                se_beta: se_rel * beta,
                se_nu: nu.iter().map(|v| se_rel * v).collect(),
                nu,
                macro_state: s,
                n_samples: 0,
                flagged: false,
                stats: Default::default(),
            }
        })
        .collect()
}
