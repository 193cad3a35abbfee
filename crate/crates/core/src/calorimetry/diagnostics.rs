use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::fit::EntropyField;
use super::grid::MacroGrid;
use crate::error::{Error, Result};
use crate::meter::MeterReading;

/// Mean-shifted squared difference between two surfaces, relative to the
/// spread of the oracle.
pub fn goodness_of_agreement(fitted: &[f64], oracle: &[f64]) -> Result<f64> {
    if fitted.len() != oracle.len() || fitted.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} fitted values against {} oracle values",
            fitted.len(),
            oracle.len()
        )));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mf, mo) = (mean(fitted), mean(oracle));
    let den: f64 = oracle.iter().map(|o| (o - mo).powi(2)).sum();
    if !(den > 0.0) {
        return Err(Error::DegenerateOracle);
    }
    let num: f64 = fitted
        .iter()
        .zip(oracle)
        .map(|(f, o)| ((f - mf) - (o - mo)).powi(2))
        .sum();
    Ok(num / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum ConcavityTolerance {
    Absolute(f64),
    /// This many standard errors of the Hessian, propagated from the readings.
    StandardErrors(f64),
}

impl Default for ConcavityTolerance {
    fn default() -> Self {
        ConcavityTolerance::StandardErrors(3.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub pass: bool,
    /// Largest Hessian eigenvalue over interior nodes; `None` without any.
    pub worst_eigenvalue: Option<f64>,
    pub worst_node: Option<usize>,
    /// Largest `eigenvalue - tolerance`; positive means a violation.
    pub worst_excess: Option<f64>,
    pub interior_nodes: usize,
    pub tested_axes: Vec<usize>,
}

/// Neighbour spacings of `node` along `axis`, if it is interior there.
fn spacing(grid: &MacroGrid, node: usize, axis: usize) -> Option<(usize, usize, f64, f64)> {
    let lo = grid.neighbour(node, axis, false)?;
    let hi = grid.neighbour(node, axis, true)?;
    let c = grid.coords_of(node)[axis];
    let ax = &grid.axes[axis];
    Some((lo, hi, ax[c] - ax[c - 1], ax[c + 1] - ax[c]))
}

fn step(grid: &MacroGrid, node: usize, axis: usize, d: i32) -> usize {
    match d {
        -1 => grid.neighbour(node, axis, false),
        1 => grid.neighbour(node, axis, true),
        _ => Some(node),
    }
    .expect("interior node")
}

/// Discrete Hessian of `s` at an interior node over `axes`, plus the
/// variance of each entry propagated from `marginal_se` (the standard error
/// of the measured derivative along an axis at a node).
fn hessian(
    grid: &MacroGrid,
    s: &[f64],
    node: usize,
    axes: &[usize],
    marginal_se: &dyn Fn(usize, usize) -> f64,
) -> (Matrix3<f64>, f64) {
    let mut h = Matrix3::zeros();
    let mut var = 0.0;
    for (p, &a) in axes.iter().enumerate() {
        let (lo, hi, hm, hp) = spacing(grid, node, a).expect("interior node");
        h[(p, p)] = 2.0 * ((s[hi] - s[node]) / hp - (s[node] - s[lo]) / hm) / (hm + hp);
        // second difference of S ~ difference of the marginal across the node
        var += (marginal_se(hi, a).powi(2) + marginal_se(lo, a).powi(2)) / (hm + hp).powi(2);
        for (q, &b) in axes.iter().enumerate().skip(p + 1) {
            let (_, _, bm, bp) = spacing(grid, node, b).expect("interior node");
            let at = |da: i32, db: i32| step(grid, step(grid, node, a, da), b, db);
            let mixed = (s[at(1, 1)] - s[at(1, -1)] - s[at(-1, 1)] + s[at(-1, -1)]) / ((hm + hp) * (bm + bp));
            h[(p, q)] = mixed;
            h[(q, p)] = mixed;
            // the b-difference at each a-side integrates the b-marginal over three nodes
            let mut v = 0.0;
            for da in [-1, 1] {
                for (db, w) in [(-1, 0.5 * bm), (0, 0.5 * (bm + bp)), (1, 0.5 * bp)] {
                    v += (w * marginal_se(at(da, db), b)).powi(2);
                }
            }
            var += 2.0 * v / ((hm + hp) * (bm + bp)).powi(2);
        }
    }
    (h, var)
}

fn max_eigenvalue(h: &Matrix3<f64>, k: usize) -> f64 {
    let sub = h.view((0, 0), (k, k)).clone_owned();
    SymmetricEigen::new(sub).eigenvalues.max()
}

fn concavity_impl(
    grid: &MacroGrid,
    s: &[f64],
    tolerance: &dyn Fn(f64) -> f64,
    marginal_se: &dyn Fn(usize, usize) -> f64,
) -> ConcavityReport {
    let tested_axes: Vec<usize> = (0..grid.axes.len()).filter(|&a| grid.axes[a].len() >= 3).collect();
    let mut report = ConcavityReport {
        pass: true,
        worst_eigenvalue: None,
        worst_node: None,
        worst_excess: None,
        interior_nodes: 0,
        tested_axes: tested_axes.clone(),
    };
    if tested_axes.is_empty() {
        return report;
    }
    for node in 0..grid.node_count() {
        if tested_axes.iter().any(|&a| spacing(grid, node, a).is_none()) {
            continue;
        }
        report.interior_nodes += 1;
        let (h, var) = hessian(grid, s, node, &tested_axes, marginal_se);
        let lambda = max_eigenvalue(&h, tested_axes.len());
        let excess = lambda - tolerance(var.sqrt());
        if report.worst_eigenvalue.is_none_or(|w| lambda > w) {
            report.worst_eigenvalue = Some(lambda);
            report.worst_node = Some(node);
        }
        report.worst_excess = Some(report.worst_excess.map_or(excess, |w| w.max(excess)));
        if excess > 0.0 {
            report.pass = false;
        }
    }
    report
}

/// Whether the fitted surface is concave at every interior node, up to the
/// tolerance. Axes with fewer than three values are not tested.
pub fn concavity_check(field: &EntropyField, tolerance: ConcavityTolerance) -> ConcavityReport {
    let tol = move |sd: f64| match tolerance {
        ConcavityTolerance::Absolute(t) => t,
        ConcavityTolerance::StandardErrors(k) => k * sd,
    };
    concavity_impl(&field.grid, &field.fitted_s, &tol, &|node, axis| field.marginal(node, axis).1)
}

/// [`concavity_check`] for a tabulated surface with no readings behind it.
pub fn concavity_check_values(grid: &MacroGrid, s: &[f64], tolerance: f64) -> ConcavityReport {
    concavity_impl(grid, s, &|_| tolerance, &|_, _| 0.0)
}

/// Weighted least squares; returns coefficients and their standard errors
/// taking the weights as inverse variances.
fn weighted_ls(rows: &[Vec<f64>], y: &[f64], w: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let p = rows.first()?.len();
    let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j] * w[i].sqrt());
    let yv = DVector::from_iterator(y.len(), y.iter().zip(w).map(|(y, w)| y * w.sqrt()));
    let xtx = x.transpose() * &x;
    let inv = xtx.try_inverse()?;
    let coef = &inv * x.transpose() * yv;
    let se = (0..p).map(|j| inv[(j, j)].max(0.0).sqrt()).collect();
    Some((coef.iter().copied().collect(), se))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PureMoneyReport {
    /// Largest `|beta - mean| / mean` over the goods grid.
    pub max_rel_beta_variation: f64,
    /// Largest `|slope / se|` of beta regressed on the log goods amounts.
    pub beta_trend_z: Option<f64>,
    /// Slope of `log beta` against `log M` along the money line.
    pub money_value_exponent: Option<f64>,
    pub money_value_exponent_se: Option<f64>,
}

impl PureMoneyReport {
    pub fn beta_uniform(&self, z: f64) -> bool {
        self.beta_trend_z.is_some_and(|t| t <= z)
    }

    pub fn exponent_within(&self, target: f64, tol: f64) -> bool {
        self.money_value_exponent.is_some_and(|e| (e - target).abs() <= tol)
    }
}

fn inverse_variance(value: f64, se: f64) -> f64 {
    // guard against a zero standard error from a frozen series
    let se = se.max(1e-12 * value.abs()).max(f64::MIN_POSITIVE);
    1.0 / (se * se)
}

/// Is the value of money independent of the goods, and inversely
/// proportional to the money stock?
///
/// `goods_grid` should be taken at one money total; `money_line` at fixed goods.
pub fn pure_money_check(goods_grid: &[MeterReading], money_line: &[MeterReading]) -> PureMoneyReport {
    let w: Vec<f64> = goods_grid.iter().map(|r| inverse_variance(r.beta, r.se_beta)).collect();
    let w_sum: f64 = w.iter().sum();
    let mean = goods_grid.iter().zip(&w).map(|(r, w)| r.beta * w).sum::<f64>() / w_sum;
    let max_rel_beta_variation = goods_grid
        .iter()
        .map(|r| ((r.beta - mean) / mean).abs())
        .fold(0.0, f64::max);

    let beta_trend_z = goods_grid.first().and_then(|first| {
        // only goods that actually vary become regressors
        let varying: Vec<usize> = (0..first.nu.len())
            .filter(|&j| goods_grid.iter().any(|r| r.macro_state.goods[j] != first.macro_state.goods[j]))
            .collect();
        if varying.is_empty() {
            return None;
        }
        let rows: Vec<Vec<f64>> = goods_grid
            .iter()
            .map(|r| std::iter::once(1.0).chain(varying.iter().map(|&j| r.macro_state.goods[j].ln())).collect())
            .collect();
        let y: Vec<f64> = goods_grid.iter().map(|r| r.beta).collect();
        let (coef, se) = weighted_ls(&rows, &y, &w)?;
        Some((1..coef.len()).map(|k| (coef[k] / se[k]).abs()).fold(0.0, f64::max))
    });

    let (money_value_exponent, money_value_exponent_se) = if money_line.len() >= 2 {
        let rows: Vec<Vec<f64>> = money_line.iter().map(|r| vec![1.0, r.macro_state.money.ln()]).collect();
        let y: Vec<f64> = money_line.iter().map(|r| r.beta.ln()).collect();
        // se of log beta is se/beta
        let w: Vec<f64> = money_line.iter().map(|r| inverse_variance(1.0, r.se_beta / r.beta)).collect();
        match weighted_ls(&rows, &y, &w) {
            Some((c, s)) => (Some(c[1]), Some(s[1])),
            None => (None, None),
        }
    } else {
        (None, None)
    };

    PureMoneyReport {
        max_rel_beta_variation,
        beta_trend_z,
        money_value_exponent,
        money_value_exponent_se,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calorimetry::fit::{exact_cd_readings, fit_entropy, IncrementRule};
    use crate::calorimetry::grid::linspace;

    fn grid() -> MacroGrid {
        MacroGrid::new(vec![vec![1000.0], linspace(500.0, 2000.0, 5), linspace(500.0, 2000.0, 5)]).unwrap()
    }

    #[test]
    fn agreement_is_shift_invariant() {
        let o = [1.0, 2.0, 4.0];
        assert_eq!(goodness_of_agreement(&o, &o).unwrap(), 0.0);
        let shifted: Vec<f64> = o.iter().map(|x| x + 7.0).collect();
        assert!(goodness_of_agreement(&shifted, &o).unwrap() < 1e-30);
        assert!(matches!(goodness_of_agreement(&o, &[1.0; 3]), Err(Error::DegenerateOracle)));
    }

    #[test]
    fn tabulated_surfaces() {
        let g = grid();
        let tab = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
            (0..g.node_count())
                .map(|n| {
                    let h = g.macro_state(n);
                    f(h.goods[0], h.goods[1])
                })
                .collect()
        };
        let cd = concavity_check_values(&g, &tab(&|a, b| 3000.0 * (a.ln() + b.ln())), 0.0);
        assert!(cd.pass && cd.worst_eigenvalue.unwrap() < 0.0);
        assert_eq!(cd.interior_nodes, 9);
        assert_eq!(cd.tested_axes, vec![1, 2]);
        assert!(!concavity_check_values(&g, &tab(&|a, _| a * a), 0.0).pass);
        let affine = concavity_check_values(&g, &tab(&|a, b| 2.0 * a - b), 1e-12);
        assert!(affine.pass);
    }

    #[test]
    fn cd_hessian_matches_analytic_at_fine_spacing() {
        let g = MacroGrid::new(vec![vec![1000.0], vec![999.0, 1000.0, 1001.0], vec![999.0, 1000.0, 1001.0]]).unwrap();
        let s: Vec<f64> = (0..9)
            .map(|n| {
                let h = g.macro_state(n);
                3000.0 * (h.goods[0].ln() + 2.0 * h.goods[1].ln())
            })
            .collect();
        let r = concavity_check_values(&g, &s, 0.0);
        // largest of -3000/1000^2 and -6000/1000^2
        let w = r.worst_eigenvalue.unwrap();
        assert!((w + 3e-3).abs() < 1e-7, "{w}");
    }

    #[test]
    fn se_tolerance_scales_with_noise() {
        let g = grid();
        let readings = exact_cd_readings(&g, 1000.0, 3.0, &[3.0, 3.0], 0.01);
        let f = fit_entropy(&g, readings, IncrementRule::Trapezoid).unwrap();
        let r = concavity_check(&f, ConcavityTolerance::default());
        assert!(r.pass);
        assert!(r.worst_excess.unwrap() < r.worst_eigenvalue.unwrap());
    }

    #[test]
    fn pure_money_on_exact_cd() {
        let g = grid();
        let goods = exact_cd_readings(&g, 1000.0, 3.0, &[3.0, 3.0], 0.01);
        let line = MacroGrid::new(vec![vec![500.0, 1000.0, 2000.0], vec![1000.0], vec![1000.0]]).unwrap();
        let money = exact_cd_readings(&line, 1000.0, 3.0, &[3.0, 3.0], 0.01);
        let r = pure_money_check(&goods, &money);
        assert!(r.max_rel_beta_variation < 1e-12);
        assert!(r.beta_uniform(3.0));
        assert!(r.exponent_within(-1.0, 1e-9), "{:?}", r.money_value_exponent);
    }

    #[test]
    fn goods_dependent_beta_is_caught() {
        let g = grid();
        let mut goods = exact_cd_readings(&g, 1000.0, 3.0, &[3.0, 3.0], 0.001);
        for r in &mut goods {
            r.beta *= (r.macro_state.goods[0] / 1000.0).powf(0.1);
        }
        let r = pure_money_check(&goods, &[]);
        assert!(!r.beta_uniform(3.0));
        assert_eq!(r.money_value_exponent, None);
    }
}
