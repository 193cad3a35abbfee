//! Entropies known in closed form, up to additive constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_positive(what: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::OracleDomain(format!("no {what} given")));
    }
    match values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        Some(v) => Err(Error::OracleDomain(format!("{what} must be positive, got {v}"))),
        None => Ok(()),
    }
}

/// Homogeneous Cobb–Douglas economy of `n` agents:
/// `N (eta log(M/N) + sum_j alpha_j log(G_j/N))`.
pub fn cd_entropy(n: f64, eta: f64, alphas: &[f64], money: f64, goods: &[f64]) -> Result<f64> {
    check_positive("amounts", &[money])?;
    check_positive("amounts", goods)?;
    check_positive("agent count", &[n])?;
    if alphas.len() != goods.len() {
        return Err(Error::OracleDomain(format!(
            "{} exponents for {} goods",
            alphas.len(),
            goods.len()
        )));
    }
    let goods_term: f64 = alphas.iter().zip(goods).map(|(a, g)| a * (g / n).ln()).sum();
    Ok(n * (eta * (money / n).ln() + goods_term))
}

/// Agents sharing one set of Cobb–Douglas exponents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentGroup {
    pub count: usize,
    pub eta: f64,
    pub alphas: Vec<f64>,
}

/// Heterogeneous Cobb–Douglas economy: each log-mean is weighted by the sum
/// of the corresponding exponent over all agents.
pub fn hetero_cd_entropy(groups: &[ExponentGroup], money: f64, goods: &[f64]) -> Result<f64> {
    check_positive("amounts", &[money])?;
    check_positive("amounts", goods)?;
    let n: usize = groups.iter().map(|g| g.count).sum();
    if n == 0 {
        return Err(Error::OracleDomain("no agents".into()));
    }
    let n = n as f64;
    let mut s = groups.iter().map(|g| g.count as f64 * g.eta).sum::<f64>() * (money / n).ln();
    for (j, gj) in goods.iter().enumerate() {
        let mut weight = 0.0;
        for g in groups {
            let a = g.alphas.get(j).ok_or_else(|| {
                Error::OracleDomain(format!("group has {} exponents, need {}", g.alphas.len(), goods.len()))
            })?;
            weight += g.count as f64 * a;
        }
        s += weight * (gj / n).ln();
    }
    Ok(s)
}

/// Interdependent agents with exponential comparison, one good:
/// `N (eta log m + g + alpha log g)` with per-capita `m`, `g`.
pub fn interdependent_exp_entropy(n: f64, eta: f64, alpha: f64, money: f64, goods: f64) -> Result<f64> {
    check_positive("amounts", &[money, goods, n])?;
    let (m, g) = (money / n, goods / n);
    Ok(n * (eta * m.ln() + g + alpha * g.ln()))
}

/// Value of a good for the same economy: `1 + alpha / g`.
pub fn interdependent_exp_nu(n: f64, alpha: f64, goods: f64) -> f64 {
    1.0 + alpha * n / goods
}

/// Identical-threshold price-band agents with Cobb–Douglas outcome utility
/// share the stationary law, hence the entropy, of the plain CD economy.
pub fn price_band_cd_entropy(n: f64, eta: f64, alpha: f64, money: f64, goods: f64) -> Result<f64> {
    cd_entropy(n, eta, &[alpha], money, &[goods])
}
