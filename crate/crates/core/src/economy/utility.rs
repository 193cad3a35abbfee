//! Agent utility families.
//!
//! A utility here is an unnormalised density over encounter outcomes: two
//! agents that meet redistribute their pooled holdings with probability density
//! proportional to the product of their utilities for the outcome.

use serde::{Deserialize, Serialize};

use super::holdings::Holdings;
use crate::error::{Error, Result};

/// Neighbour-comparison term `U(g - g_n)` of an interdependent agent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Comparison {
    /// `U(x) = e^x`
    Exp,
    /// `U(x) = (a e^x + b e^-x) / (e^x + e^-x)`, with `a > b > 0`.
    Sigmoid { a: f64, b: f64 },
}

impl Comparison {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Comparison::Exp => x.exp(),
            Comparison::Sigmoid { a, b } => {
                // Written via the logistic of 2x so large |x| cannot overflow.
                let w = 1.0 / (1.0 + (-2.0 * x).exp());
                a * w + b * (1.0 - w)
            }
        }
    }
}

/// How a price-sensitive agent applies its thresholds to the implied price.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandRule {
    /// Accept only trades whose implied price lies in `[mu1, mu2]`, whichever
    /// side of the trade the agent is on.
    #[default]
    Bilateral,
    /// Sell only at prices `>= mu1`, buy only at prices `<= mu2`.
    SellerBuyer,
}

fn default_band_rule() -> BandRule {
    BandRule::Bilateral
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum UtilitySpec {
    /// `m^(eta-1) * prod_j g_j^(alpha_j-1)`
    CobbDouglas { eta: f64, alphas: Vec<f64> },
    /// `m^(eta-1) (g1+g2)^(alpha-1)`
    Substitutes { eta: f64, alpha: f64 },
    /// `m^(eta-1) min(g1,g2)^(alpha-1)`
    Complements { eta: f64, alpha: f64 },
    /// `m^(eta-1) g2^(alpha-1) exp(-g1^2 / (k (g1 - c)))`, zero for `g1 <= c`.
    Satiable { eta: f64, alpha: f64, c: f64, k: f64 },
    /// One good; CD outcome utility gated by the implied trade price.
    PriceBandSeparable {
        eta: f64,
        alpha: f64,
        mu1: f64,
        mu2: f64,
        #[serde(default = "default_band_rule")]
        rule: BandRule,
    },
    /// One good; `(g+g')^(alpha-1) (m+m')^(eta-1)` gated by the implied price.
    PriceBandAggregate {
        eta: f64,
        alpha: f64,
        mu1: f64,
        mu2: f64,
        #[serde(default = "default_band_rule")]
        rule: BandRule,
    },
    /// One good; `m^(eta-1) g^(alpha-1) U(g - g_n)` with `g_n` the mean goods of
    /// the comparison neighbourhood.
    Interdependent {
        eta: f64,
        alpha: f64,
        comparison: Comparison,
    },
}

/// What an agent's utility may condition on besides the outcome itself.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EncounterContext {
    /// Holdings before the encounter.
    pub current: Holdings,
    /// Mean goods of the comparison neighbourhood, for interdependent agents.
    pub neighbourhood_mean: Option<f64>,
}

impl EncounterContext {
    pub fn new(current: Holdings) -> Self {
        EncounterContext {
            current,
            neighbourhood_mean: None,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidUtility(format!("{name} must be > 0, got {v}")))
    }
}

impl UtilitySpec {
    pub fn cobb_douglas(eta: f64, alphas: &[f64]) -> Self {
        UtilitySpec::CobbDouglas {
            eta,
            alphas: alphas.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("eta", self.eta())?;
        match self {
            UtilitySpec::CobbDouglas { alphas, .. } => {
                if alphas.is_empty() || alphas.len() > super::MAX_GOODS {
                    return Err(Error::InvalidUtility(format!(
                        "Cobb-Douglas needs 1 or 2 goods exponents, got {}",
                        alphas.len()
                    )));
                }
                for &a in alphas {
                    positive("alpha", a)?;
                }
            }
            UtilitySpec::Substitutes { alpha, .. } | UtilitySpec::Complements { alpha, .. } => {
                positive("alpha", *alpha)?
            }
            UtilitySpec::Satiable { alpha, c, k, .. } => {
                positive("alpha", *alpha)?;
                positive("c", *c)?;
                positive("k", *k)?;
            }
            UtilitySpec::PriceBandSeparable { alpha, mu1, mu2, .. }
            | UtilitySpec::PriceBandAggregate { alpha, mu1, mu2, .. } => {
                positive("alpha", *alpha)?;
                positive("mu1", *mu1)?;
                positive("mu2", *mu2)?;
                if mu1 >= mu2 {
                    return Err(Error::InvalidUtility(format!(
                        "price band needs mu1 < mu2, got ({mu1}, {mu2})"
                    )));
                }
            }
            UtilitySpec::Interdependent {
                alpha, comparison, ..
            } => {
                positive("alpha", *alpha)?;
                if let Comparison::Sigmoid { a, b } = comparison {
                    positive("b", *b)?;
                    if a <= b {
                        return Err(Error::InvalidUtility(format!(
                            "sigmoid comparison needs a > b, got a={a}, b={b}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn eta(&self) -> f64 {
        match *self {
            UtilitySpec::CobbDouglas { eta, .. }
            | UtilitySpec::Substitutes { eta, .. }
            | UtilitySpec::Complements { eta, .. }
            | UtilitySpec::Satiable { eta, .. }
            | UtilitySpec::PriceBandSeparable { eta, .. }
            | UtilitySpec::PriceBandAggregate { eta, .. }
            | UtilitySpec::Interdependent { eta, .. } => eta,
        }
    }

    /// Power-law exponent of each goods slot; 1 where a good carries no
    /// power law (the satiable good) or does not exist.
    pub fn goods_exponents(&self) -> [f64; super::MAX_GOODS] {
        match self {
            UtilitySpec::CobbDouglas { alphas, .. } => {
                let mut a = [1.0; super::MAX_GOODS];
                a[..alphas.len()].copy_from_slice(alphas);
                a
            }
            UtilitySpec::Substitutes { alpha, .. } | UtilitySpec::Complements { alpha, .. } => [*alpha; 2],
            UtilitySpec::Satiable { alpha, .. } => [1.0, *alpha],
            UtilitySpec::PriceBandSeparable { alpha, .. }
            | UtilitySpec::PriceBandAggregate { alpha, .. }
            | UtilitySpec::Interdependent { alpha, .. } => [*alpha, 1.0],
        }
    }

    pub fn goods_count(&self) -> usize {
        match self {
            UtilitySpec::CobbDouglas { alphas, .. } => alphas.len(),
            UtilitySpec::Substitutes { .. }
            | UtilitySpec::Complements { .. }
            | UtilitySpec::Satiable { .. } => 2,
            UtilitySpec::PriceBandSeparable { .. }
            | UtilitySpec::PriceBandAggregate { .. }
            | UtilitySpec::Interdependent { .. } => 1,
        }
    }

    /// Money enters as `m^(eta-1)` times a function of goods alone.
    pub fn has_pure_money_form(&self) -> bool {
        !matches!(
            self,
            UtilitySpec::PriceBandSeparable { .. } | UtilitySpec::PriceBandAggregate { .. }
        )
    }

    pub fn needs_neighbourhood(&self) -> bool {
        matches!(self, UtilitySpec::Interdependent { .. })
    }

    /// Price thresholds, if the agent is price sensitive.
    pub fn price_band(&self) -> Option<(f64, f64, BandRule)> {
        match *self {
            UtilitySpec::PriceBandSeparable { mu1, mu2, rule, .. }
            | UtilitySpec::PriceBandAggregate { mu1, mu2, rule, .. } => Some((mu1, mu2, rule)),
            _ => None,
        }
    }

    /// Unnormalised density weight of `outcome` for an agent in `context`.
    ///
    /// Zero outside the family's support. A non-finite weight (for example
    /// `0^(negative)` at the box boundary) is reported as
    /// [`Error::DomainBoundary`].
    pub fn utility(&self, outcome: &Holdings, context: &EncounterContext) -> Result<f64> {
        if !outcome.is_non_negative() {
            return Err(Error::InvalidHoldings(format!(
                "negative outcome {outcome:?}"
            )));
        }
        let m = outcome.money;
        let value = match self {
            UtilitySpec::CobbDouglas { eta, alphas } => {
                let mut u = pow(m, *eta);
                for (j, &a) in alphas.iter().enumerate() {
                    u *= pow(outcome.goods[j], a);
                }
                u
            }
            UtilitySpec::Substitutes { eta, alpha } => {
                pow(m, *eta) * pow(outcome.goods[0] + outcome.goods[1], *alpha)
            }
            UtilitySpec::Complements { eta, alpha } => {
                pow(m, *eta) * pow(outcome.goods[0].min(outcome.goods[1]), *alpha)
            }
            UtilitySpec::Satiable { eta, alpha, c, k } => {
                pow(m, *eta) * pow(outcome.goods[1], *alpha) * satiation(outcome.goods[0], *c, *k)
            }
            UtilitySpec::PriceBandSeparable {
                eta, alpha, mu1, mu2, rule,
            } => {
                if !band_admits(&context.current, outcome, *mu1, *mu2, *rule) {
                    return Ok(0.0);
                }
                pow(m, *eta) * pow(outcome.goods[0], *alpha)
            }
            UtilitySpec::PriceBandAggregate {
                eta, alpha, mu1, mu2, rule,
            } => {
                if !band_admits(&context.current, outcome, *mu1, *mu2, *rule) {
                    return Ok(0.0);
                }
                pow(m + context.current.money, *eta)
                    * pow(outcome.goods[0] + context.current.goods[0], *alpha)
            }
            UtilitySpec::Interdependent {
                eta,
                alpha,
                comparison,
            } => {
                let gn = context.neighbourhood_mean.ok_or_else(|| {
                    Error::InvalidUtility(
                        "interdependent utility needs a neighbourhood mean".into(),
                    )
                })?;
                let g = outcome.goods[0];
                pow(m, *eta) * pow(g, *alpha) * comparison.eval(g - gn)
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::DomainBoundary(format!("{self:?} at {outcome:?}")))
        }
    }
}

/// `x^(exponent - 1)`, the building block of every power-law factor.
#[inline]
pub(crate) fn pow(x: f64, exponent: f64) -> f64 {
    let p = exponent - 1.0;
    if p == 0.0 {
        1.0
    } else if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else {
        x.powf(p)
    }
}

/// Satiable goods factor `exp(-g^2 / (k (g - c)))`, zero for `g <= c`.
#[inline]
pub(crate) fn satiation(g: f64, c: f64, k: f64) -> f64 {
    if g <= c {
        0.0
    } else {
        (-g * g / (k * (g - c))).exp()
    }
}

/// Implied price of a one-good trade seen from the agent moving `current -> outcome`.
///
/// Returns `(price, selling)`; `None` when the goods change is zero.
#[inline]
pub fn implied_price(current: &Holdings, outcome: &Holdings, min_step: f64) -> Option<(f64, bool)> {
    let dg = outcome.goods[0] - current.goods[0];
    if dg.abs() < min_step {
        return None;
    }
    let price = (outcome.money - current.money) / (-dg);
    Some((price, dg < 0.0))
}

#[inline]
pub(crate) fn band_admits_price(price: f64, selling: bool, mu1: f64, mu2: f64, rule: BandRule) -> bool {
    match rule {
        BandRule::Bilateral => mu1 <= price && price <= mu2,
        BandRule::SellerBuyer => {
            if selling {
                price >= mu1
            } else {
                price <= mu2
            }
        }
    }
}

fn band_admits(current: &Holdings, outcome: &Holdings, mu1: f64, mu2: f64, rule: BandRule) -> bool {
    match implied_price(current, outcome, 1e-12) {
        Some((price, selling)) => band_admits_price(price, selling, mu1, mu2, rule),
        None => false,
    }
}
