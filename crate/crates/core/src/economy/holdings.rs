use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of non-money goods an economy can carry.
pub const MAX_GOODS: usize = 2;

/// Amounts held by one agent: money plus up to [`MAX_GOODS`] goods.
///
/// Commodity index 0 is money, indices `1..=n_goods` are goods. Unused good
/// slots stay at zero; the owning economy fixes how many are live.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Holdings {
    pub money: f64,
    pub goods: [f64; MAX_GOODS],
}

impl Holdings {
    pub fn new(money: f64, goods: &[f64]) -> Result<Self> {
        if goods.is_empty() || goods.len() > MAX_GOODS {
            return Err(Error::InvalidHoldings(format!(
                "expected 1..={MAX_GOODS} goods, got {}",
                goods.len()
            )));
        }
        let mut g = [0.0; MAX_GOODS];
        g[..goods.len()].copy_from_slice(goods);
        let h = Holdings { money, goods: g };
        h.check(goods.len())?;
        Ok(h)
    }

    pub const fn zero() -> Self {
        Holdings {
            money: 0.0,
            goods: [0.0; MAX_GOODS],
        }
    }

    #[inline]
    pub fn get(&self, commodity: usize) -> f64 {
        if commodity == 0 {
            self.money
        } else {
            self.goods[commodity - 1]
        }
    }

    #[inline]
    pub fn set(&mut self, commodity: usize, value: f64) {
        if commodity == 0 {
            self.money = value;
        } else {
            self.goods[commodity - 1] = value;
        }
    }

    #[inline]
    pub fn add(&self, other: &Holdings) -> Holdings {
        Holdings {
            money: self.money + other.money,
            goods: [self.goods[0] + other.goods[0], self.goods[1] + other.goods[1]],
        }
    }

    #[inline]
    pub fn sub(&self, other: &Holdings) -> Holdings {
        Holdings {
            money: self.money - other.money,
            goods: [self.goods[0] - other.goods[0], self.goods[1] - other.goods[1]],
        }
    }

    pub fn scale(&self, factor: f64) -> Holdings {
        Holdings {
            money: self.money * factor,
            goods: [self.goods[0] * factor, self.goods[1] * factor],
        }
    }

    pub fn goods_slice(&self, n_goods: usize) -> &[f64] {
        &self.goods[..n_goods]
    }

    pub fn is_non_negative(&self) -> bool {
        self.money >= 0.0 && self.goods.iter().all(|&g| g >= 0.0)
    }

    pub fn check(&self, n_goods: usize) -> Result<()> {
        let live = std::iter::once(self.money).chain(self.goods[..n_goods].iter().copied());
        for (c, v) in live.enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidHoldings(format!(
                    "commodity {c} has amount {v}"
                )));
            }
        }
        if self.goods[n_goods..].iter().any(|&g| g != 0.0) {
            return Err(Error::InvalidHoldings(format!(
                "goods beyond the first {n_goods} must be zero"
            )));
        }
        Ok(())
    }

    /// Relative component-wise distance, normalised by `reference`.
    pub fn max_rel_diff(&self, reference: &Holdings, n_goods: usize) -> f64 {
        (0..=n_goods)
            .map(|c| {
                let r = reference.get(c);
                let d = (self.get(c) - r).abs();
                if r == 0.0 {
                    d
                } else {
                    d / r.abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_wrong_length() {
        assert!(Holdings::new(-1.0, &[1.0]).is_err());
        assert!(Holdings::new(1.0, &[]).is_err());
        assert!(Holdings::new(1.0, &[1.0, 2.0, 3.0]).is_err());
        assert!(Holdings::new(1.0, &[f64::NAN]).is_err());
    }

    #[test]
    fn commodity_indexing() {
        let mut h = Holdings::new(1.0, &[2.0, 3.0]).unwrap();
        assert_eq!(h.get(0), 1.0);
        assert_eq!(h.get(2), 3.0);
        h.set(1, 5.0);
        assert_eq!(h.goods[0], 5.0);
    }
}
