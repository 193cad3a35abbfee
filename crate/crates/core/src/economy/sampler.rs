//! Outcome samplers for pairwise encounters.
//!
//! Every supported utility factorises into a money factor and a goods factor,
//! so the joint outcome density `u_i(x) u_j(P - x)` on the box `[0, P]` splits
//! into independent blocks: money, and either one block per good or a single
//! two-dimensional goods block (substitutes, complements). Each block is drawn
//! by rejection against an envelope read off a probe lattice, with a
//! Metropolis fallback when rejection stalls. Power-law blocks additionally
//! have an exact Beta proposal. Price-sensitive agents veto the drawn outcome
//! when its implied price falls outside their band; a vetoed encounter is a
//! no-trade, so the band acts as an acceptance test on the unconstrained draw.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::holdings::{Holdings, MAX_GOODS};
use super::utility::{
    band_admits_price, implied_price, pow, satiation, BandRule, Comparison, EncounterContext,
    UtilitySpec,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerPolicy {
    /// Rejection proposals per block before switching to Metropolis.
    pub max_tries: u32,
    /// Metropolis steps in the fallback chain.
    pub metropolis_steps: u32,
    /// Probe points per axis used to estimate the rejection envelope.
    pub probe_lattice: usize,
    /// Multiplier applied to the probed maximum.
    pub safety_factor: f64,
    /// Relative margin removed from each end of an axis whose density diverges there.
    pub boundary_shave: f64,
    /// Use the exact Beta proposal for power-law blocks.
    pub exact_power_blocks: bool,
    /// Goods changes smaller than this have no defined price and are vetoed.
    pub min_price_step: f64,
}

impl Default for SamplerPolicy {
    fn default() -> Self {
        SamplerPolicy {
            max_tries: 200,
            metropolis_steps: 50,
            probe_lattice: 16,
            safety_factor: 2.0,
            boundary_shave: 1e-6,
            exact_power_blocks: true,
            min_price_step: 1e-12,
        }
    }
}

impl SamplerPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_tries == 0 || self.probe_lattice < 2 || !(self.safety_factor >= 1.0) {
            return Err(Error::Config(vec![format!(
                "sampler policy needs max_tries > 0, probe_lattice >= 2, safety_factor >= 1 (got {self:?})"
            )]));
        }
        if !(0.0..0.5).contains(&self.boundary_shave) {
            return Err(Error::Config(vec![format!(
                "boundary_shave must be in [0, 0.5), got {}",
                self.boundary_shave
            )]));
        }
        Ok(())
    }
}

/// Counters accumulated over encounters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerStats {
    pub encounters: u64,
    pub trades: u64,
    pub no_trades: u64,
    /// Draws rejected by a price band.
    pub vetoes: u64,
    pub rejections: u64,
    pub metropolis_fallbacks: u64,
    /// Metropolis chains that ended on a zero-density point.
    pub metropolis_stalls: u64,
    /// Proposals whose density exceeded the probed envelope.
    pub envelope_violations: u64,
    /// Encounters abandoned because a utility could not be evaluated.
    pub errors: u64,
}

impl SamplerStats {
    pub fn merge(&mut self, other: &SamplerStats) {
        self.encounters += other.encounters;
        self.trades += other.trades;
        self.no_trades += other.no_trades;
        self.vetoes += other.vetoes;
        self.rejections += other.rejections;
        self.metropolis_fallbacks += other.metropolis_fallbacks;
        self.metropolis_stalls += other.metropolis_stalls;
        self.envelope_violations += other.envelope_violations;
        self.errors += other.errors;
    }

    /// Counts accumulated after the snapshot `earlier` was taken.
    pub fn since(&self, earlier: &SamplerStats) -> SamplerStats {
        SamplerStats {
            encounters: self.encounters - earlier.encounters,
            trades: self.trades - earlier.trades,
            no_trades: self.no_trades - earlier.no_trades,
            vetoes: self.vetoes - earlier.vetoes,
            rejections: self.rejections - earlier.rejections,
            metropolis_fallbacks: self.metropolis_fallbacks - earlier.metropolis_fallbacks,
            metropolis_stalls: self.metropolis_stalls - earlier.metropolis_stalls,
            envelope_violations: self.envelope_violations - earlier.envelope_violations,
            errors: self.errors - earlier.errors,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Outcome {
    Trade(Holdings, Holdings),
    NoTrade,
}

/// Exact split of `total` between two power-law agents: `x_i / total` has
/// density proportional to `t^(eta_i-1) (1-t)^(eta_j-1)`.
pub fn sample_cd_split<R: Rng + ?Sized>(eta_i: f64, eta_j: f64, total: f64, rng: &mut R) -> (f64, f64) {
    if total <= 0.0 {
        return (0.0, 0.0);
    }
    exact_split(total, beta(eta_i, eta_j, rng) * total)
}

/// Split `total` into `(x, total - x)` so that the two parts add back to
/// `total` exactly in floating point. Subtracting a part no smaller than
/// `total / 2` is exact, so the larger part is computed first.
#[inline]
pub(crate) fn exact_split(total: f64, x: f64) -> (f64, f64) {
    let x = x.clamp(0.0, total);
    if x >= 0.5 * total {
        (x, total - x)
    } else {
        let y = total - x;
        (total - y, y)
    }
}

#[inline]
fn beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let ga = Gamma::new(a, 1.0).expect("positive shape");
    let gb = Gamma::new(b, 1.0).expect("positive shape");
    loop {
        let x = ga.sample(rng);
        let y = gb.sample(rng);
        let t = x / (x + y);
        if t.is_finite() {
            return t;
        }
    }
}

/// Bounded multiplicative correction on top of a power-law factor.
#[derive(Clone, Copy, Debug)]
enum Residual {
    One,
    Satiable { c: f64, k: f64 },
    Compare { cmp: Comparison, offset: f64 },
}

impl Residual {
    #[inline]
    fn eval(&self, x: f64) -> f64 {
        match *self {
            Residual::One => 1.0,
            Residual::Satiable { c, k } => satiation(x, c, k),
            Residual::Compare { cmp, offset } => cmp.eval(x - offset),
        }
    }
}

/// One-dimensional factor `(shift + x)^(exponent-1) exp(tilt x) r(x)`.
#[derive(Clone, Copy, Debug)]
struct Factor {
    exponent: f64,
    shift: f64,
    tilt: f64,
    residual: Residual,
}

impl Factor {
    const UNIT: Factor = Factor::power(1.0);

    const fn power(exponent: f64) -> Factor {
        Factor {
            exponent,
            shift: 0.0,
            tilt: 0.0,
            residual: Residual::One,
        }
    }

    const fn shifted(exponent: f64, shift: f64) -> Factor {
        Factor {
            exponent,
            shift,
            tilt: 0.0,
            residual: Residual::One,
        }
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        let mut v = pow(self.shift + x, self.exponent);
        if self.tilt != 0.0 {
            v *= (self.tilt * x).exp();
        }
        v * self.residual.eval(x)
    }

    fn diverges_at_zero(&self) -> bool {
        self.exponent < 1.0 && self.shift == 0.0
    }
}

#[derive(Clone, Copy, Debug)]
enum GoodsForm {
    Separable([Factor; MAX_GOODS]),
    Sum { alpha: f64 },
    Min { alpha: f64 },
}

impl GoodsForm {
    #[inline]
    fn eval(&self, g: [f64; 2]) -> f64 {
        match *self {
            GoodsForm::Separable(f) => f[0].eval(g[0]) * f[1].eval(g[1]),
            GoodsForm::Sum { alpha } => pow(g[0] + g[1], alpha),
            GoodsForm::Min { alpha } => pow(g[0].min(g[1]), alpha),
        }
    }

    fn diverges_at_zero(&self) -> bool {
        match *self {
            GoodsForm::Separable(f) => f.iter().any(Factor::diverges_at_zero),
            GoodsForm::Sum { alpha } | GoodsForm::Min { alpha } => alpha < 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Factors {
    money: Factor,
    goods: GoodsForm,
    band: Option<(f64, f64, BandRule)>,
}

fn factors(spec: &UtilitySpec, ctx: &EncounterContext) -> Result<Factors> {
    let money = Factor::power(spec.eta());
    let f = match *spec {
        UtilitySpec::CobbDouglas { ref alphas, .. } => {
            let mut g = [Factor::UNIT; MAX_GOODS];
            for (slot, &a) in g.iter_mut().zip(alphas) {
                *slot = Factor::power(a);
            }
            Factors {
                money,
                goods: GoodsForm::Separable(g),
                band: None,
            }
        }
        UtilitySpec::Substitutes { alpha, .. } => Factors {
            money,
            goods: GoodsForm::Sum { alpha },
            band: None,
        },
        UtilitySpec::Complements { alpha, .. } => Factors {
            money,
            goods: GoodsForm::Min { alpha },
            band: None,
        },
        UtilitySpec::Satiable { alpha, c, k, .. } => Factors {
            money,
            goods: GoodsForm::Separable([
                Factor {
                    residual: Residual::Satiable { c, k },
                    ..Factor::UNIT
                },
                Factor::power(alpha),
            ]),
            band: None,
        },
        UtilitySpec::PriceBandSeparable {
            alpha, mu1, mu2, rule, ..
        } => Factors {
            money,
            goods: GoodsForm::Separable([Factor::power(alpha), Factor::UNIT]),
            band: Some((mu1, mu2, rule)),
        },
        UtilitySpec::PriceBandAggregate {
            eta,
            alpha,
            mu1,
            mu2,
            rule,
        } => Factors {
            money: Factor::shifted(eta, ctx.current.money),
            goods: GoodsForm::Separable([
                Factor::shifted(alpha, ctx.current.goods[0]),
                Factor::UNIT,
            ]),
            band: Some((mu1, mu2, rule)),
        },
        UtilitySpec::Interdependent {
            alpha, comparison, ..
        } => {
            let gn = ctx.neighbourhood_mean.ok_or_else(|| {
                Error::InvalidUtility("interdependent utility needs a neighbourhood mean".into())
            })?;
            let good = match comparison {
                // e^(g - g_n) = e^g times a constant of the encounter
                Comparison::Exp => Factor {
                    tilt: 1.0,
                    ..Factor::power(alpha)
                },
                cmp @ Comparison::Sigmoid { .. } => Factor {
                    residual: Residual::Compare { cmp, offset: gn },
                    ..Factor::power(alpha)
                },
            };
            Factors {
                money,
                goods: GoodsForm::Separable([good, Factor::UNIT]),
                band: None,
            }
        }
    };
    Ok(f)
}

/// Draw the outcome of an encounter between agents `i` and `j`.
///
/// Conditional on a trade, the outcome has density proportional to
/// `u_i(outcome_i) u_j(outcome_j)` over the box `[0, pooled]`, with
/// `outcome_j = pooled - outcome_i` component-wise.
pub fn sample_outcome_general<R: Rng + ?Sized>(
    spec_i: &UtilitySpec,
    ctx_i: &EncounterContext,
    spec_j: &UtilitySpec,
    ctx_j: &EncounterContext,
    rng: &mut R,
    policy: &SamplerPolicy,
    stats: &mut SamplerStats,
) -> Result<Outcome> {
    let n_goods = spec_i.goods_count();
    if spec_j.goods_count() != n_goods {
        return Err(Error::DimensionMismatch(format!(
            "agents trade {} and {} goods",
            n_goods,
            spec_j.goods_count()
        )));
    }
    stats.encounters += 1;
    let fi = factors(spec_i, ctx_i)?;
    let fj = factors(spec_j, ctx_j)?;
    let pooled = ctx_i.current.add(&ctx_j.current);
    let mut out_i = Holdings::zero();

    let Some(m) = sample_block_1d(
        &fi.money,
        &fj.money,
        pooled.money,
        ctx_i.current.money,
        rng,
        policy,
        stats,
    ) else {
        stats.no_trades += 1;
        return Ok(Outcome::NoTrade);
    };
    out_i.money = m;

    match (fi.goods, fj.goods) {
        (GoodsForm::Separable(gi), GoodsForm::Separable(gj)) => {
            for k in 0..n_goods {
                let Some(x) = sample_block_1d(
                    &gi[k],
                    &gj[k],
                    pooled.goods[k],
                    ctx_i.current.goods[k],
                    rng,
                    policy,
                    stats,
                ) else {
                    stats.no_trades += 1;
                    return Ok(Outcome::NoTrade);
                };
                out_i.goods[k] = x;
            }
        }
        (gi, gj) => {
            debug_assert_eq!(n_goods, 2);
            let Some(x) = sample_block_2d(
                &gi,
                &gj,
                pooled.goods,
                ctx_i.current.goods,
                rng,
                policy,
                stats,
            ) else {
                stats.no_trades += 1;
                return Ok(Outcome::NoTrade);
            };
            out_i.goods = x;
        }
    }

    let mut out_j = Holdings::zero();
    (out_i.money, out_j.money) = exact_split(pooled.money, out_i.money);
    for k in 0..n_goods {
        (out_i.goods[k], out_j.goods[k]) = exact_split(pooled.goods[k], out_i.goods[k]);
    }

    if fi.band.is_some() || fj.band.is_some() {
        let admitted = match implied_price(&ctx_i.current, &out_i, policy.min_price_step) {
            None => false,
            Some((price, i_sells)) => {
                fi.band
                    .is_none_or(|(a, b, r)| band_admits_price(price, i_sells, a, b, r))
                    && fj
                        .band
                        .is_none_or(|(a, b, r)| band_admits_price(price, !i_sells, a, b, r))
            }
        };
        if !admitted {
            stats.vetoes += 1;
            stats.no_trades += 1;
            return Ok(Outcome::NoTrade);
        }
    }

    stats.trades += 1;
    Ok(Outcome::Trade(out_i, out_j))
}

/// Interval `[lo, hi]` of an axis with the margins of divergent ends removed.
#[inline]
fn shaved(total: f64, low_diverges: bool, high_diverges: bool, shave: f64) -> (f64, f64) {
    let lo = if low_diverges { shave * total } else { 0.0 };
    let hi = if high_diverges { total - shave * total } else { total };
    (lo, hi)
}

#[inline]
fn probe(lo: f64, hi: f64, k: usize, n: usize) -> f64 {
    lo + (k as f64 + 0.5) / n as f64 * (hi - lo)
}

fn sample_block_1d<R: Rng + ?Sized>(
    fi: &Factor,
    fj: &Factor,
    total: f64,
    start: f64,
    rng: &mut R,
    policy: &SamplerPolicy,
    stats: &mut SamplerStats,
) -> Option<f64> {
    if total <= 0.0 {
        return Some(0.0);
    }
    let density = |x: f64| fi.eval(x) * fj.eval(total - x);

    if policy.exact_power_blocks {
        if let Some(x) = beta_proposal_1d(fi, fj, total, rng, policy, stats) {
            return Some(x);
        }
    } else if let Some(x) = uniform_rejection_1d(fi, fj, total, &density, rng, policy, stats) {
        return Some(x);
    }

    stats.metropolis_fallbacks += 1;
    let (lo, hi) = shaved(
        total,
        fi.diverges_at_zero(),
        fj.diverges_at_zero(),
        policy.boundary_shave,
    );
    let mut x = start.clamp(lo, hi);
    let mut dx = finite_or_zero(density(x));
    for _ in 0..policy.metropolis_steps {
        let y = rng.random_range(lo..=hi);
        let dy = finite_or_zero(density(y));
        if dy > 0.0 && (dx <= 0.0 || rng.random::<f64>() * dx < dy) {
            x = y;
            dx = dy;
        }
    }
    if dx > 0.0 {
        Some(x)
    } else {
        stats.metropolis_stalls += 1;
        None
    }
}

#[inline]
fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Rejection with the power-law part as an exact proposal.
///
/// With shifts `s_i, s_j`, `y = s_i + x` has density
/// `y^(e_i-1) (S - y)^(e_j-1)` on the window `[s_i, s_i + total]` where
/// `S = s_i + s_j + total`, i.e. a scaled Beta restricted to the window. The
/// exponential tilts and bounded residuals are handled by an acceptance step.
fn beta_proposal_1d<R: Rng + ?Sized>(
    fi: &Factor,
    fj: &Factor,
    total: f64,
    rng: &mut R,
    policy: &SamplerPolicy,
    stats: &mut SamplerStats,
) -> Option<f64> {
    let span = fi.shift + fj.shift + total;
    let c = fi.tilt - fj.tilt;
    let c_max = (c * total).max(0.0);
    let plain = matches!(fi.residual, Residual::One) && matches!(fj.residual, Residual::One);
    let ratio = |x: f64| (c * x - c_max).exp() * fi.residual.eval(x) * fj.residual.eval(total - x);

    let envelope = if plain {
        1.0
    } else {
        let n = policy.probe_lattice;
        let top = (0..n)
            .map(|k| ratio(probe(0.0, total, k, n)))
            .fold(0.0, f64::max);
        top * policy.safety_factor
    };
    if !(envelope > 0.0 && envelope.is_finite()) {
        return None;
    }

    let ga = Gamma::new(fi.exponent, 1.0).expect("positive shape");
    let gb = Gamma::new(fj.exponent, 1.0).expect("positive shape");
    for _ in 0..policy.max_tries {
        let a = ga.sample(rng);
        let b = gb.sample(rng);
        let t = a / (a + b);
        if !t.is_finite() {
            continue;
        }
        let x = t * span - fi.shift;
        if !(0.0..=total).contains(&x) {
            stats.rejections += 1;
            continue;
        }
        if plain && c == 0.0 {
            return Some(x);
        }
        let w = ratio(x) / envelope;
        if w > 1.0 {
            stats.envelope_violations += 1;
        }
        if rng.random::<f64>() < w {
            return Some(x);
        }
        stats.rejections += 1;
    }
    None
}

fn uniform_rejection_1d<R: Rng + ?Sized, D: Fn(f64) -> f64>(
    fi: &Factor,
    fj: &Factor,
    total: f64,
    density: &D,
    rng: &mut R,
    policy: &SamplerPolicy,
    stats: &mut SamplerStats,
) -> Option<f64> {
    let (lo, hi) = shaved(
        total,
        fi.diverges_at_zero(),
        fj.diverges_at_zero(),
        policy.boundary_shave,
    );
    let n = policy.probe_lattice;
    let top = (0..n)
        .map(|k| density(probe(lo, hi, k, n)))
        .fold(0.0, f64::max);
    let envelope = top * policy.safety_factor;
    if !(envelope > 0.0 && envelope.is_finite()) {
        return None;
    }
    for _ in 0..policy.max_tries {
        let x = rng.random::<f64>() * total;
        if x < lo || x > hi {
            stats.rejections += 1;
            continue;
        }
        let w = density(x) / envelope;
        if w > 1.0 {
            stats.envelope_violations += 1;
        }
        if rng.random::<f64>() < w {
            return Some(x);
        }
        stats.rejections += 1;
    }
    None
}

fn sample_block_2d<R: Rng + ?Sized>(
    gi: &GoodsForm,
    gj: &GoodsForm,
    totals: [f64; 2],
    start: [f64; 2],
    rng: &mut R,
    policy: &SamplerPolicy,
    stats: &mut SamplerStats,
) -> Option<[f64; 2]> {
    let density = |x: [f64; 2]| gi.eval(x) * gj.eval([totals[0] - x[0], totals[1] - x[1]]);
    let (lo_i, hi_i) = (gi.diverges_at_zero(), gj.diverges_at_zero());
    let box_ = [
        shaved(totals[0], lo_i, hi_i, policy.boundary_shave),
        shaved(totals[1], lo_i, hi_i, policy.boundary_shave),
    ];
    let n = policy.probe_lattice;
    let mut top = 0.0f64;
    for a in 0..n {
        let x0 = probe(box_[0].0, box_[0].1, a, n);
        for b in 0..n {
            let x1 = probe(box_[1].0, box_[1].1, b, n);
            top = top.max(density([x0, x1]));
        }
    }
    let envelope = top * policy.safety_factor;
    if envelope > 0.0 && envelope.is_finite() {
        for _ in 0..policy.max_tries {
            let x = [rng.random::<f64>() * totals[0], rng.random::<f64>() * totals[1]];
            if (0..2).any(|k| x[k] < box_[k].0 || x[k] > box_[k].1) {
                stats.rejections += 1;
                continue;
            }
            let w = density(x) / envelope;
            if w > 1.0 {
                stats.envelope_violations += 1;
            }
            if rng.random::<f64>() < w {
                return Some(x);
            }
            stats.rejections += 1;
        }
    }

    stats.metropolis_fallbacks += 1;
    let mut x = [
        start[0].clamp(box_[0].0, box_[0].1),
        start[1].clamp(box_[1].0, box_[1].1),
    ];
    let mut dx = finite_or_zero(density(x));
    for _ in 0..policy.metropolis_steps {
        let y = [
            rng.random_range(box_[0].0..=box_[0].1),
            rng.random_range(box_[1].0..=box_[1].1),
        ];
        let dy = finite_or_zero(density(y));
        if dy > 0.0 && (dx <= 0.0 || rng.random::<f64>() * dx < dy) {
            x = y;
            dx = dy;
        }
    }
    if dx > 0.0 {
        Some(x)
    } else {
        stats.metropolis_stalls += 1;
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx(m: f64, g: &[f64]) -> EncounterContext {
        EncounterContext::new(Holdings::new(m, g).unwrap())
    }

    #[test]
    fn zero_total_splits_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_cd_split(3.0, 2.0, 0.0, &mut rng), (0.0, 0.0));
    }

    #[test]
    fn cd_split_mean_matches_beta_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_cd_split(3.0, 2.0, 10.0, &mut rng).0)
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        // Beta(3,2) on [0,10]: mean 6, variance 100 * 6 / (25 * 6) = 4
        let se = (4.0f64 / n as f64).sqrt();
        assert!((mean - 6.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn split_conserves_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let total = rng.random::<f64>() * 100.0;
            let (a, b) = sample_cd_split(0.7, 2.5, total, &mut rng);
            assert!(a >= 0.0 && b >= 0.0);
            assert_eq!(a + b, total);
        }
    }

    #[test]
    fn complements_pair_stays_in_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = UtilitySpec::Complements { eta: 3.0, alpha: 3.0 };
        let c1 = ctx(1.0, &[2.0, 0.5]);
        let c2 = ctx(0.5, &[0.1, 1.5]);
        let mut stats = SamplerStats::default();
        for _ in 0..2000 {
            match sample_outcome_general(&s, &c1, &s, &c2, &mut rng, &SamplerPolicy::default(), &mut stats).unwrap() {
                Outcome::Trade(a, b) => {
                    assert!(a.is_non_negative() && b.is_non_negative());
                    assert!((a.goods[0] + b.goods[0] - 2.1).abs() < 1e-12);
                    assert!((a.goods[1] + b.goods[1] - 2.0).abs() < 1e-12);
                }
                Outcome::NoTrade => panic!("complements always have support"),
            }
        }
        assert_eq!(stats.metropolis_stalls, 0);
    }

    #[test]
    fn satiable_pair_without_room_does_not_trade() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = UtilitySpec::Satiable {
            eta: 3.0,
            alpha: 3.0,
            c: 0.3,
            k: 0.6,
        };
        // pooled good 1 is 0.5 < 2c: no outcome gives both agents more than c
        let c1 = ctx(1.0, &[0.25, 1.0]);
        let c2 = ctx(1.0, &[0.25, 1.0]);
        let mut stats = SamplerStats::default();
        let out =
            sample_outcome_general(&s, &c1, &s, &c2, &mut rng, &SamplerPolicy::default(), &mut stats).unwrap();
        assert_eq!(out, Outcome::NoTrade);
    }

    #[test]
    fn satiable_pair_outcomes_respect_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = UtilitySpec::Satiable {
            eta: 3.0,
            alpha: 3.0,
            c: 0.3,
            k: 0.6,
        };
        let c1 = ctx(1.0, &[0.5, 1.0]);
        let c2 = ctx(1.0, &[0.9, 1.0]);
        let mut stats = SamplerStats::default();
        for _ in 0..2000 {
            if let Outcome::Trade(a, b) =
                sample_outcome_general(&s, &c1, &s, &c2, &mut rng, &SamplerPolicy::default(), &mut stats).unwrap()
            {
                assert!(a.goods[0] > 0.3 && b.goods[0] > 0.3);
            }
        }
        assert!(stats.trades > 1900);
    }

    #[test]
    fn empty_agent_never_sells() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = UtilitySpec::PriceBandSeparable {
            eta: 3.0,
            alpha: 3.0,
            mu1: 0.9,
            mu2: 1.1,
            rule: BandRule::Bilateral,
        };
        let broke = ctx(0.0, &[0.0]);
        let rich = ctx(2.0, &[2.0]);
        let mut stats = SamplerStats::default();
        for _ in 0..5000 {
            if let Outcome::Trade(..) =
                sample_outcome_general(&s, &broke, &s, &rich, &mut rng, &SamplerPolicy::default(), &mut stats).unwrap()
            {
                panic!("an agent with nothing can only receive at a non-positive price");
            }
        }
    }

    #[test]
    fn disjoint_seller_buyer_bands_block_one_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let low = UtilitySpec::PriceBandSeparable {
            eta: 3.0,
            alpha: 3.0,
            mu1: 0.5,
            mu2: 0.6,
            rule: BandRule::SellerBuyer,
        };
        let high = UtilitySpec::PriceBandSeparable {
            eta: 3.0,
            alpha: 3.0,
            mu1: 0.8,
            mu2: 0.9,
            rule: BandRule::SellerBuyer,
        };
        let ci = ctx(1.0, &[1.0]);
        let cj = ctx(1.0, &[1.0]);
        let mut stats = SamplerStats::default();
        let mut low_sold = 0;
        for _ in 0..20_000 {
            if let Outcome::Trade(a, _) =
                sample_outcome_general(&low, &ci, &high, &cj, &mut rng, &SamplerPolicy::default(), &mut stats).unwrap()
            {
                // the high-threshold agent never sells to the low-threshold one
                assert!(a.goods[0] < 1.0);
                let price = (a.money - 1.0) / (1.0 - a.goods[0]);
                assert!((0.5..=0.9).contains(&price));
                low_sold += 1;
            }
        }
        assert!(low_sold > 0);
    }

    #[test]
    fn bands_on_the_same_side_are_symmetric_under_bilateral_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = UtilitySpec::PriceBandSeparable {
            eta: 3.0,
            alpha: 3.0,
            mu1: 0.9,
            mu2: 1.1,
            rule: BandRule::Bilateral,
        };
        let c = ctx(1.0, &[1.0]);
        let mut stats = SamplerStats::default();
        let (mut sells, mut buys) = (0, 0);
        for _ in 0..50_000 {
            if let Outcome::Trade(a, _) =
                sample_outcome_general(&s, &c, &s, &c, &mut rng, &SamplerPolicy::default(), &mut stats).unwrap()
            {
                let price = (a.money - 1.0) / (1.0 - a.goods[0]);
                assert!((0.9..=1.1).contains(&price));
                if a.goods[0] < 1.0 {
                    sells += 1;
                } else {
                    buys += 1;
                }
            }
        }
        assert!(sells > 100 && buys > 100);
        assert_eq!(stats.vetoes + stats.trades, stats.encounters);
    }

    #[test]
    fn tilted_factor_uses_exact_proposal() {
        // x^2 e^x against (T-x): handled by the tilt acceptance, no fallbacks
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = UtilitySpec::Interdependent {
            eta: 3.0,
            alpha: 3.0,
            comparison: Comparison::Exp,
        };
        let b = UtilitySpec::cobb_douglas(2.0, &[2.0]);
        let mut ca = ctx(1.0, &[1.0]);
        ca.neighbourhood_mean = Some(1.0);
        let cb = ctx(1.0, &[1.0]);
        let mut stats = SamplerStats::default();
        for _ in 0..5000 {
            sample_outcome_general(&a, &ca, &b, &cb, &mut rng, &SamplerPolicy::default(), &mut stats).unwrap();
        }
        assert_eq!(stats.metropolis_fallbacks, 0);
        assert_eq!(stats.envelope_violations, 0);
        assert_eq!(stats.trades, 5000);
    }

    #[test]
    fn missing_neighbourhood_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = UtilitySpec::Interdependent {
            eta: 3.0,
            alpha: 3.0,
            comparison: Comparison::Exp,
        };
        let c = ctx(1.0, &[1.0]);
        let mut stats = SamplerStats::default();
        assert!(sample_outcome_general(&a, &c, &a, &c, &mut rng, &SamplerPolicy::default(), &mut stats).is_err());
    }
}
