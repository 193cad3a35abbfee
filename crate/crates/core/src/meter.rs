//! Cobb–Douglas meter: a small reference economy coupled to a test economy.
//!
//! Meter agents trade with each other and with test-economy agents. Whatever
//! the test economy loses to (or gains from) the meter is immediately made
//! good from an external reserve, so the test economy's totals never move. At
//! equilibrium the meter's values of money and goods equal the test
//! economy's, and for a CD meter they are read off as `eta / m_bar` and
//! `alpha_j / g_bar_j`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::economy::{
    sample_cd_split, sample_outcome_general, EncounterContext, Economy, Holdings, Outcome, SamplerPolicy,
    SamplerStats, UtilitySpec,
};
use crate::error::{Error, Result};

/// Number of batches used for batch-means standard errors.
pub const N_BATCHES: usize = 10;

/// Half-to-half drift, in pooled standard errors, that marks a reading as not equilibrated.
pub const EQUILIBRATION_Z: f64 = 5.0;

/// Relative drift of test-economy totals tolerated at a sample instant.
pub const TOTALS_TOLERANCE: f64 = 1e-9;

/// Initial holdings of every meter agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeterStart {
    Fixed { money: f64, goods: f64 },
    /// Per-capita economy holdings scaled by the ratio of meter exponent to
    /// mean economy exponent, commodity by commodity: the meter's equilibrium
    /// when the economy is Cobb–Douglas, and a warm start otherwise.
    Matched,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeterSpec {
    pub n_agents: usize,
    pub eta: f64,
    /// One exponent per good.
    pub alphas: Vec<f64>,
    pub initial: MeterStart,
}

impl Default for MeterSpec {
    fn default() -> Self {
        MeterSpec {
            n_agents: 100,
            eta: 2.0,
            alphas: vec![2.0, 2.0],
            initial: MeterStart::Fixed { money: 1.0, goods: 1.0 },
        }
    }
}

impl MeterSpec {
    /// Default meter for an economy with `n_goods` goods.
    pub fn for_goods(n_goods: usize) -> Self {
        MeterSpec {
            alphas: vec![2.0; n_goods],
            ..MeterSpec::default()
        }
    }

    pub fn utility(&self) -> UtilitySpec {
        UtilitySpec::cobb_douglas(self.eta, &self.alphas)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_agents < 2 {
            problems.push(format!("meter needs at least 2 agents, got {}", self.n_agents));
        }
        if let Err(e) = self.utility().validate() {
            problems.push(format!("meter: {e}"));
        }
        if let MeterStart::Fixed { money, goods } = self.initial {
            for (name, v) in [("money", money), ("goods", goods)] {
                if !(v.is_finite() && v > 0.0) {
                    problems.push(format!("meter initial {name} must be > 0, got {v}"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Which economy agent the reserve makes good after a meter trade.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReserveTarget {
    /// The agent that traded with the meter is restored to its pre-trade
    /// holdings; the economy is left exactly as it was.
    #[default]
    TradingAgent,
    /// A uniformly random agent is credited (or debited) the net flow.
    RandomAgent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementProtocol {
    pub burn_in_sweeps: u64,
    pub n_samples: usize,
    pub sample_stride_sweeps: u64,
    /// Fraction of encounters that pair a meter agent with an economy agent.
    pub cross_rate: f64,
    #[serde(default)]
    pub reserve: ReserveTarget,
}

impl Default for MeasurementProtocol {
    fn default() -> Self {
        MeasurementProtocol {
            burn_in_sweeps: 500,
            n_samples: 200,
            sample_stride_sweeps: 5,
            cross_rate: 0.2,
            reserve: ReserveTarget::TradingAgent,
        }
    }
}

impl MeasurementProtocol {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.burn_in_sweeps == 0 {
            problems.push("burn_in_sweeps must be positive".to_string());
        }
        if self.n_samples < 2 * N_BATCHES {
            problems.push(format!(
                "n_samples must be at least {} for batch-means errors, got {}",
                2 * N_BATCHES,
                self.n_samples
            ));
        }
        if self.sample_stride_sweeps == 0 {
            problems.push("sample_stride_sweeps must be positive".to_string());
        }
        if !(self.cross_rate > 0.0 && self.cross_rate < 1.0) {
            problems.push(format!("cross_rate must lie in (0, 1), got {}", self.cross_rate));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Values of money and goods measured at one macro-state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeterReading {
    pub beta: f64,
    pub nu: Vec<f64>,
    pub se_beta: f64,
    pub se_nu: Vec<f64>,
    /// Test-economy totals `(M, G1[, G2])`.
    pub macro_state: Holdings,
    pub n_samples: usize,
    /// First and second halves of the run disagree: probably not equilibrated.
    pub flagged: bool,
    /// Encounter counters of the test economy over the whole measurement.
    pub stats: SamplerStats,
}

impl MeterReading {
    /// Economic temperature `1 / beta`.
    pub fn temperature(&self) -> f64 {
        1.0 / self.beta
    }

    /// Market prices `nu_j / beta`.
    pub fn prices(&self) -> Vec<f64> {
        self.nu.iter().map(|n| n / self.beta).collect()
    }
}

/// A test economy with a meter attached.
#[derive(Clone, Debug)]
pub struct CoupledSystem {
    economy: Economy,
    meter: Vec<Holdings>,
    spec: MeterSpec,
    meter_utility: UtilitySpec,
    reference_totals: Holdings,
    reserve_debits_split: u64,
}

pub fn attach_meter(economy: Economy, spec: &MeterSpec) -> Result<CoupledSystem> {
    spec.validate()?;
    if spec.alphas.len() != economy.n_goods() {
        return Err(Error::DimensionMismatch(format!(
            "meter trades {} goods, economy trades {}",
            spec.alphas.len(),
            economy.n_goods()
        )));
    }
    let reference_totals = economy.summed_totals();
    let h = match spec.initial {
        MeterStart::Fixed { money, goods } => Holdings::new(money, &vec![goods; spec.alphas.len()])?,
        MeterStart::Matched => {
            let n = economy.n_agents() as f64;
            let mut eta = 0.0;
            let mut alpha = [0.0; crate::economy::MAX_GOODS];
            for i in 0..economy.n_agents() {
                let s = economy.spec(i);
                eta += s.eta() / n;
                for (a, e) in alpha.iter_mut().zip(s.goods_exponents()) {
                    *a += e / n;
                }
            }
            let mut h = Holdings::zero();
            h.money = reference_totals.money / n * spec.eta / eta;
            for (k, a) in spec.alphas.iter().enumerate() {
                h.goods[k] = reference_totals.goods[k] / n * a / alpha[k];
            }
            h.check(spec.alphas.len())?;
            h
        }
    };
    Ok(CoupledSystem {
        meter: vec![h; spec.n_agents],
        meter_utility: spec.utility(),
        spec: spec.clone(),
        economy,
        reference_totals,
        reserve_debits_split: 0,
    })
}

impl CoupledSystem {
    pub fn economy(&self) -> &Economy {
        &self.economy
    }

    pub fn meter_holdings(&self) -> &[Holdings] {
        &self.meter
    }

    pub fn meter_spec(&self) -> &MeterSpec {
        &self.spec
    }

    /// Totals of test economy and meter together.
    pub fn coupled_totals(&self) -> Holdings {
        self.meter
            .iter()
            .fold(self.economy.summed_totals(), |t, h| t.add(h))
    }

    /// Debits that had to be spread over many agents because no single
    /// randomly drawn agent could cover them.
    pub fn reserve_debits_split(&self) -> u64 {
        self.reserve_debits_split
    }

    /// Remove the meter, returning the test economy and the meter's holdings.
    pub fn detach(self) -> (Economy, Vec<Holdings>) {
        (self.economy, self.meter)
    }

    /// One encounter of the coupled system.
    pub fn step<R: Rng + ?Sized>(&mut self, protocol: &MeasurementProtocol, rng: &mut R, policy: &SamplerPolicy) -> Result<()> {
        let n_e = self.economy.n_agents();
        let n_m = self.meter.len();
        if rng.random::<f64>() < protocol.cross_rate {
            let (e, m) = (rng.random_range(0..n_e), rng.random_range(0..n_m));
            self.cross_encounter(e, m, protocol.reserve, rng, policy)
        } else if rng.random_range(0..n_e + n_m) < n_e {
            let (i, j) = self.economy.graph().sample_edge(rng);
            self.economy.encounter_unchecked(i, j, rng, policy);
            Ok(())
        } else {
            self.meter_encounter(rng);
            Ok(())
        }
    }

    /// `N_economy + N_meter` encounters.
    pub fn sweep<R: Rng + ?Sized>(&mut self, protocol: &MeasurementProtocol, rng: &mut R, policy: &SamplerPolicy) -> Result<()> {
        for _ in 0..self.economy.n_agents() + self.meter.len() {
            self.step(protocol, rng, policy)?;
        }
        Ok(())
    }

    fn meter_encounter<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.meter.len();
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let (ha, hb) = (self.meter[a], self.meter[b]);
        let (ma, mb) = sample_cd_split(self.spec.eta, self.spec.eta, ha.money + hb.money, rng);
        self.meter[a].money = ma;
        self.meter[b].money = mb;
        for (k, &alpha) in self.spec.alphas.iter().enumerate() {
            let (ga, gb) = sample_cd_split(alpha, alpha, ha.goods[k] + hb.goods[k], rng);
            self.meter[a].goods[k] = ga;
            self.meter[b].goods[k] = gb;
        }
    }

    fn cross_encounter<R: Rng + ?Sized>(
        &mut self,
        e: usize,
        m: usize,
        reserve: ReserveTarget,
        rng: &mut R,
        policy: &SamplerPolicy,
    ) -> Result<()> {
        let ce = self.economy.context(e);
        let cm = EncounterContext::new(self.meter[m]);
        let mut scratch = SamplerStats::default();
        let outcome = sample_outcome_general(
            self.economy.spec(e),
            &ce,
            &self.meter_utility,
            &cm,
            rng,
            policy,
            &mut scratch,
        );
        let (new_e, new_m) = match outcome {
            Ok(Outcome::Trade(a, b)) => (a, b),
            Ok(Outcome::NoTrade) | Err(_) => return Ok(()),
        };
        self.meter[m] = new_m;
        match reserve {
            // the economy agent keeps its pre-trade holdings
            ReserveTarget::TradingAgent => Ok(()),
            ReserveTarget::RandomAgent => {
                self.economy.holdings_mut()[e] = new_e;
                self.reserve_offset(&new_e.sub(&ce.current), rng)
            }
        }
    }

    /// Undo the test economy's net change `gained` from the reserve: a loss is
    /// credited to a random agent, a gain debited from a random agent that can
    /// cover it.
    pub fn reserve_offset<R: Rng + ?Sized>(&mut self, gained: &Holdings, rng: &mut R) -> Result<()> {
        let n_goods = self.economy.n_goods();
        let holdings = self.economy.holdings_mut();
        let n = holdings.len();
        for c in 0..=n_goods {
            let d = gained.get(c);
            if d == 0.0 {
                continue;
            }
            if d < 0.0 {
                let k = rng.random_range(0..n);
                holdings[k].set(c, holdings[k].get(c) - d);
                continue;
            }
            let mut done = false;
            for _ in 0..n {
                let k = rng.random_range(0..n);
                let have = holdings[k].get(c);
                if have >= d {
                    holdings[k].set(c, have - d);
                    done = true;
                    break;
                }
            }
            if done {
                continue;
            }
            let available: f64 = holdings.iter().map(|h| h.get(c)).sum();
            if available < d {
                return Err(Error::Protocol(format!(
                    "economy holds {available} of commodity {c}, cannot absorb a debit of {d}"
                )));
            }
            let keep = 1.0 - d / available;
            for h in holdings.iter_mut() {
                h.set(c, h.get(c) * keep);
            }
            self.reserve_debits_split += 1;
        }
        Ok(())
    }

    fn check_totals(&self) -> Result<()> {
        let now = self.economy.summed_totals();
        let drift = now.max_rel_diff(&self.reference_totals, self.economy.n_goods());
        if drift > TOTALS_TOLERANCE {
            return Err(Error::Protocol(format!(
                "test-economy totals drifted by {drift:e} relative (now {now:?}, initially {:?})",
                self.reference_totals
            )));
        }
        Ok(())
    }

    /// Instantaneous meter readout `(eta / m_bar, alpha_j / g_bar_j)`.
    fn readout(&self) -> (f64, Vec<f64>) {
        let n = self.meter.len() as f64;
        let t = self.meter.iter().fold(Holdings::zero(), |t, h| t.add(h));
        let beta = self.spec.eta / (t.money / n);
        let nu = self
            .spec
            .alphas
            .iter()
            .enumerate()
            .map(|(k, a)| a / (t.goods[k] / n))
            .collect();
        (beta, nu)
    }
}

/// Batch-means estimate: `(mean, standard error)` from `n_batches` equal batches.
pub fn batch_means(xs: &[f64], n_batches: usize) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n_batches < 2 || n < n_batches {
        return (mean, f64::NAN);
    }
    let means: Vec<f64> = (0..n_batches)
        .map(|b| {
            let batch = &xs[b * n / n_batches..(b + 1) * n / n_batches];
            batch.iter().sum::<f64>() / batch.len() as f64
        })
        .collect();
    let grand = means.iter().sum::<f64>() / n_batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (n_batches - 1) as f64;
    (mean, (var / n_batches as f64).sqrt())
}

/// Whether the two halves of a series disagree by more than
/// [`EQUILIBRATION_Z`] pooled standard errors.
pub fn halves_disagree(xs: &[f64]) -> bool {
    let h = xs.len() / 2;
    let half_batches = N_BATCHES / 2;
    let (m1, s1) = batch_means(&xs[..h], half_batches);
    let (m2, s2) = batch_means(&xs[h..], half_batches);
    let pooled = (s1 * s1 + s2 * s2).sqrt();
    (m1 - m2).abs() > EQUILIBRATION_Z * pooled
}

/// Equilibrate, then average the meter readout over the protocol's samples.
pub fn measure_values<R: Rng + ?Sized>(
    coupled: &mut CoupledSystem,
    protocol: &MeasurementProtocol,
    rng: &mut R,
    policy: &SamplerPolicy,
) -> Result<MeterReading> {
    protocol.validate()?;
    let stats_before = *coupled.economy.stats();
    let n_goods = coupled.economy.n_goods();
    for _ in 0..protocol.burn_in_sweeps {
        coupled.sweep(protocol, rng, policy)?;
    }
    let mut betas = Vec::with_capacity(protocol.n_samples);
    let mut nus = vec![Vec::with_capacity(protocol.n_samples); n_goods];
    for _ in 0..protocol.n_samples {
        for _ in 0..protocol.sample_stride_sweeps {
            coupled.sweep(protocol, rng, policy)?;
        }
        coupled.check_totals()?;
        let (b, nu) = coupled.readout();
        betas.push(b);
        for (series, v) in nus.iter_mut().zip(nu) {
            series.push(v);
        }
    }
    coupled.economy.recompute_totals();

    let (beta, se_beta) = batch_means(&betas, N_BATCHES);
    let (nu, se_nu): (Vec<f64>, Vec<f64>) = nus.iter().map(|s| batch_means(s, N_BATCHES)).unzip();
    let flagged = halves_disagree(&betas) || nus.iter().any(|s| halves_disagree(s));
    if !(beta.is_finite() && beta > 0.0 && nu.iter().all(|v| v.is_finite() && *v > 0.0)) {
        return Err(Error::Protocol(format!("non-finite meter reading beta={beta}, nu={nu:?}")));
    }
    let stats = coupled.economy.stats().since(&stats_before);
    Ok(MeterReading {
        beta,
        nu,
        se_beta,
        se_nu,
        macro_state: coupled.reference_totals,
        n_samples: protocol.n_samples,
        flagged,
        stats,
    })
}
