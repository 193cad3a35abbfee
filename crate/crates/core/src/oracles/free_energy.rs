//! Free energies `F(beta, nu)` and their Legendre transforms.
//!
//! The entropy is `S(M, G) = min over (beta, nu) of beta M + nu.G - F`.
//! Free energies of independent sub-populations add.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meter::MeterReading;

/// Relative gap `|nu1 - nu2| / nu2` below which the substitutes ratio is
/// evaluated by its series.
pub const SUBSTITUTES_SERIES_RADIUS: f64 = 1e-6;

/// Relative gradient norm at which the Legendre minimisation stops.
pub const LEGENDRE_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FreeEnergySpec {
    /// `N (eta log beta + sum_j alpha_j log nu_j)`
    CobbDouglas { count: usize, eta: f64, alphas: Vec<f64> },
    /// `N (eta log beta + log[(nu1 - nu2) / (nu2^-alpha - nu1^-alpha)])`
    Substitutes { count: usize, eta: f64, alpha: f64 },
    /// `N (eta log beta + (alpha-1) log(nu1 + nu2) + log nu1 + log nu2)`
    Complements { count: usize, eta: f64, alpha: f64 },
    /// `N (eta log beta + alpha log(nu - 1))`, one good, `nu > 1`.
    ExpTilted { count: usize, eta: f64, alpha: f64 },
    Mixture { components: Vec<FreeEnergySpec> },
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::OracleDomain(msg()))
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

/// Nodes and weights of `n`-point Gauss–Legendre quadrature on `[0, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 + x), 0.5 * w));
    }
    out
}

/// Goods part of the substitutes partition function,
/// `D = (nu2^-a - nu1^-a) / (nu1 - nu2)`.
fn substitutes_ratio(a: f64, nu1: f64, nu2: f64) -> f64 {
    let c = 0.5 * (nu1 + nu2);
    let h = 0.5 * (nu1 - nu2);
    if h.abs() < SUBSTITUTES_SERIES_RADIUS * nu2 {
        // symmetric divided difference of -nu^-a around the midpoint
        let f1 = a * c.powf(-a - 1.0);
        let f3 = a * (a + 1.0) * (a + 2.0) * c.powf(-a - 3.0);
        let f5 = a * (a + 1.0) * (a + 2.0) * (a + 3.0) * (a + 4.0) * c.powf(-a - 5.0);
        f1 + f3 * h * h / 6.0 + f5 * h.powi(4) / 120.0
    } else {
        (nu2.powf(-a) - nu1.powf(-a)) / (nu1 - nu2)
    }
}

/// `D` and its gradient.
fn substitutes_ratio_grad(a: f64, nu1: f64, nu2: f64) -> (f64, [f64; 2]) {
    let value = substitutes_ratio(a, nu1, nu2);
    let grad = if (nu1 - nu2).abs() > 1e-3 * (nu1 + nu2) {
        [
            (a * nu1.powf(-a - 1.0) - value) / (nu1 - nu2),
            (value - a * nu2.powf(-a - 1.0)) / (nu1 - nu2),
        ]
    } else {
        // D = a * int_0^1 (nu2 + t (nu1 - nu2))^(-a-1) dt; differentiate under the integral
        let mut g = [0.0; 2];
        for (t, w) in gauss_legendre(12) {
            let x = nu2 + t * (nu1 - nu2);
            let d = -a * (a + 1.0) * x.powf(-a - 2.0) * w;
            g[0] += t * d;
            g[1] += (1.0 - t) * d;
        }
        g
    };
    (value, grad)
}

impl FreeEnergySpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            FreeEnergySpec::CobbDouglas { count, eta, alphas } => {
                ensure(*count > 0, || "component count must be positive".into())?;
                ensure(
                    positive(*eta) && !alphas.is_empty() && alphas.iter().all(|a| positive(*a)),
                    || format!("exponents must be positive: eta={eta}, alphas={alphas:?}"),
                )
            }
            FreeEnergySpec::Substitutes { count, eta, alpha }
            | FreeEnergySpec::Complements { count, eta, alpha }
            | FreeEnergySpec::ExpTilted { count, eta, alpha } => {
                ensure(*count > 0, || "component count must be positive".into())?;
                ensure(positive(*eta) && positive(*alpha), || {
                    format!("exponents must be positive: eta={eta}, alpha={alpha}")
                })
            }
            FreeEnergySpec::Mixture { components } => {
                ensure(!components.is_empty(), || "empty mixture".into())?;
                components.iter().try_for_each(Self::validate)?;
                let n = components[0].n_goods();
                ensure(components.iter().all(|c| c.n_goods() == n), || {
                    "mixture components disagree on the number of goods".into()
                })
            }
        }
    }

    pub fn n_goods(&self) -> usize {
        match self {
            FreeEnergySpec::CobbDouglas { alphas, .. } => alphas.len(),
            FreeEnergySpec::Substitutes { .. } | FreeEnergySpec::Complements { .. } => 2,
            FreeEnergySpec::ExpTilted { .. } => 1,
            FreeEnergySpec::Mixture { components } => components.first().map_or(0, Self::n_goods),
        }
    }

    pub fn count(&self) -> usize {
        match self {
            FreeEnergySpec::CobbDouglas { count, .. }
            | FreeEnergySpec::Substitutes { count, .. }
            | FreeEnergySpec::Complements { count, .. }
            | FreeEnergySpec::ExpTilted { count, .. } => *count,
            FreeEnergySpec::Mixture { components } => components.iter().map(Self::count).sum(),
        }
    }

    /// Smallest admissible value of each `nu`.
    fn nu_floor(&self) -> f64 {
        match self {
            FreeEnergySpec::ExpTilted { .. } => 1.0,
            FreeEnergySpec::Mixture { components } => components.iter().map(Self::nu_floor).fold(0.0, f64::max),
            _ => 0.0,
        }
    }

    fn check_args(&self, beta: f64, nu: &[f64]) -> Result<()> {
        ensure(nu.len() == self.n_goods(), || {
            format!("{} goods values for a {}-good free energy", nu.len(), self.n_goods())
        })?;
        let floor = self.nu_floor();
        ensure(positive(beta) && nu.iter().all(|v| v.is_finite() && *v > floor), || {
            format!("free energy needs beta > 0 and nu > {floor}, got beta={beta}, nu={nu:?}")
        })
    }

    /// `F(beta, nu)`.
    pub fn value(&self, beta: f64, nu: &[f64]) -> Result<f64> {
        self.check_args(beta, nu)?;
        Ok(self.value_unchecked(beta, nu))
    }

    fn value_unchecked(&self, beta: f64, nu: &[f64]) -> f64 {
        match self {
            FreeEnergySpec::CobbDouglas { count, eta, alphas } => {
                let g: f64 = alphas.iter().zip(nu).map(|(a, v)| a * v.ln()).sum();
                *count as f64 * (eta * beta.ln() + g)
            }
            FreeEnergySpec::Substitutes { count, eta, alpha } => {
                let d = substitutes_ratio(*alpha, nu[0], nu[1]);
                *count as f64 * (eta * beta.ln() - d.ln())
            }
            FreeEnergySpec::Complements { count, eta, alpha } => {
                *count as f64
                    * (eta * beta.ln() + (alpha - 1.0) * (nu[0] + nu[1]).ln() + nu[0].ln() + nu[1].ln())
            }
            FreeEnergySpec::ExpTilted { count, eta, alpha } => {
                *count as f64 * (eta * beta.ln() + alpha * (nu[0] - 1.0).ln())
            }
            FreeEnergySpec::Mixture { components } => {
                components.iter().map(|c| c.value_unchecked(beta, nu)).sum()
            }
        }
    }

    /// `(dF/dbeta, dF/dnu_j)`.
    pub fn gradient(&self, beta: f64, nu: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_args(beta, nu)?;
        let mut g = vec![0.0; 1 + nu.len()];
        self.add_gradient(beta, nu, &mut g);
        let db = g[0];
        g.remove(0);
        Ok((db, g))
    }

    fn add_gradient(&self, beta: f64, nu: &[f64], g: &mut [f64]) {
        match self {
            FreeEnergySpec::CobbDouglas { count, eta, alphas } => {
                let n = *count as f64;
                g[0] += n * eta / beta;
                for (j, a) in alphas.iter().enumerate() {
                    g[1 + j] += n * a / nu[j];
                }
            }
            FreeEnergySpec::Substitutes { count, eta, alpha } => {
                let n = *count as f64;
                let (d, dd) = substitutes_ratio_grad(*alpha, nu[0], nu[1]);
                g[0] += n * eta / beta;
                g[1] -= n * dd[0] / d;
                g[2] -= n * dd[1] / d;
            }
            FreeEnergySpec::Complements { count, eta, alpha } => {
                let n = *count as f64;
                let s = (alpha - 1.0) / (nu[0] + nu[1]);
                g[0] += n * eta / beta;
                g[1] += n * (s + 1.0 / nu[0]);
                g[2] += n * (s + 1.0 / nu[1]);
            }
            FreeEnergySpec::ExpTilted { count, eta, alpha } => {
                let n = *count as f64;
                g[0] += n * eta / beta;
                g[1] += n * alpha / (nu[0] - 1.0);
            }
            FreeEnergySpec::Mixture { components } => {
                for c in components {
                    c.add_gradient(beta, nu, g);
                }
            }
        }
    }

    /// Rough weights `w` such that the minimiser is near `nu_j = floor + w_j / G_j`.
    fn guess_weights(&self, w: &mut [f64]) -> f64 {
        let n = self.count() as f64;
        match self {
            FreeEnergySpec::CobbDouglas { eta, alphas, .. } => {
                for (wj, a) in w.iter_mut().zip(alphas) {
                    *wj += n * a;
                }
                n * eta
            }
            FreeEnergySpec::Substitutes { eta, alpha, .. } | FreeEnergySpec::Complements { eta, alpha, .. } => {
                for wj in w.iter_mut() {
                    *wj += n * (alpha + 1.0) / 2.0;
                }
                n * eta
            }
            FreeEnergySpec::ExpTilted { eta, alpha, .. } => {
                w[0] += n * alpha;
                n * eta
            }
            FreeEnergySpec::Mixture { components } => components.iter().map(|c| c.guess_weights(w)).sum(),
        }
    }
}

/// Minimiser of the Legendre objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegendrePoint {
    pub entropy: f64,
    pub beta: f64,
    pub nu: Vec<f64>,
    pub iterations: usize,
    /// Newton failed and the simplex search finished the job.
    pub used_fallback: bool,
}

struct Objective<'a> {
    spec: &'a FreeEnergySpec,
    target: Vec<f64>,
    floor: Vec<f64>,
}

impl Objective<'_> {
    /// Coordinates are `x = floor + exp(y)`, which keeps every iterate in the domain.
    fn x(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.floor).map(|(y, f)| f + y.exp()).collect()
    }

    fn phi(&self, y: &[f64]) -> f64 {
        let x = self.x(y);
        if x.iter().zip(&self.floor).any(|(x, f)| !(x.is_finite() && *x > *f)) {
            return f64::INFINITY;
        }
        let lin: f64 = x.iter().zip(&self.target).map(|(x, t)| x * t).sum();
        lin - self.spec.value_unchecked(x[0], &x[1..])
    }

    fn grad_f(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.spec.add_gradient(x[0], &x[1..], &mut g);
        g
    }

    fn relative_residual(&self, x: &[f64]) -> f64 {
        let g = self.grad_f(x);
        g.iter()
            .zip(&self.target)
            .map(|(g, t)| ((t - g) / t).abs())
            .fold(0.0, f64::max)
    }

    fn grad_hess_y(&self, y: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let x = self.x(y);
        let n = x.len();
        let gf = self.grad_f(&x);
        let s: Vec<f64> = x.iter().zip(&self.floor).map(|(x, f)| x - f).collect();
        let grad = DVector::from_fn(n, |i, _| (self.target[i] - gf[i]) * s[i]);
        // Hessian of F from central differences of the analytic gradient
        let mut hf = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = 1e-5 * s[j];
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let (gp, gm) = (self.grad_f(&xp), self.grad_f(&xm));
            for i in 0..n {
                hf[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        let hf = 0.5 * (&hf + hf.transpose());
        let mut hess = DMatrix::from_fn(n, n, |i, j| -hf[(i, j)] * s[i] * s[j]);
        for i in 0..n {
            hess[(i, i)] += grad[i];
        }
        (grad, hess)
    }
}

const NEWTON_BUDGET: usize = 100;
const SIMPLEX_BUDGET: usize = 20_000;

fn newton(obj: &Objective, y: &mut Vec<f64>) -> (bool, usize) {
    let mut phi = obj.phi(y);
    for it in 1..=NEWTON_BUDGET {
        if obj.relative_residual(&obj.x(y)) < LEGENDRE_TOLERANCE {
            return (true, it - 1);
        }
        let (g, h) = obj.grad_hess_y(y);
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => -&g / h.diagonal().abs().max().max(1.0),
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = y.iter().zip(step.iter()).map(|(y, d)| y + t * d).collect();
            let p = obj.phi(&trial);
            if p <= phi {
                *y = trial;
                phi = p;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            return (obj.relative_residual(&obj.x(y)) < LEGENDRE_TOLERANCE, it);
        }
    }
    (obj.relative_residual(&obj.x(y)) < LEGENDRE_TOLERANCE, NEWTON_BUDGET)
}

/// Derivative-free Nelder–Mead descent on `phi`.
fn simplex(obj: &Objective, start: &[f64]) -> (Vec<f64>, usize) {
    let n = start.len();
    let mut pts: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += 0.1;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| obj.phi(p)).collect();
    for it in 0..SIMPLEX_BUDGET {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if (vals[n] - vals[0]).abs() <= 1e-15 * vals[0].abs().max(1.0) {
            return (pts[0].clone(), it);
        }
        let centroid: Vec<f64> = (0..n).map(|k| pts[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (pts[n][k] - centroid[k])).collect() };
        let r = along(-1.0);
        let fr = obj.phi(&r);
        if fr < vals[0] {
            let e = along(-2.0);
            let fe = obj.phi(&e);
            if fe < fr {
                pts[n] = e;
                vals[n] = fe;
            } else {
                pts[n] = r;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = r;
            vals[n] = fr;
        } else {
            let c = if fr < vals[n] { along(-0.5) } else { along(0.5) };
            let fc = obj.phi(&c);
            if fc < vals[n].min(fr) {
                pts[n] = c;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    pts[i] = (0..n).map(|k| pts[0][k] + 0.5 * (pts[i][k] - pts[0][k])).collect();
                    vals[i] = obj.phi(&pts[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    (pts[best].clone(), SIMPLEX_BUDGET)
}

/// Minimise `beta M + nu.G - F(beta, nu)`.
pub fn legendre_transform(spec: &FreeEnergySpec, money: f64, goods: &[f64]) -> Result<LegendrePoint> {
    spec.validate()?;
    ensure(goods.len() == spec.n_goods(), || {
        format!("{} goods amounts for a {}-good free energy", goods.len(), spec.n_goods())
    })?;
    ensure(positive(money) && goods.iter().all(|g| positive(*g)), || {
        format!("amounts must be positive: M={money}, G={goods:?}")
    })?;
    let nu_floor = spec.nu_floor();
    let mut weights = vec![0.0; goods.len()];
    let money_weight = spec.guess_weights(&mut weights);
    let mut target = vec![money];
    target.extend_from_slice(goods);
    let mut floor = vec![0.0];
    floor.extend(std::iter::repeat_n(nu_floor, goods.len()));
    let obj = Objective { spec, target, floor };

    let mut y: Vec<f64> = std::iter::once((money_weight / money).ln())
        .chain(weights.iter().zip(goods).map(|(w, g)| (w / g).ln()))
        .collect();
    let (converged, mut iterations) = newton(&obj, &mut y);
    let mut used_fallback = false;
    if !converged {
        used_fallback = true;
        let (y_nm, it) = simplex(&obj, &y);
        iterations += it;
        y = y_nm;
        // polish: the simplex optimum is usually inside Newton's basin
        let (ok, it) = newton(&obj, &mut y);
        iterations += it;
        if !ok {
            let x = obj.x(&y);
            return Err(Error::LegendreNoConvergence {
                iterations,
                beta: x[0],
                nu: x[1..].to_vec(),
            });
        }
    }
    let x = obj.x(&y);
    Ok(LegendrePoint {
        entropy: obj.phi(&y),
        beta: x[0],
        nu: x[1..].to_vec(),
        iterations,
        used_fallback,
    })
}

pub fn legendre_entropy(spec: &FreeEnergySpec, money: f64, goods: &[f64]) -> Result<f64> {
    legendre_transform(spec, money, goods).map(|p| p.entropy)
}

/// `-F` at each node's measured values. For families where `beta M + nu.G`
/// is constant at equilibrium this is the entropy up to a constant.
pub fn free_energy_comparison_surface(spec: &FreeEnergySpec, readings: &[MeterReading]) -> Result<Vec<f64>> {
    spec.validate()?;
    readings
        .iter()
        .enumerate()
        .map(|(node, r)| spec.value(r.beta, &r.nu).map(|f| -f).map_err(|e| Error::at_node(node, e)))
        .collect()
}
