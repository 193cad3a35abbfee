//! Detailed-balance check for agents with conditional utilities.
//!
//! With `sigma_i(p', p) = u_i(p'|p) w_i(p)`, an encounter is reversible with
//! respect to the product density `prod_l w_l` when
//! `sigma_i(p_i', p_i) sigma_j(p_j', p_j) = sigma_i(p_i, p_i') sigma_j(p_j, p_j')`
//! for every pair of outcomes conserving the totals. The weights `w` are
//! either computed as `rho_i(p) = int u_i(p'|p) e^(-k.p') dp'` by lattice
//! quadrature, or supplied as a candidate stationary density.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::economy::{EncounterContext, Holdings, UtilitySpec};
use super::free_energy::gauss_legendre;
use crate::error::{Error, Result};

/// Points per axis of the coarse quadrature lattice; the fine one doubles it.
pub const QUADRATURE_LATTICE: usize = 64;
/// Allowed relative change of `rho` between the two lattices.
pub const QUADRATURE_TOLERANCE: f64 = 0.01;
const VIOLATION_FLOOR: f64 = 1e-30;

#[derive(Clone, Copy, Debug)]
pub enum StationaryWeight<'a> {
    /// `rho_i(p)` by quadrature.
    Quadrature,
    /// Unconditional densities to test as the stationary law of each agent.
    Candidate(&'a UtilitySpec, &'a UtilitySpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReversibilityReport {
    /// Largest relative asymmetry of the sigma products.
    pub max_violation: f64,
    /// Probes where at least one direction has non-zero weight.
    pub probes_used: usize,
    pub probes_drawn: usize,
}

fn conditional(u: &UtilitySpec, new: &Holdings, old: &Holdings) -> Result<f64> {
    u.utility(new, &EncounterContext::new(*old))
}

/// Gauss–Legendre points per lattice cell and axis.
const POINTS_PER_CELL: usize = 4;

/// `int u(p'|p) e^(-k.p') dp'` on a lattice of `n` cells per axis (a
/// product Gauss–Legendre rule in each cell), after mapping each axis to the
/// unit interval by `k p' = t / (1 - t)`.
pub fn rho_lattice(u: &UtilitySpec, p: &Holdings, k: &[f64], n: usize) -> Result<f64> {
    let d = k.len();
    let rule = gauss_legendre(POINTS_PER_CELL);
    // per-axis nodes (position, weight including the map's Jacobian and e^(-k p'))
    let axes: Vec<Vec<(f64, f64)>> = k
        .iter()
        .map(|&kc| {
            (0..n)
                .flat_map(|cell| {
                    rule.iter().map(move |(x, w)| {
                        let t = (cell as f64 + x) / n as f64;
                        let y = t / (1.0 - t);
                        (y / kc, w / n as f64 * (-y).exp() / (kc * (1.0 - t) * (1.0 - t)))
                    })
                })
                .collect()
        })
        .collect();
    let m = n * POINTS_PER_CELL;
    let mut sum = 0.0;
    let mut idx = vec![0usize; d];
    for _ in 0..m.pow(d as u32) {
        let mut q = Holdings::zero();
        let mut weight = 1.0;
        for c in 0..d {
            let (x, w) = axes[c][idx[c]];
            q.set(c, x);
            weight *= w;
        }
        if weight > 0.0 {
            sum += weight * conditional(u, &q, p)?;
        }
        for c in (0..d).rev() {
            idx[c] += 1;
            if idx[c] < m {
                break;
            }
            idx[c] = 0;
        }
    }
    Ok(sum)
}

/// [`rho_lattice`] on the coarse lattice, checked against the fine one.
pub fn rho(u: &UtilitySpec, p: &Holdings, k: &[f64]) -> Result<f64> {
    let coarse = rho_lattice(u, p, k, QUADRATURE_LATTICE)?;
    let fine = rho_lattice(u, p, k, 2 * QUADRATURE_LATTICE)?;
    if (coarse - fine).abs() > QUADRATURE_TOLERANCE * fine.abs() {
        return Err(Error::Quadrature(format!(
            "rho at {p:?} changes from {coarse} to {fine} on refining the lattice"
        )));
    }
    Ok(fine)
}

/// Largest violation of the sigma-product condition over `n_probes` random
/// quadruples `(p_i, p_j) -> (p_i', p_j')` with conserved totals.
///
/// Holdings are drawn with independent `Exp(k_c)` components; the outcome
/// split is uniform on the conservation box.
pub fn reversibility_check<R: Rng + ?Sized>(
    u_i: &UtilitySpec,
    u_j: &UtilitySpec,
    k: &[f64],
    n_probes: usize,
    rng: &mut R,
    weight: StationaryWeight,
) -> Result<ReversibilityReport> {
    for u in [u_i, u_j] {
        u.validate()?;
        if u.needs_neighbourhood() {
            return Err(Error::OracleDomain(
                "reversibility check needs utilities that depend only on the agent's own holdings".into(),
            ));
        }
    }
    let d = 1 + u_i.goods_count();
    if u_j.goods_count() != u_i.goods_count() || k.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "need {d} regularisation rates for {} goods, got {}",
            d - 1,
            k.len()
        )));
    }
    if let StationaryWeight::Candidate(a, b) = weight {
        if a.price_band().is_some() || b.price_band().is_some() || a.needs_neighbourhood() || b.needs_neighbourhood() {
            return Err(Error::OracleDomain("candidate densities must be unconditional".into()));
        }
    }
    let exps = k
        .iter()
        .map(|&k| Exp::new(k).map_err(|_| Error::OracleDomain(format!("regularisation rate must be positive, got {k}"))))
        .collect::<Result<Vec<_>>>()?;

    let w = |u: &UtilitySpec, who: usize, p: &Holdings| -> Result<f64> {
        match weight {
            StationaryWeight::Quadrature => rho(u, p, k),
            StationaryWeight::Candidate(a, b) => {
                let c = if who == 0 { a } else { b };
                conditional(c, p, p)
            }
        }
    };

    let mut report = ReversibilityReport {
        max_violation: 0.0,
        probes_used: 0,
        probes_drawn: n_probes,
    };
    for _ in 0..n_probes {
        let mut pi = Holdings::zero();
        let mut pj = Holdings::zero();
        let mut qi = Holdings::zero();
        let mut qj = Holdings::zero();
        for c in 0..d {
            let (a, b) = (exps[c].sample(rng), exps[c].sample(rng));
            let total = a + b;
            let x = total * rng.random::<f64>();
            pi.set(c, a);
            pj.set(c, b);
            qi.set(c, x);
            qj.set(c, total - x);
        }
        let fwd_u = conditional(u_i, &qi, &pi)? * conditional(u_j, &qj, &pj)?;
        let rev_u = conditional(u_i, &pi, &qi)? * conditional(u_j, &pj, &qj)?;
        if fwd_u == 0.0 && rev_u == 0.0 {
            continue;
        }
        let fwd = fwd_u * w(u_i, 0, &pi)? * w(u_j, 1, &pj)?;
        let rev = rev_u * w(u_i, 0, &qi)? * w(u_j, 1, &qj)?;
        if fwd == 0.0 && rev == 0.0 {
            continue;
        }
        report.probes_used += 1;
        let v = (fwd - rev).abs() / (fwd + rev + VIOLATION_FLOOR);
        report.max_violation = report.max_violation.max(v);
    }
    Ok(report)
}
