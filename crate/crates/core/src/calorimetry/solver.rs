//! Least-squares potential from edge differences.
//!
//! Minimising `sum_e (S_to - S_from - d_e)^2` with one node pinned gives the
//! normal equations `L S = div d`, where `L` is the graph Laplacian. Removing
//! the pinned row and column leaves a symmetric positive-definite system
//! (for a connected graph), solved here by Jacobi-preconditioned conjugate
//! gradients.

use crate::error::{Error, Result};

/// Target relative residual of the conjugate-gradient solve.
pub const CG_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialFit {
    pub values: Vec<f64>,
    /// Residual sum of squares over edges.
    pub rss: f64,
    /// Sum of squared edge differences.
    pub tss: f64,
    pub cg_iterations: usize,
    pub relative_residual: f64,
}

/// Fit node values to oriented edge differences `(from, to, d)`.
pub fn fit_potential(
    n_nodes: usize,
    edges: &[(usize, usize, f64)],
    reference: usize,
    reference_value: f64,
) -> Result<PotentialFit> {
    if reference >= n_nodes {
        return Err(Error::Grid(format!("reference node {reference} out of range")));
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    let mut div = vec![0.0; n_nodes];
    for &(a, b, d) in edges {
        if a >= n_nodes || b >= n_nodes || a == b {
            return Err(Error::Grid(format!("bad edge ({a}, {b})")));
        }
        adj[a].push(b);
        adj[b].push(a);
        div[b] += d;
        div[a] -= d;
    }
    if !connected(&adj, reference) {
        return Err(Error::Singular(
            "grid graph is disconnected; the potential is not determined".into(),
        ));
    }

    // Unknowns: every node except the reference.
    let map: Vec<Option<usize>> = {
        let mut k = 0;
        (0..n_nodes)
            .map(|v| {
                if v == reference {
                    None
                } else {
                    k += 1;
                    Some(k - 1)
                }
            })
            .collect()
    };
    let n = n_nodes - 1;
    let mut rhs = vec![0.0; n];
    for v in 0..n_nodes {
        if let Some(i) = map[v] {
            rhs[i] = div[v];
            if adj[v].contains(&reference) {
                let mult = adj[v].iter().filter(|&&w| w == reference).count() as f64;
                rhs[i] += mult * reference_value;
            }
        }
    }
    let apply = |x: &[f64], y: &mut [f64]| {
        for v in 0..n_nodes {
            if let Some(i) = map[v] {
                let mut acc = adj[v].len() as f64 * x[i];
                for &w in &adj[v] {
                    if let Some(j) = map[w] {
                        acc -= x[j];
                    }
                }
                y[i] = acc;
            }
        }
    };
    let diag: Vec<f64> = (0..n_nodes)
        .filter(|&v| v != reference)
        .map(|v| adj[v].len() as f64)
        .collect();

    let (x, iterations, relative_residual) = pcg(n, &rhs, &diag, apply)?;

    let mut values = vec![reference_value; n_nodes];
    for v in 0..n_nodes {
        if let Some(i) = map[v] {
            values[v] = x[i];
        }
    }
    let rss = edges
        .iter()
        .map(|&(a, b, d)| (values[b] - values[a] - d).powi(2))
        .sum();
    let tss = edges.iter().map(|&(_, _, d)| d * d).sum();
    Ok(PotentialFit {
        values,
        rss,
        tss,
        cg_iterations: iterations,
        relative_residual,
    })
}

fn connected(adj: &[Vec<usize>], start: usize) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == adj.len()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients for an SPD operator.
fn pcg<F: Fn(&[f64], &mut [f64])>(n: usize, b: &[f64], diag: &[f64], apply: F) -> Result<(Vec<f64>, usize, f64)> {
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if n == 0 || b_norm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let max_iter = 10 * n + 100;
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Singular(format!("operator not positive definite (p'Ap = {pap})")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = dot(&r, &r).sqrt() / b_norm;
        if rel < CG_TOLERANCE {
            // confirm with a true residual to guard against drift in r
            apply(&x, &mut ap);
            let true_rel = b
                .iter()
                .zip(&ap)
                .map(|(b, a)| (b - a) * (b - a))
                .sum::<f64>()
                .sqrt()
                / b_norm;
            if true_rel < CG_TOLERANCE {
                return Ok((x, it, true_rel));
            }
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence(format!(
        "conjugate gradients did not reach relative residual {CG_TOLERANCE} in {max_iter} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_differences_are_reproduced() {
        // path 0-1-2 plus a chord, consistent potential (0, 1, 3)
        let edges = [(0, 1, 1.0), (1, 2, 2.0), (0, 2, 3.0)];
        let fit = fit_potential(3, &edges, 0, 0.0).unwrap();
        for (v, want) in fit.values.iter().zip([0.0, 1.0, 3.0]) {
            assert!((v - want).abs() < 1e-12);
        }
        assert!(fit.rss < 1e-20);
        assert_eq!(fit.tss, 14.0);
    }

    #[test]
    fn inconsistent_cycle_spreads_the_error() {
        // circulation of 3 around a triangle: each edge absorbs 1
        let edges = [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)];
        let fit = fit_potential(3, &edges, 0, 5.0).unwrap();
        assert!((fit.rss - 3.0).abs() < 1e-10);
        assert_eq!(fit.values[0], 5.0);
    }

    #[test]
    fn disconnected_is_singular() {
        let edges = [(0, 1, 1.0), (2, 3, 1.0)];
        assert!(matches!(fit_potential(4, &edges, 0, 0.0), Err(Error::Singular(_))));
    }

    #[test]
    fn single_node() {
        let fit = fit_potential(1, &[], 0, 2.0).unwrap();
        assert_eq!(fit.values, vec![2.0]);
    }
}
