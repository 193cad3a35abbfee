use calorimeter::calorimetry::MacroGrid;

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Squared trapezoid truncation error summed over edges bounds the residual,
/// since the true potential is one candidate for the least-squares fit.
pub fn trapezoid_rss_bound(grid: &MacroGrid, n: f64, eta: f64, alphas: &[f64]) -> f64 {
    grid.edges()
        .iter()
        .map(|e| {
            let (a, b) = (grid.macro_state(e.from), grid.macro_state(e.to));
            let x = if e.axis == 0 { n * eta } else { n * alphas[e.axis - 1] };
            let (lo, hi) = (a.get(e.axis), b.get(e.axis));
            let trap = 0.5 * x * (1.0 / lo + 1.0 / hi) * (hi - lo);
            (trap - x * (hi / lo).ln()).powi(2)
        })
        .sum()
}

