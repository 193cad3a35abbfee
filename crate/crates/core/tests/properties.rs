use calorimeter::calorimetry::{
    exact_cd_readings, fit_entropy, fit_potential, linspace, pure_money_check, IncrementRule, MacroGrid,
};
use calorimeter::economy::{
    sample_cd_split, sample_outcome_general, BandRule, EncounterContext, Economy, Holdings, Outcome, SamplerPolicy,
    SamplerStats, Topology, UtilitySpec,
};
use calorimeter::experiment::{field_csv, preset, run_experiment, ExperimentConfig};
use calorimeter::meter::{MeasurementProtocol, MeterSpec};
use calorimeter::oracles::{cd_entropy, legendre_entropy, reversibility_check, FreeEnergySpec, StationaryWeight};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;
use common::{ks_distance, trapezoid_rss_bound};

#[test]
fn conservation_and_non_negativity_over_a_million_encounters() {
    let cases = [
        (vec![(100, UtilitySpec::cobb_douglas(3.0, &[3.0, 3.0]))], 2, Topology::Complete),
        (
            vec![
                (30, UtilitySpec::Substitutes { eta: 3.0, alpha: 3.0 }),
                (30, UtilitySpec::Complements { eta: 3.0, alpha: 3.0 }),
                (40, UtilitySpec::Satiable { eta: 3.0, alpha: 3.0, c: 0.3, k: 0.6 }),
            ],
            2,
            Topology::Complete,
        ),
        (
            vec![(100, UtilitySpec::PriceBandAggregate { eta: 3.0, alpha: 3.0, mu1: 0.7, mu2: 1.3, rule: BandRule::SellerBuyer })],
            1,
            Topology::Complete,
        ),
        (
            vec![(100, UtilitySpec::Interdependent { eta: 3.0, alpha: 3.0, comparison: calorimeter::economy::Comparison::Exp })],
            1,
            Topology::CircleExcludingComparison { comparison_radius: 1 },
        ),
    ];
    let policy = SamplerPolicy::default();
    for (k, (groups, n_goods, topology)) in cases.into_iter().enumerate() {
        let totals = Holdings::new(100.0, &vec![100.0; n_goods]).unwrap();
        let mut e = Economy::from_groups(&groups, topology, totals).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let encounters = if k == 0 { 1_000_000 } else { 250_000 };
        e.sweep(encounters, &mut rng, &policy);
        let summed = e.summed_totals();
        assert!(summed.max_rel_diff(&totals, n_goods) < 1e-12, "case {k}: {summed:?}");
        assert!(e.holdings().iter().all(|h| h.is_non_negative()), "case {k}");
        assert_eq!(e.stats().errors, 0, "case {k}");
    }
}

fn money_shares(spec_i: &UtilitySpec, spec_j: &UtilitySpec, policy: &SamplerPolicy, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = SamplerStats::default();
    let (hi, hj) = (Holdings::new(1.0, &[2.0]).unwrap(), Holdings::new(3.0, &[0.5]).unwrap());
    let (ci, cj) = (EncounterContext::new(hi), EncounterContext::new(hj));
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if let Outcome::Trade(a, _) = sample_outcome_general(spec_i, &ci, spec_j, &cj, &mut rng, policy, &mut stats).unwrap() {
            out.push(a.money / 4.0);
        }
    }
    out
}

#[test]
fn cd_rejection_sampler_matches_exact_split() {
    let n = 100_000;
    let (si, sj) = (UtilitySpec::cobb_douglas(3.0, &[2.0]), UtilitySpec::cobb_douglas(1.5, &[3.0]));
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let exact: Vec<f64> = (0..n).map(|_| sample_cd_split(3.0, 1.5, 4.0, &mut rng).0 / 4.0).collect();
    for exact_power_blocks in [true, false] {
        let policy = SamplerPolicy { exact_power_blocks, ..Default::default() };
        let d = ks_distance(money_shares(&si, &sj, &policy, n, 7), exact.clone());
        assert!(d < 0.02, "exact_power_blocks={exact_power_blocks}: KS {d}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_gradient_fit_is_within_trapezoid_bound(
        eta in 0.5f64..5.0,
        a1 in 0.5f64..5.0,
        a2 in 0.5f64..5.0,
        lo in 100.0f64..1000.0,
        span in 1.5f64..6.0,
        nodes in 3usize..8,
    ) {
        let grid = MacroGrid::new(vec![
            linspace(lo, lo * span, nodes),
            linspace(lo, lo * span, nodes),
            linspace(lo, lo * span, 3),
        ]).unwrap();
        let f = fit_entropy(&grid, exact_cd_readings(&grid, 100.0, eta, &[a1, a2], 0.0), IncrementRule::Trapezoid).unwrap();
        let bound = trapezoid_rss_bound(&grid, 100.0, eta, &[a1, a2]) / f.tss;
        prop_assert!(f.goodness_of_fit >= 0.0);
        prop_assert!(f.goodness_of_fit <= bound * (1.0 + 1e-6) + 1e-15, "{} > {}", f.goodness_of_fit, bound);
        prop_assert!(f.fitted_s[grid.reference_index()].abs() < 1e-9);
    }

    #[test]
    fn fitted_reference_equals_reference_entropy(s0 in -1e4f64..1e4, noise in 0.0f64..0.05, node in 0usize..16) {
        let mut grid = MacroGrid::new(vec![vec![1000.0], linspace(500.0, 2000.0, 4), linspace(500.0, 2000.0, 4)]).unwrap();
        grid.reference_node = grid.coords_of(node);
        grid.reference_entropy = s0;
        let f = fit_entropy(&grid, exact_cd_readings(&grid, 1000.0, 3.0, &[3.0, 3.0], noise), IncrementRule::Trapezoid).unwrap();
        prop_assert!((f.fitted_s[node] - s0).abs() <= 1e-9 * (1.0 + s0.abs()));
    }

    #[test]
    fn cg_solution_matches_dense_least_squares(
        increments in proptest::collection::vec(-10.0f64..10.0, 12),
        reference in 0usize..9,
    ) {
        // 3x3 lattice, 12 edges, each listed once per direction of travel below
        let mut edges = Vec::new();
        for r in 0..3 {
            for c in 0..3 {
                let n = 3 * r + c;
                if c < 2 { edges.push((n, n + 1)); }
                if r < 2 { edges.push((n, n + 3)); }
            }
        }
        let weighted: Vec<(usize, usize, f64)> = edges.iter().zip(&increments).map(|(&(a, b), &d)| (a, b, d)).collect();
        let fit = fit_potential(9, &weighted, reference, 0.0).unwrap();

        // dense normal equations with the reference column removed
        let free: Vec<usize> = (0..9).filter(|&n| n != reference).collect();
        let a = DMatrix::from_fn(edges.len(), 8, |e, k| {
            let (from, to) = edges[e];
            (free[k] == to) as i32 as f64 - (free[k] == from) as i32 as f64
        });
        let y = DVector::from_iterator(edges.len(), increments.iter().copied());
        let x = (a.transpose() * &a).cholesky().unwrap().solve(&(a.transpose() * y));
        for (k, &n) in free.iter().enumerate() {
            prop_assert!((fit.values[n] - x[k]).abs() < 1e-7, "node {}: {} vs {}", n, fit.values[n], x[k]);
        }
    }

    #[test]
    fn cd_split_conserves_and_stays_in_range(ei in 0.2f64..8.0, ej in 0.2f64..8.0, total in 1e-6f64..1e6, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = sample_cd_split(ei, ej, total, &mut rng);
        prop_assert!(a >= 0.0 && b >= 0.0);
        prop_assert_eq!(a + b, total);
    }

    #[test]
    fn grid_index_round_trips(n0 in 1usize..5, n1 in 1usize..5, n2 in 1usize..5, pick in 0usize..1000) {
        let grid = MacroGrid::new(vec![linspace(1.0, 2.0, n0), linspace(1.0, 2.0, n1), linspace(1.0, 2.0, n2)]).unwrap();
        let node = pick % grid.node_count();
        prop_assert_eq!(grid.index_of(&grid.coords_of(node)), node);
    }

    #[test]
    fn pure_money_form_holds_for_exact_cd(eta in 0.5f64..5.0, a in 0.5f64..5.0) {
        let goods = MacroGrid::new(vec![vec![1000.0], linspace(500.0, 2000.0, 4), linspace(500.0, 2000.0, 4)]).unwrap();
        let line = MacroGrid::new(vec![vec![500.0, 1000.0, 2000.0], vec![1000.0], vec![1000.0]]).unwrap();
        let r = pure_money_check(
            &exact_cd_readings(&goods, 1000.0, eta, &[a, a], 1e-3),
            &exact_cd_readings(&line, 1000.0, eta, &[a, a], 1e-3),
        );
        prop_assert!(r.max_rel_beta_variation < 1e-12);
        prop_assert!(r.exponent_within(-1.0, 1e-9));
    }
}

#[test]
fn legendre_cd_is_closed_form_plus_constant() {
    let spec = FreeEnergySpec::CobbDouglas { count: 1000, eta: 3.0, alphas: vec![3.0, 3.0] };
    let axis = linspace(500.0, 2000.0, 4);
    let mut diffs = Vec::new();
    for &m in &axis {
        for &g1 in &axis {
            for &g2 in &axis {
                let l = legendre_entropy(&spec, m, &[g1, g2]).unwrap();
                diffs.push(l - cd_entropy(1000.0, 3.0, &[3.0, 3.0], m, &[g1, g2]).unwrap());
            }
        }
    }
    let spread = diffs.iter().cloned().fold(f64::MIN, f64::max) - diffs.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread <= 1e-6, "spread {spread}");
}

#[test]
fn reversibility_of_symmetric_and_asymmetric_kernels() {
    let cd = UtilitySpec::cobb_douglas(3.0, &[3.0]);
    let candidate = StationaryWeight::Candidate(&cd, &cd);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let band = UtilitySpec::PriceBandSeparable { eta: 3.0, alpha: 3.0, mu1: 0.9, mu2: 1.1, rule: BandRule::Bilateral };
    for u in [&cd, &band] {
        let r = reversibility_check(u, u, &[1.0, 1.0], 20_000, &mut rng, candidate).unwrap();
        assert!(r.max_violation <= 1e-6, "{r:?}");
    }
    // widest and narrowest of the five seller/buyer bands
    let wide = UtilitySpec::PriceBandAggregate { eta: 3.0, alpha: 3.0, mu1: 0.5, mu2: 1.5, rule: BandRule::SellerBuyer };
    let narrow = UtilitySpec::PriceBandAggregate { eta: 3.0, alpha: 3.0, mu1: 0.9, mu2: 1.1, rule: BandRule::SellerBuyer };
    let r = reversibility_check(&wide, &narrow, &[1.0, 1.0], 20_000, &mut rng, candidate).unwrap();
    assert!(r.max_violation > 0.5, "{r:?}");
}

fn small_run(parallelism: usize) -> ExperimentConfig {
    let mut c = preset("cd_homogeneous").unwrap();
    c.economy.n_agents = 60;
    c.economy.population[0].count = 60;
    c.meter = Some(MeterSpec { n_agents: 20, ..MeterSpec::for_goods(2) });
    c.protocol = MeasurementProtocol { burn_in_sweeps: 30, n_samples: 20, sample_stride_sweeps: 2, ..Default::default() };
    c.grid = MacroGrid::new(vec![vec![60.0], linspace(40.0, 80.0, 3), linspace(40.0, 80.0, 3)]).unwrap();
    c.pure_money = None;
    c.parallelism = parallelism;
    c
}

#[test]
fn runs_are_deterministic_and_parallelism_invariant() {
    let first = field_csv(&run_experiment(&small_run(1)).unwrap());
    let again = field_csv(&run_experiment(&small_run(1)).unwrap());
    let parallel = field_csv(&run_experiment(&small_run(3)).unwrap());
    assert_eq!(first.as_bytes(), again.as_bytes());
    assert_eq!(first.as_bytes(), parallel.as_bytes());
    let mut other = small_run(1);
    other.seed += 1;
    assert_ne!(first, field_csv(&run_experiment(&other).unwrap()));
}
