use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::grid::MacroGrid;
use crate::economy::{Economy, Holdings, SamplerPolicy};
use crate::error::{Error, Result};
use crate::meter::{attach_meter, measure_values, MeasurementProtocol, MeterReading, MeterSpec};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the random stream owned by one grid node.
pub fn node_seed(seed: u64, node: usize) -> u64 {
    splitmix64(seed ^ splitmix64(node as u64))
}

/// Measure one node: fresh economy from `factory`, fresh meter, own stream.
pub fn measure_node<F>(
    factory: &F,
    grid: &MacroGrid,
    node: usize,
    meter: &MeterSpec,
    protocol: &MeasurementProtocol,
    policy: &SamplerPolicy,
    seed: u64,
) -> Result<MeterReading>
where
    F: Fn(&Holdings, &mut ChaCha8Rng) -> Result<Economy>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(node_seed(seed, node));
    let totals = grid.macro_state(node);
    let economy = factory(&totals, &mut rng)?;
    let mut coupled = attach_meter(economy, meter)?;
    measure_values(&mut coupled, protocol, &mut rng, policy)
}

/// Read the meter at every grid node, `parallelism` nodes at a time.
///
/// Results depend only on `seed`, never on `parallelism`.
pub fn grid_sweep<F>(
    factory: F,
    grid: &MacroGrid,
    meter: &MeterSpec,
    protocol: &MeasurementProtocol,
    policy: &SamplerPolicy,
    seed: u64,
    parallelism: usize,
) -> Result<Vec<MeterReading>>
where
    F: Fn(&Holdings, &mut ChaCha8Rng) -> Result<Economy> + Sync,
{
    grid.validate()?;
    meter.validate()?;
    protocol.validate()?;
    policy.validate()?;
    if meter.alphas.len() != grid.n_goods() {
        return Err(Error::DimensionMismatch(format!(
            "meter has {} goods, grid has {}",
            meter.alphas.len(),
            grid.n_goods()
        )));
    }
    let run = |node: usize| {
        measure_node(&factory, grid, node, meter, protocol, policy, seed).map_err(|e| Error::at_node(node, e))
    };
    let nodes = 0..grid.node_count();
    if parallelism <= 1 {
        return nodes.map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Config(vec![format!("cannot start worker pool: {e}")]))?;
    pool.install(|| nodes.into_par_iter().map(run).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::economy::{Topology, UtilitySpec};

    fn factory(t: &Holdings, _: &mut ChaCha8Rng) -> Result<Economy> {
        Economy::from_groups(&[(40, UtilitySpec::cobb_douglas(2.0, &[2.0]))], Topology::Complete, *t)
    }

    fn quick() -> MeasurementProtocol {
        MeasurementProtocol {
            burn_in_sweeps: 20,
            n_samples: 20,
            sample_stride_sweeps: 1,
            ..Default::default()
        }
    }

    #[test]
    fn node_seeds_differ() {
        assert_ne!(node_seed(1, 0), node_seed(1, 1));
        assert_ne!(node_seed(1, 0), node_seed(2, 0));
    }

    #[test]
    fn single_node_grid_gives_one_reading() {
        let grid = MacroGrid::new(vec![vec![40.0], vec![40.0]]).unwrap();
        let meter = MeterSpec {
            n_agents: 10,
            ..MeterSpec::for_goods(1)
        };
        let r = grid_sweep(factory, &grid, &meter, &quick(), &SamplerPolicy::default(), 7, 1).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].macro_state.money, 40.0);
    }

    #[test]
    fn parallelism_does_not_change_results() {
        let grid = MacroGrid::new(vec![vec![40.0], vec![20.0, 40.0, 80.0]]).unwrap();
        let meter = MeterSpec {
            n_agents: 10,
            ..MeterSpec::for_goods(1)
        };
        let p = SamplerPolicy::default();
        let a = grid_sweep(factory, &grid, &meter, &quick(), &p, 3, 1).unwrap();
        let b = grid_sweep(factory, &grid, &meter, &quick(), &p, 3, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn goods_mismatch_is_rejected() {
        let grid = MacroGrid::new(vec![vec![40.0], vec![40.0]]).unwrap();
        let err = grid_sweep(factory, &grid, &MeterSpec::default(), &quick(), &SamplerPolicy::default(), 0, 1);
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }
}
