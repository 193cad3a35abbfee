//! Grid sweeps, entropy fitting and fit diagnostics.

mod diagnostics;
mod fit;
mod grid;
mod solver;
mod sweep;

pub use diagnostics::{
    concavity_check, concavity_check_values, goodness_of_agreement, pure_money_check, ConcavityReport,
    ConcavityTolerance, PureMoneyReport,
};
pub use fit::{edge_increment, exact_cd_readings, fit_entropy, EntropyField, IncrementRule};
pub use grid::{linspace, GridEdge, MacroGrid};
pub use solver::{fit_potential, PotentialFit, CG_TOLERANCE};
pub use sweep::{grid_sweep, measure_node, node_seed};
