//! Reference entropies and free energies for checking measured surfaces.

mod closed_form;
mod free_energy;
mod reversibility;

pub use closed_form::{
    cd_entropy, hetero_cd_entropy, interdependent_exp_entropy, interdependent_exp_nu, price_band_cd_entropy,
    ExponentGroup,
};
pub use free_energy::{
    free_energy_comparison_surface, legendre_entropy, legendre_transform, FreeEnergySpec, LegendrePoint,
    LEGENDRE_TOLERANCE, SUBSTITUTES_SERIES_RADIUS,
};
pub use reversibility::{
    reversibility_check, rho, rho_lattice, ReversibilityReport, StationaryWeight, QUADRATURE_LATTICE,
    QUADRATURE_TOLERANCE,
};
