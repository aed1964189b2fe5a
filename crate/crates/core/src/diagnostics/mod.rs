//! Energy functionals, perturbation terms, inequality checks, multiplier
//! identities and decay fits.

pub mod decay;
pub mod energy;
pub mod multiplier;
pub mod perturbation;

pub use decay::{fit_decay_rate, fit_exponential, DecayFit};
pub use energy::{
    check_energy_inequality, dissipation_d, energy_e, max_step_violation, total_x, EnergyRecord,
    InequalityReport,
};
pub use perturbation::{perturbation_terms, Stencil};
