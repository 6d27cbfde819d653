//! Hilbert-space averages for bipartite quantum systems.
//!
//! A closed system is split into a *gas* and a *container*. Fixing either
//! the joint subspace weights `W_AB` (microcanonical) or the total-energy
//! shell weights `W_E` (canonical) confines the pure state to a product of
//! hyperspheres. This crate samples those regions uniformly, evaluates the
//! local purity and entropy of the gas, provides the closed-form predictions
//! for their averages and for the dominant canonical distribution, and
//! propagates states under interactions that respect each constraint.

pub mod analytics;
pub mod dynamics;
pub mod error;
pub mod sampling;
pub mod spectrum;
pub mod state;

pub use analytics::{
    dominant_distribution, expected_purity_approx, expected_purity_exact, fit_temperature,
    hypersphere_moment, lubkin_average, marginal_gas_distribution, max_entropy_micro,
    min_purity_state, region_log_size, region_size_ratio, DominantDistribution, MomentQuery,
    RegionExponent, RegionRatio, TemperatureFit,
};
pub use dynamics::{
    build_canonical_hamiltonian, build_microcanonical_hamiltonian, effective_velocity, evolve,
    path_average, time_average, Hamiltonian, Measure, Trajectory,
};
pub use error::{Error, Result};
pub use sampling::{
    mc_average, sample_canonical, sample_microcanonical, ConstraintKind, ConstraintProfile,
    McEstimate, RegionSampler, StateSampler,
};
pub use spectrum::{CompositeSpectrum, JointSubspace, Level, Shell, Spectrum};
pub use state::{
    purity, purity_from_amplitudes, reduce_container, reduce_gas, shell_weights,
    subspace_weights, von_neumann_entropy, DensityMatrix, PureState,
};
