//! Continuous-time quantum-walk spatial search on one-dimensional atom chains
//! with long-range couplings mediated by free space, a waveguide or a cavity.
//!
//! The pipeline runs from a [`CouplingModel`] and a [`SearchProblem`] through
//! the gap optimum ([`find_eta_opt`]) to the optimal search time
//! ([`find_t_opt`]), with open-system variants in [`opensys`] and the size,
//! boundary and noise studies in [`experiments`].

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod hamiltonian;
pub mod io;
pub mod linalg;
pub mod model;
pub mod opensys;
pub mod optimize;
pub mod spectral;

pub use dynamics::{
    fidelity_trace, find_t_opt, propagate_closed, propagate_nonhermitian, FidelityTrace, SearchResult,
};
pub use error::{Error, Result};
pub use experiments::{
    boundary_study, fit_power_law, noise_study, sweep_sizes, BoundaryRow, Method, NoiseStudy, PowerLawFit,
    ScalingDataset, ScalingRow, TargetRule,
};
pub use hamiltonian::{
    build_effective_hamiltonian, build_search_hamiltonian, build_target_projector, uniform_state,
    target_state, CouplingMatrices, EffectiveHamiltonian, SearchHamiltonian, StateVector,
};
pub use model::{Coupling, CouplingKind, CouplingModel, SearchProblem};
pub use opensys::{
    average_trajectories, compare_methods, dephasing_trajectory, evolve_master, lindblad_rhs,
    ComparisonReport, DensityMatrix, NoiseConfig,
};
pub use spectral::{find_eta_opt, gap_curve, spectral_summary, EtaSearch, GapOptimum, GapPoint, SpectralSummary};

/// Version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
