//! Wave scattering by many small impedance balls and its homogenized limit.
//!
//! Two forward models share one scaling law: the many-body point-source
//! system and the limiting volume integral equation. The recipe inverts the
//! limit for material design, and the exact single-sphere series checks the
//! small-particle asymptotics both models rest on.

// `!(x > 0.0)` is deliberate: NaN must fail every range check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod homogenized;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod manybody;
pub mod oracle;
pub mod quadrature;
pub mod recipe;
pub mod scaling;
pub mod special;

pub type Point = nalgebra::Vector3<f64>;
pub use num_complex::Complex64;

pub use ensemble::{place_particles, DomainBox, ParticleEnsemble, PlacementOptions};
pub use error::{Error, ErrorKind, Result};
pub use grid::{Aabb, GridField, RealGrid, VoxelGrid};
pub use homogenized::{ls_solve, pde_residual, self_term, HomogenizedSolution, LsOptions, LsSolver};
pub use kernels::{green_free, incident_field, surface_self_integral, Background, WaveContext};
pub use linalg::Execution;
pub use manybody::{
    evaluate_field, solve_effective_field, validity_ratio, EffectiveFieldSolution, ManyBodyOptions, SolverChoice,
    SolverKind,
};
pub use oracle::{extract_monopole, sphere_series, SphereSeriesSolution};
pub use recipe::{design_ensemble, p_to_hn, round_trip, target_to_p, RecipeDesign};
pub use scaling::{
    classify_regime, coupling_strength, effective_potential, monopole_charge, surface_density, CouplingMode,
    DensityProfile, ImpedanceProfile, Profile, RegimeCase, RegimeReport, ScalingLaw,
};
