//! Band structure and regularity analysis for photonic crystal fibres.
//!
//! The transverse cross-section is a 2D lattice with a piecewise-constant
//! refractive index on a polygonal partition. For a propagation constant `β`
//! and quasi-momentum `ξ'` the magnetic field solves
//!
//! ```text
//! ∇' × (n⁻² ∇' × u) = κ² u,   ∇' · u = 0,   ∇' = (∂x, ∂y, 0) + i(ξ', β)
//! ```
//!
//! which is discretised here in a divergence-free planewave basis. Alongside
//! the eigensolver the crate computes interface-corner singular exponents,
//! which bound the regularity of the fields and thus the convergence of any
//! discretisation.

pub mod convergence;
pub mod corner;
pub mod diagnostics;
pub mod eigen;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod grid;
pub mod lattice;
pub mod medium;
pub mod output;
pub mod planewave;

pub use error::{Error, Result};
pub use geometry::{extract_corners, CornerSpec, PolygonalPartition, Region, Sector};
pub use lattice::{reciprocal_lattice, sample_kpath, KPath, KSample, KVertex, Lattice2D, ReciprocalLattice2D, Vec2};
pub use medium::{eta_fourier_grid, eta_fourier_polygon, EtaSource, FourierTable, PermittivityMap, SmoothEta};
pub use planewave::{assemble, build_basis, eigensolve, solve_bands, BlochParams, EigenSolution, OperatorMatrix, PlanewaveBasis};
pub use fields::{recover_e, reconstruct_h, residual_reg4, Reg4Residual, SampledField};
pub use diagnostics::{check_garding, check_identity, curl_xi, div_xi, grad_xi, GardingCheck, IdentityCheck, ScalarField, TrigField};
pub use corner::{
    angular_determinant, corner_exponents, eval_singular_function, find_exponents, sigma_epsilon, solve_lamc, AngularFunction,
    ExponentFamily, SingularExponent,
};
pub use convergence::{
    band_sweep, detect_gaps, estimate_order, resolution_sweep, BandTable, ConvergenceRecord, OrderFit, SweepPlan,
    TrackRecord,
};
