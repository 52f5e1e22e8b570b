//! Pseudo-spectral solver for the uni-directional Euler-alignment system with
//! fractional-Laplacian communication on the periodic torus, together with a
//! modulus-of-continuity toolkit (singular-integral quadrature, lemma bound
//! verification, parameter selection, breakthrough scans).

pub mod diagnostics;
pub mod error;
pub mod field;
pub mod grid;
pub mod interp;
pub mod moc;
pub mod quad;
pub mod scenario;
pub mod snapshot;
pub mod solver;
pub mod spectral;

pub use error::{FieldError, GridError, SnapshotError};
pub use field::{Representation, ScalarField};
pub use grid::{make_grid, TorusGrid};
pub use solver::{
    alignment_force, extract_auxiliary, rhs, stable_dt, step, AuxiliaryFields, FlowState, Integrator,
    NumericalEvent, Scheme, SolverConfig,
};
pub use moc::{Moc, MocError, MocPair};
pub use quad::{QuadOptions, QuadValue, QuadratureError};
