//! Moduli of continuity: the explicit family, the singular integrals built on
//! it, breakthrough scans of simulated fields and parameter selection.

use thiserror::Error;

use crate::quad::QuadratureError;

pub mod constants;
pub mod family;
pub mod integrals;
pub mod lemmas;
pub mod params;
pub mod scan;

pub use constants::{fit_empirical_constants, riesz_moc_bound, EmpiricalConstants, LemmaId, LemmaParams, SweepSpec};
pub use family::{log_threshold, moc_eval, Moc, MocPair};
pub use lemmas::{verify_all, verify_lemma, LemmaReport};
pub use params::{check_parameters, select_parameters, ParamError, ParamInputs, Regime, SelectedParams};
pub use scan::{admissible_lambda, admissible_log_lambda, holder_seminorm, scan_breakthrough, ScanResult, ShiftSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MocError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("argument must be positive, got {0}")]
    NonPositive(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}
