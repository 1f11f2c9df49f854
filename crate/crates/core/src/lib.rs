//! Quantum Fisher information, symmetric logarithmic derivatives, Uhlmann
//! fidelity and fidelity susceptibility for finite-dimensional density
//! matrices of any rank.
//!
//! The support of ρ (eigenvectors with nonzero eigenvalues) carries all of
//! the information: the QFI, the QFI matrix and the fidelity susceptibility
//! are evaluated from support eigenpairs only, and the identity
//! `χ_f = F / 4` is checked numerically through independent routes
//! (support sums, the SLD trace, matrix elements of ∂ρ, and finite
//! differences of the fidelity itself).
//!
//! Modules, bottom-up:
//!
//! - [`hermlin`]: dense Hermitian eigensolver, PSD square root, matrix helpers.
//! - [`states`]: density matrices, support extraction, unitary families ρ(θ).
//! - [`derivs`]: ∂ρ, ∂²ρ, eigenvalue and eigenvector derivatives.
//! - [`metrology`]: SLD, QFI (three paths), QFIM, Cramér–Rao bound.
//! - [`fidelity`]: Uhlmann fidelity, expansion terms, fidelity susceptibility.
//! - [`xstate`]: closed forms for the two-qubit X state.
//! - [`cli`]: config parsing, report generation and command dispatch.

#![forbid(unsafe_code)]

pub mod cli;
pub mod derivs;
pub mod error;
pub mod fidelity;
pub mod hermlin;
pub mod metrology;
pub mod sampling;
pub mod states;
pub mod xstate;

pub use error::{Error, Result};
pub use hermlin::{ComplexMatrix, EigenSystem, HermitianMatrix};
pub use states::{DensityMatrix, SpectralData, StateFamily};

pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-8;
pub const DEFAULT_FD_STEP_FIRST: f64 = 1e-5;
pub const DEFAULT_FD_STEP_SECOND: f64 = 1e-3;
pub const DEFAULT_FS_DELTA: f64 = 1e-3;

/// Numerical knobs shared by every computation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// Eigenvalues above this belong to the support.
    pub rank_tol: f64,
    /// Support eigenvalues closer than this are rejected as degenerate.
    pub degeneracy_tol: f64,
    pub fd_step_first: f64,
    pub fd_step_second: f64,
    /// Step δ of the fidelity-susceptibility estimator.
    pub fs_delta: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            rank_tol: states::DEFAULT_RANK_TOL,
            degeneracy_tol: DEFAULT_DEGENERACY_TOL,
            fd_step_first: DEFAULT_FD_STEP_FIRST,
            fd_step_second: DEFAULT_FD_STEP_SECOND,
            fs_delta: DEFAULT_FS_DELTA,
        }
    }
}

impl Numerics {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("rank_tol", self.rank_tol, self.rank_tol > 0.0 && self.rank_tol < 1.0),
            ("degeneracy_tol", self.degeneracy_tol, self.degeneracy_tol > 0.0),
            ("fd_step_first", self.fd_step_first, self.fd_step_first > 0.0),
            ("fd_step_second", self.fd_step_second, self.fd_step_second > 0.0),
            ("fs_delta", self.fs_delta, self.fs_delta > 0.0),
        ];
        for (name, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::InvalidArgument(format!("numerics.{name} = {value} is out of range")));
            }
        }
        Ok(())
    }
}
