//! Symbolic compilation of polynomial bosonic Hamiltonians into phase-space
//! Fokker-Planck equations for the Q-function.
//!
//! ```
//! use qflow::phase_space::QuadratureConvention;
//! use qflow::symbolic::{compile, parse_hamiltonian};
//!
//! let h = parse_hamiltonian("0.5i*adag^2 - 0.5i*a^2").unwrap();
//! let pde = compile(&h, QuadratureConvention::OperatorQuadratures).unwrap();
//! assert_eq!(pde.pretty(), "dQ/dτ = [∂p·p + ∂p² − ∂q·q − ∂q²] Q");
//! ```

pub mod diffop;
pub mod expr;
pub mod parse;
pub mod pde;
pub mod qubit_meter;
pub mod rational;

use thiserror::Error;

pub use diffop::{commutator_action, DiffOperator};
pub use expr::{normal_order, Ladder, LadderOp, OperatorExpr, Word};
pub use parse::{parse_hamiltonian, ParseError};
pub use pde::{pretty_print, to_phase_space_pde, DiffusionSign, PhaseSpacePDE, RealPoly};

use crate::phase_space::QuadratureConvention;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FpeError {
    #[error("Hamiltonian is not Hermitian: {0}")]
    NotHermitian(String),
    #[error("{0} modes requested, at most {max} supported", max = expr::MAX_MODES)]
    TooManyModes(usize),
    #[error("term {term} produces derivatives of order {order}; at most 2 are supported")]
    Order { order: u32, term: String },
    #[error("non-real coefficient after reduction: {0}")]
    NonReal(String),
    #[error("zeroth-order source term {0} in generator")]
    Source(String),
    #[error("diffusion matrix is not diagonal")]
    NonDiagonalDiffusion,
    #[error("diffusion depends on the phase-space coordinates")]
    NonConstantDiffusion,
    #[error("malformed PDE document: {0}")]
    Json(String),
}

/// Full pipeline: normal order, check Hermiticity and order, apply the
/// coherent-state identities, reduce to real coordinates.
///
/// A word with `c` creations and `k` annihilations yields derivatives of
/// order `c` from the left action and `k` from the right action, so the
/// offending Hamiltonian term is reported before any algebra is done.
pub fn compile(h: &OperatorExpr, convention: QuadratureConvention) -> Result<PhaseSpacePDE, FpeError> {
    let h = h.normal_order();
    if !h.is_hermitian() {
        return Err(FpeError::NotHermitian(h.to_string()));
    }
    for (word, c) in h.terms() {
        let order = word.creations().max(word.annihilations()) as u32;
        if order > 2 {
            return Err(FpeError::Order { order, term: OperatorExpr::term(c.clone(), word.clone()).to_string() });
        }
    }
    let generator = commutator_action(&h)?;
    to_phase_space_pde(&generator, convention)
}

/// Parse and compile in one step.
pub fn compile_text(text: &str, convention: QuadratureConvention) -> Result<PhaseSpacePDE, CompileError> {
    let h = parse_hamiltonian(text)?;
    Ok(compile(&h, convention)?)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Fpe(#[from] FpeError),
}
