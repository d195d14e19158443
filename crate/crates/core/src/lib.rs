//! Exact-arithmetic models of free bulk-boundary BV field theories and the
//! factorization algebras of their observables.
//!
//! The crate is organized around a small stack:
//!
//! * [`linalg`] — sparse exact linear algebra over a generic field scalar;
//! * [`graded`] — finitely supported graded vector spaces, cochain complexes,
//!   chain maps, shifted pairings, and their cohomology;
//! * [`retract`] — deformation retractions and the homological perturbation
//!   lemma;
//! * [`sym`] — truncated symmetric-algebra observables, the BV Laplacian,
//!   twisted enveloping differentials, and finite BV cohomology;
//! * [`models`] — cellular interval, strip, slab, and spectral-surface models
//!   of the geometries, with their boundary conditions and correspondence
//!   maps;
//! * [`algebras`] — Weyl algebras, Fock modules, star products, Koszul
//!   pairings, and Poisson (co)homology complexes;
//! * [`topology`] — surface cohomology, Lefschetz data, global
//!   Poisson-sigma-model observables, and projective-space pushforwards.
//!
//! All arithmetic is exact. The core is generic over the scalar through
//! [`scalar::Scalar`]; the concrete alias [`Rat`] (arbitrary-precision
//! rationals) is what the models and the CLI use.

pub mod algebras;
pub mod graded;
pub mod linalg;
pub mod models;
pub mod retract;
pub mod scalar;
pub mod sym;
pub mod topology;

pub use scalar::{Rat, Scalar};

/// Errors surfaced by constructors and operations that validate their inputs.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("differential does not square to zero in degree {0}")]
    NotSquareZero(i32),
    #[error("map is not a chain map in degree {0}")]
    NotChainMap(i32),
    #[error("pairing violates its declared symmetry or degree: {0}")]
    Pairing(String),
    #[error("retraction identity failed: {0}")]
    Retraction(String),
    #[error("perturbation is not nilpotent within the filtration bound {0}")]
    NotNilpotent(usize),
    #[error("truncation cap exceeded: {0}")]
    CapExceeded(String),
    #[error("boundary condition is not Lagrangian: {0}")]
    NotLagrangian(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid model descriptor: {0}")]
    Model(String),
    #[error("cannot parse rational `{0}`")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
