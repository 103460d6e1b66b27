//! Construction and analysis of Lindblad master equations whose steady
//! states are chosen entangled pure states of a bipartite system.
//!
//! The crate is organized bottom-up: dense complex linear algebra
//! ([`linalg`]), Schmidt-decomposed bipartite states ([`states`]),
//! Lindblad generators and their spectra ([`lindblad`]), reverse
//! engineering of dissipators from a target state ([`engineer`]),
//! speed limits relating entanglement to relaxation rates ([`bounds`]),
//! and boundary-driven spin-chain models ([`models`]).

// Force linkage of the system BLAS/LAPACK backend.
extern crate openblas_src;

pub mod bounds;
pub mod engineer;
mod error;
pub mod lindblad;
pub mod linalg;
pub mod models;
pub mod states;

pub use error::{Error, Result};
