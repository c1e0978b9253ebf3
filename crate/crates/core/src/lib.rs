//! Integrable bosonic networks on the cube graph.
//!
//! Exact diagonalization on fixed particle-number sectors, orthogonal mode
//! transforms, the conserved face generators of the two models, the
//! recursively constructed eigenbasis and the Bethe-ansatz solution of the
//! reduced spin problems.

pub mod bethe;
pub mod cli;
pub mod error;
pub mod fock;
pub mod hamiltonians;
pub mod modetx;
pub mod recbasis;
pub mod report;
pub mod su2gen;

pub use error::{CubenetError, Result};
