//! Finite-dimensional reduction theory of von Neumann algebras by Hilbert
//! modules.
//!
//! Algebras are unital *-subalgebras of `n x n` complex matrices. For a
//! type I algebra `N` with centre `Z` and an abelian projection `e` of full
//! central support, the right ideal `Ne` is a Hilbert `Z`-module and left
//! multiplication identifies `N` with the `Z`-linear maps of `Ne`. On top of
//! that the crate decomposes algebras over the characters of `Z` and decides
//! standard form, both structurally and through antilinear witnesses.

pub mod cli;
pub mod error;
pub mod generate;
pub mod hilbert_module;
pub mod numerics;
pub mod reduction;
pub mod standard_form;
pub mod vn_algebra;

pub use error::{Error, Result};
pub use numerics::{AntilinearOperator, Matrix, Tolerance, Vector};
pub use vn_algebra::{StructureData, VNAlgebra};
