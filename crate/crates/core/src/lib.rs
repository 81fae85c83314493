//! Analytic Poisson brackets on rational and Weyl functions, their canonical
//! coordinates, Yang–Baxter algebras, Krein strings and the Camassa–Holm
//! bi-Hamiltonian operators, each computable along at least two independent paths.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod canonical;
pub mod contour;
pub mod entire;
pub mod error;
pub mod flows;
pub mod krein;
pub mod liouville;
pub mod numdiff;
pub mod poly;
pub mod rational;
pub mod report;
pub mod suites;
pub mod yang_baxter;

pub use entire::EntireFunction;
pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use rational::{PolynomialPair, RationalFunction};
