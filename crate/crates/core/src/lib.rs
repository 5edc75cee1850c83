//! Numerical toolkit for the roots of parameterized monic complex polynomials.
//!
//! The crate is organized bottom-up:
//!
//! * [`polycore`] monic polynomial arithmetic, the Aberth-Ehrlich root solver,
//!   Cauchy bound, Tschirnhausen shift and splitting by root clustering.
//! * [`adspace`] the metric space of unordered `d`-tuples: the assignment
//!   metric, minimizing permutations, Almgren maps and embedding, and the
//!   Wasserstein identification.
//! * [`tracking`] continuous root parameterizations along coefficient curves.
//! * [`sobolev`] finite differences, `L^q` and weak `L^p` norms, metric speed,
//!   energies and the `d^{1,q}` semimetrics between root curves.
//! * [`lab`] builtin curve families and convergence experiments.

pub mod adspace;
pub mod error;
pub mod lab;
pub mod polycore;
pub mod sobolev;
pub mod tracking;

pub use error::{Error, Result};
pub use num_complex::Complex64;
