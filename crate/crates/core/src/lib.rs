//! Glued weighted manifold complexes and their canonical Dirichlet form.
//!
//! A [`geometry::GluedComplex`] is a union of simplicial pieces of possibly
//! different intrinsic dimension, identified along interior vertex sets.
//! On top of it this crate provides
//!
//! * weights and measure diagnostics ([`measure`]),
//! * the P1 Dirichlet form, resolvent and heat semigroup ([`dirichlet`]),
//! * low spectrum, spectral gap and ergodicity verdicts ([`spectral`]),
//! * relative capacities and the tube bound integrals ([`capacity`]),
//! * the reversible jump chain of the generator ([`stochastic`]),
//! * the heat excess and discrete perimeter ([`excess`]).
//!
//! The crate is `no_std` and only needs `alloc`; all IO lives in the
//! companion `glueflow` crate.
#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod capacity;
pub mod dense;
pub mod dirichlet;
pub mod error;
pub mod excess;
pub mod geometry;
pub mod measure;
pub mod space;
pub mod sparse;
pub mod spectral;
pub mod stochastic;

pub use error::{Error, Result};
