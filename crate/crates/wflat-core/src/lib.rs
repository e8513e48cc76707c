//! Flatness coefficients of discrete measures via exact optimal transport.
//!
//! The crate measures how close a weighted point set in `R^d` is to lying on
//! an `n`-dimensional affine plane, at a given ball and across dyadic scales.
//! The headline quantities are transport coefficients (`alpha_p`: the
//! `p`-Wasserstein cost of moving the bump-localized measure onto a plane),
//! distance coefficients (`beta_p`, `beta_inf`, two-sided `b_beta_inf`), and a
//! Lipschitz-dual variant (`alpha_dist`). Supporting machinery includes an
//! exact transportation-simplex Wasserstein solver with a brute-force oracle,
//! Knothe coordinate-by-coordinate rearrangement maps, Whitney and dyadic cube
//! decompositions, Haar (martingale difference) operators on cube trees, and
//! seeded generators for graph, Cantor, and density-cube test measures.
//!
//! The crate is `no_std` (with `alloc`); file formats, the CLI, and
//! parallelism live in the companion `wflat` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod coefficients;
pub mod generators;
pub mod geometry;
pub mod math;
pub mod measure;
pub mod multiscale;
pub mod transport;

pub use measure::{DiscreteMeasure, ScalarField};
