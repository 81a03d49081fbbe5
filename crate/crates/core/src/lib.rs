//! Exact geometry of piecewise-linear networks.
//!
//! Networks built from dense layers and continuous piecewise-linear
//! activations compute one affine map per tile of an input-space
//! tessellation. This crate extracts those maps, computes exact
//! tessellations of planar slices, measures local complexity and
//! hyperplane alignment, probes frozen-pattern loss Hessians, and resamples
//! piecewise-affine generators by their Jacobian volume factors.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod complexity;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod landscape;
pub mod linalg;
pub mod net;
pub mod rng;
pub mod sampler;
pub mod tessellation;

pub use error::{Error, Result};
pub use net::{
    Activation, ActivationPattern, AffineMap, BatchNormState, Dataset, Forward, Layer, Network,
};
pub use tessellation::{Slice, SliceTessellation, Tile};

pub use nalgebra;
