//! Polyharmonic Robin boundary value problems in three dimensions, solved with
//! multi-layer single-layer potentials on triangulated surfaces.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod cli;
pub mod config;
pub mod defaults;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod linalg;
pub mod operators;
pub mod robin;
pub mod verify;
