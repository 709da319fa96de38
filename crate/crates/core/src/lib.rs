//! Wave-equation threshold dynamics for hyperbolic mean curvature flow.
//!
//! Interfaces are carried as signed distance functions on a uniform grid.
//! Each step solves a wave equation with homogeneous Neumann conditions for
//! one threshold interval and takes the zero level set as the new interface.
//! The two-phase loop lives in [`flow`], the N-phase vector version in
//! [`multiphase`] and the volume-constrained variant in [`volume`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circle;
pub mod cli;
pub mod config;
pub mod distance;
pub mod error;
pub mod experiments;
pub mod flow;
pub mod grid;
pub mod io;
pub mod multiphase;
pub mod special;
pub mod volume;
pub mod wave;

pub use distance::{Interface, Point, RadiusEstimate, RadiusWeighting, Segment};
pub use error::{HbmoError, Result};
pub use flow::{HbmoState, SolverSettings, StepOutcome};
pub use grid::{Grid2D, ScalarField, VectorField};
pub use wave::{WaveParams, WaveState};
