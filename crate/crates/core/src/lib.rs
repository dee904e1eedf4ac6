//! Graphical mean curvature flow with a prescribed gradient image.
//!
//! The flow `u_t = v div(Du / v)` with `v = sqrt(1 - |Du|^2)` (spacelike graphs in
//! Minkowski space) or `v = sqrt(1 + |Du|^2)` (Euclidean graphs), together with the
//! second boundary condition `Du(Ω) = Ω̃`, converges to a translating soliton
//! `u∞(x) + C∞ t`. This crate discretizes that problem, runs it to the translator,
//! and audits the a priori estimates along the way.
//!
//! Module map:
//!
//! - [`domains`]: uniformly convex domains through concave quadratic defining functions.
//! - [`geometry`]: pointwise graph geometry (metric, curvature matrix, principal curvatures).
//! - [`operators`]: the flow operator `G`, its derivatives, the dual operator and Legendre transform.
//! - [`grid`]: line and mapped polar-disk grids with derivative stencils.
//! - [`flow`]: implicit/explicit time stepping and translator extraction.
//! - [`oracles`]: closed-form and shooting references, finite-difference derivative checks.
//! - [`monitors`]: empirical audits of the a priori estimates.
//! - [`cli`]: configuration files, artifacts, and the command implementations.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod domains;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod grid;
mod linsolve;
pub mod monitors;
pub mod operators;
pub mod oracles;

pub use domains::{ConvexDomain, DefiningJet, DomainKind};
pub use error::{Error, Result};
pub use flow::{FlowState, SolitonResult, StepRecord, Tolerances};
pub use geometry::{GraphGeometry, PointJet, Signature, Transcription};
pub use grid::{Grid, GridSpec};

/// Gradients closer than this to the light cone are refused in Minkowski geometry.
pub const SPACELIKE_MARGIN: f64 = 1e-6;

/// Tolerance on the defining-function value for boundary membership.
pub const BOUNDARY_TOL: f64 = 1e-10;
