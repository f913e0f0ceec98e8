//! Structure-preserving H2 model reduction of diffusively coupled
//! second-order networks `ẍ + Dẋ + Kx = Fu, y = Hx`.
//!
//! The pipeline is
//! 1. [`reduction::formulate_sdp`] / [`reduction::solve_sdp`]: convex relaxation
//!    of the H2-optimal projection problem,
//! 2. [`reduction::extract_reduced`]: reduced stiffness, damping, input and output
//!    matrices with a certified error bound,
//! 3. [`reconstruct::reconstruct`]: orthogonal similarity that turns the reduced
//!    stiffness into `λI + L` with `L` a graph Laplacian.
//!
//! Semistable networks (singular `K`) go through [`semistable`] first.

// NaN must fail these tests, so comparisons are negated on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fixtures;
pub mod generator;
pub mod io;
pub mod linalg;
pub mod model;
pub mod network;
pub mod reconstruct;
pub mod reduction;
pub mod sdp;
pub mod semistable;

pub use error::{Error, Result};
pub use model::SecondOrderModel;
pub use network::{Laplacian, SecondOrderNetwork};
pub use reconstruct::{EigenPairing, GraphRealization, TFactor};
pub use reduction::{H2Report, ReducedModel, SdpCertificate, SolverStatus};
