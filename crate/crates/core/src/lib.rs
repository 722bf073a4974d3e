//! Design of optimal quantum detectors.
//!
//! Given an ensemble of density matrices with priors and weights, this crate
//! computes POVMs that minimize the average joint error or the worst-case
//! a-posteriori error (optionally with an inconclusive outcome and with
//! noisy measurements), evaluates every probability matrix of a detector,
//! checks optimality conditions, and designs pre-measurement channels in
//! operator-sum form.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod certify;
pub mod closed_form;
pub mod design;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod osr;
pub mod sdp;
pub mod sweep;

pub use error::{Error, Result};
pub use linalg::{c64, CMatrix, C64};
