//! Closed-loop kernel and hyperparameter selection for kernel-based dynamics
//! models.
//!
//! The crate chooses the kernel of a regression model (SVR or GP) by Bayesian
//! optimization of the cost the model-based controller incurs on the plant,
//! rather than by the model's prediction error. It is `no_std` and only needs
//! `alloc`; IO, configuration and the CLI live in the `clms` crate.

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod bo;
pub mod error;
pub mod gp;
pub mod kernels;
pub mod linalg;
pub mod math;
pub mod optim;
pub mod plant;
pub mod rkhs;
pub mod selection;
pub mod svr;

pub use error::{Error, Result};
