//! Low-light blur data synthesis and the numerical core of a joint
//! low-light enhancement and deblurring network.
//!
//! The synthesis side ([`colorcore`], [`darkener`], [`blursynth`],
//! [`degrade`]) turns sharp high-frame-rate sequences into paired
//! low-light blurry / normal-light sharp images. The network side
//! ([`kernels`], [`net`]) implements every layer with a hand-written
//! backward pass and a finite-difference checker.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blursynth;
pub mod colorcore;
pub mod darkener;
pub mod degrade;
pub mod error;
pub mod kernels;
pub mod net;
pub mod scenes;
pub mod seed;
pub mod tensorio;

pub use error::{Error, Result};
