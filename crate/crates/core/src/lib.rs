//! Real-time reinforcement learning core.
//!
//! Finite MDPs, their real-time and turn-based augmentations, the MRP
//! algebra used to compare interaction schemes, exact tabular value
//! solves, a small reverse-mode autodiff stack, and the RTAC / SAC agents.
//!
//! The crate is `no_std` and only needs `alloc`. Enable the `std` feature
//! for runtime SIMD detection in the matrix kernels.
#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod agents;
pub mod algebra;
pub mod augment;
pub mod envs;
mod error;
pub mod mdp;
pub mod nn;
pub mod rng;
pub mod suites;
pub mod values;

pub use error::{Error, Result};
