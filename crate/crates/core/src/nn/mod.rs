//! Dense networks, reverse-mode gradients, the squashed-Gaussian policy
//! head, Pop-Art normalization and the Adam optimizer.

pub mod adam;
pub mod gradcheck;
mod matrix;
pub mod network;
pub mod policy;
pub mod popart;
pub mod tape;

pub use matrix::{matmul, Matrix};
pub use network::{Architecture, Layout, Network, NetworkSpec, ParamMode, ParameterVector};
pub use popart::PopArt;
pub use tape::{Tape, Var};
