use alloc::string::String;

use thiserror::Error;

use crate::mdp::Conditioning;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid MRP: {0}")]
    InvalidMrp(String),
    #[error("policy conditions on {found}, expected {expected}")]
    SignatureMismatch {
        expected: Conditioning,
        found: Conditioning,
    },
    #[error("enumeration needs {required} trajectories, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u64 },
    #[error("incomparable state spaces: {0}")]
    IncomparableStates(String),
    #[error("step count must be at least 1")]
    ZeroSteps,
    #[error("not a valid reduction: fiber of target state {target}: {detail}")]
    FiberDisagreement { target: usize, detail: String },
    #[error("linear system is singular")]
    Singular,
    #[error("value table of {entries} entries exceeds the cap of {cap}")]
    TooLarge { entries: usize, cap: usize },
    #[error("discount must lie in [0, 1), got {0}")]
    InvalidDiscount(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("non-finite value at tape node {index} ({label})")]
    NonFinite { index: usize, label: &'static str },
    #[error("record inconsistent with environment: {0}")]
    InvalidRecord(String),
    #[error("parameter layouts differ")]
    LayoutMismatch,
}
