//! Independent computations that the recursion is checked against. None of
//! these call into the engine.

pub mod field;
pub mod gm_mds;
pub mod jacobian;
pub mod transversals;
pub mod trees;
pub mod witten;

use thiserror::Error;

use crate::system::MarkSet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("expected {expected} entries, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("{set} is not a 4-subset of {{1..{n}}}")]
    NotQuadruple { set: MarkSet, n: usize },
    #[error("split {split:?} does not partition {set}")]
    BadSplit { set: MarkSet, split: [[u8; 2]; 2] },
    #[error("tree enumeration on {n} leaves exceeds the cap of {cap}")]
    OverTreeCap { n: usize, cap: usize },
    #[error("{p} is not prime")]
    NotPrime { p: u64 },
    #[error("sample points must be distinct")]
    RepeatedPoints,
    #[error("support {index} has {got} marks, {expected} required")]
    SupportSize {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("transversal item {index}: {reason}")]
    BadTransversal { index: usize, reason: String },
    #[error("explicit generator identity failed at ({row}, {col})")]
    GeneratorIdentity { row: usize, col: usize },
    #[error("marks bound: need at least {min} marks, got {n}")]
    TooFewMarks { min: usize, n: usize },
}
