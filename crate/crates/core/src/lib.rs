//! Kapranov degrees on the moduli space of stable rational curves.
//!
//! The [`engine`] evaluates intersection numbers of pullbacks of hyperplane
//! classes through a boundary recursion; [`combinatorics`] and [`oracles`]
//! provide independent criteria and formulas the recursion is checked
//! against.

pub mod acceptance;
pub mod combinatorics;
pub mod engine;
pub mod generate;
pub mod oracles;
pub mod store;
pub mod system;

pub use engine::{degree, Choice, DegreeOptions, Engine, EngineError};
pub use store::{DegreeKey, DegreeStore, StoreError};
pub use system::{normalize, pair, validate, Label, MarkSet, Pair, PairSystem, PairSystemJson};
