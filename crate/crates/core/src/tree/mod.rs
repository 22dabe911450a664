//! Binary-tree addressing, parity roles, and supermartingale valuations.

mod measure;
mod node;
mod valuation;

pub use measure::{Measure, MeasureViolation};
pub use node::{NodeError, NodeId, ParityRole, MAX_DEPTH};
pub use valuation::{
    min_nonincreasing_path, RaiseError, RootRule, Valuation, ValuationError, ValuationRecord, Violation,
    ViolationKind, Strictness,
};
