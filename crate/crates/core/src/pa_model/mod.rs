//! Shared model types: attachment functions, degree censuses, tree
//! snapshots and evolution logs.

mod function;
mod tree;

pub use function::{
    validate_function, Certificate, FunctionKind, PaFunction, TailRule, ValidationReport,
    Violation, ViolationKind,
};
pub use tree::{census_from_snapshot, DegreeCensus, EvolutionLog, NodeId, TreeSnapshot};
