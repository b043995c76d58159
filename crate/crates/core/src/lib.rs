//! Axiomatic consistency checking for replicated data types.
//!
//! A [`History`] records what each process observed. An [`Execution`] adds a
//! visibility relation and one serialization per process. The checker asks
//! whether some valid execution of a history satisfies a consistency model.

pub mod axioms;
pub mod checker;
pub mod execution;
pub mod history;
pub mod models;
pub mod relation;
pub mod semantics;
pub mod simulator;
pub mod value;

pub use axioms::{Axiom, Violation};
pub use checker::{check_existential, Budget, Verdict};
pub use execution::Execution;
pub use history::{parse_history, Event, History, Operation};
pub use models::{model, ModelSpec};
pub use relation::Relation;
pub use semantics::{lookup, DataTypeSpec};
pub use value::Value;
