//! Interpretation-engine model of high-level synthesis.
//!
//! An accelerator is described as a stored program `P` interpreted over a
//! set of storage elements `E` by a library of functions `F`. This crate
//! provides:
//!
//! * [`design`]: the `<E, P, F>` data model, routing matrix and cost vector.
//! * [`frontend`]: a small imperative source language, its task IR and two
//!   source-level optimization passes.
//! * [`fsm`]: lowering of the task IR into hierarchical state machines,
//!   state counting, structural hashing and execution.
//! * [`sim`]: a cycle-per-instruction interpreter for designs, producing
//!   traces and activity profiles.
//! * [`power`]: static/dynamic power estimation, routing calibration and
//!   cross-design prediction.

pub mod design;
pub mod frontend;
pub mod fsm;
pub mod power;
pub mod sim;
pub mod value;

pub use design::{DesignSpec, FunctionSpec, InstanceId};
pub use frontend::TaskGraph;

pub use value::Valuation;
