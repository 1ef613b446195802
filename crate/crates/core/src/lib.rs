//! Core library of the conversational planning assistant.
//!
//! * [`data`]: planning instances and dataset ingestion
//! * [`lp`]: dense two-phase simplex
//! * [`planning`]: the production-planning model and scenario analyses
//! * [`contracts`]: tool contracts, catalog loading and NL templating
//! * [`retriever`]: embedding-based tool retrieval
//! * [`llm`]: prompt templates, completion clients and the offline stub
//! * [`tools`]: tool manager and the built-in tool handlers
//! * [`conversation`]: session state and the message pipeline

pub mod contracts;
pub mod conversation;
pub mod data;
pub mod llm;
pub mod lp;
pub mod planning;
pub mod retriever;
pub mod tools;

pub use data::{parse_instance, EntityKind, EntityRef, PlanningInstance};
pub use lp::{solve_lp, LpProblem, LpSolution, LpStatus};
pub use planning::{Plan, ScenarioSpec};
