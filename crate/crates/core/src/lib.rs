//! Hierarchical Bayesian reasoning.
//!
//! Models are written in a small declarative language ([`netlang`]), compiled
//! into loop-free networks ([`compiler`]) and queried through sessions that
//! run exact λ/π propagation ([`engine`]). Class hierarchies ([`taxonomy`]),
//! influence diagrams ([`influence`]) and an establish-refine controller
//! ([`classifier`]) sit on top.

pub mod classifier;
pub mod compiler;
pub mod engine;
pub mod error;
pub mod gate;
pub mod influence;
pub mod model;
pub mod netlang;
pub mod random;
pub mod taxonomy;

pub use compiler::{compile, compile_source, CompileOptions, CompiledModel};
pub use engine::{Session, SessionOptions};
pub use error::{Error, Result, SourceSpan};
pub use gate::{BoolExpr, GateSpec};
pub use model::{BeliefNetwork, BeliefTable, Cpt, Evidence, Finding, LikelihoodVector, Quantification, Variable};
