//! Answers true/false questions by growing a tree of abductive explanations
//! from a language model, compiling the logical relations between them into
//! weighted clauses, and solving the resulting weighted MAX-SAT instance.

pub mod builder;
pub mod compile;
pub mod harness;
pub mod lm;
pub mod maxsat;
mod net;
pub mod tree;
pub mod types;
pub mod verifier;

pub use net::RetryPolicy;
pub use tree::{Edge, MaieuticTree, TreeDocument};
pub use types::*;
