//! Convex MINLP toolkit: two competing solvers (NLP-based branch & bound and
//! outer approximation), a graph abstraction of problem instances, and a
//! from-scratch graph convolutional classifier that learns which solver to
//! run on a given instance.
//!
//! The pieces compose into a pipeline: generate or parse instances
//! ([`model`]), extract variable graphs ([`graph`]), time both solvers to
//! label instances ([`pipeline`]), train the classifier ([`gnn`]), then
//! dispatch new instances to the predicted-faster solver.

pub mod expr;
pub mod gnn;
pub mod graph;
pub mod lp;
pub mod model;
pub mod nlp;
pub mod pipeline;
pub mod solvers;
pub mod testing;

mod parallel;

pub use parallel::Parallelism;
