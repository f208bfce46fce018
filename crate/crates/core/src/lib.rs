//! Self-supervised bug detection and repair for a small Python subset.
//!
//! The crate is organised as a pipeline: [`lang`] parses and prints code,
//! [`rewrite`] inserts and repairs bugs, [`graph`] turns functions into
//! typed program graphs, [`model`] scores locations and repairs with a
//! message-passing network, [`train`] co-trains a bug detector against a
//! bug selector, and [`eval`] measures the result.

pub mod lang;
pub mod rewrite;
pub mod graph;
pub mod model;
pub mod pipeline;
pub mod synth;
pub mod eval;
pub mod train;
pub mod selftest;
