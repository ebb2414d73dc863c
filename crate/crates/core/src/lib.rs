//! Session-based micro-video recommendation over heterogeneous interaction
//! graphs.

pub mod data;
pub mod eval;
pub mod graph;
pub mod model;
pub mod numerics;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod train;
