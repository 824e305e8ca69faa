//! Dataset construction and evaluation engine for mask-guided video local
//! editing.

pub mod eval;
pub mod fixtures;
pub mod flow;
pub mod geometry;
pub mod kive;
pub mod model;
pub mod perception;
pub mod qc;
pub mod pipeline;
pub mod sampler;
