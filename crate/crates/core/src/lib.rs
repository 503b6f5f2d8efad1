//! Coded distributed matrix multiplication.
//!
//! A product `A · B` is modelled as the `nx × nz × ny` cuboid of its
//! multiply-and-accumulate operations. Partitioning that cuboid into blocks,
//! encoding the blocks with a polynomial-family erasure code, and decoding
//! from any sufficiently large subset of worker results are the building
//! blocks here. Hierarchical plans split the cuboid into layers that every
//! worker processes in sequence, each layer with its own code, so that work
//! done by slow workers on early layers is not wasted. The [`sim`] module
//! compares finishing times of these schemes under a straggler model.

pub mod codes;
pub mod cuboid;
pub mod error;
pub mod hierarchical;
pub mod matrix;
pub mod sim;

pub use codes::{CodeSpec, CodedResult, EncodedJob, Scheme};
pub use cuboid::{Axis, Cuboid, CutCategory, CutSpec, InformationBlock, TaskBlock};
pub use error::{Error, Result};
pub use hierarchical::{HierarchicalPlan, LayerSpec, LayerStrategy, WorkerQueue};
pub use matrix::{multiply, submatrix, Interval, Matrix};
pub use sim::{SimConfig, SimTrace, TimeModel};
