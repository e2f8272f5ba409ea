// SPDX-License-Identifier: Apache-2.0

//! Pin-assignment-aware floorplanning on a fixed-outline cell grid.
//!
//! The pipeline has three stages:
//!
//! 1. **Initialization** ([`legalizer`], [`netlist`]): random initial
//!    floorplans are legalized with a wiremask/position-mask sequential
//!    placer; multi-pin nets are split into driver-sink pairs and whitespace
//!    pockets become blank modules.
//! 2. **Pin assignment** ([`pin_graph`]): a capacity graph over module
//!    adjacencies routes every two-pin net directly or through feedthrough
//!    modules (A* over module centers, beam search over pin slots).
//! 3. **Incremental optimization** ([`optimizer`]): whitespace removal and
//!    simulated annealing over three local operators.
//!
//! The numeric layer is generic over a [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`, which is what the pipeline
//! and the CLI use.

pub mod bench_io;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod legalizer;
pub mod metrics;
pub mod model;
pub mod netlist;
pub mod optimizer;
pub mod pin_graph;

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

pub use error::{Error, Result};
pub use geometry::{Cell, CellOwner, GridCanvas, ModuleId, Rect, Region};
pub use model::{FloorplanState, ModuleKind, ModuleRecord, NetRecord, PinRef, ProblemInstance, TwoPinNet};

/// Real number type used for centers, distances and objective values.
pub trait Scalar:
    Float + FromPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal; total for every finite input.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    fn from_count(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

impl<T> Scalar for T where T: Float + FromPrimitive + Default + Debug + Display + Send + Sync + 'static {}

pub type Real = f64;
pub type Point = geometry::Point<Real>;
pub type ResourceGraph = pin_graph::ResourceGraph<Real>;
pub type AssignmentResult = pin_graph::AssignmentResult<Real>;
pub type NetOutcome = pin_graph::NetOutcome<Real>;
pub type Weights = metrics::Weights<Real>;
pub type MetricSet = metrics::MetricSet<Real>;
pub type Mask = legalizer::Mask<Real>;
