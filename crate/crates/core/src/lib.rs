//! Online nearest-neighbor learning under smoothed and dominated processes:
//! the 1-NN rule, process generators, sequential cover trees, mutually
//! labeling covers, boundary geometry and an audit harness.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cover_tree;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod labels;
pub mod learner;
pub mod measure;
pub mod metric;
pub mod processes;
pub mod rng;

pub use error::{Error, Result};
pub use measure::{MassEstimate, ReferenceMeasure};
pub use metric::{Ball, BoxRegion, MetricKind, MetricSpace, Point};
