//! Shared domain types: geometry, features, point clouds and segment graphs.

mod cloud;
pub(crate) mod feature;
mod geometry;
mod graph;
pub mod rng;
mod unionfind;

pub use cloud::PointCloud;
pub use feature::{cosine_distance, Feature, FEATURE_DIM};
pub use geometry::{RigidTransform, Vec3};
pub use graph::{SegmentGraph, SegmentNode};
pub use unionfind::DisjointSet;
