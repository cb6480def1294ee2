//! Reconstruction engine for curvilinear structures (neurites, vessels,
//! fibers) in 3D volumetric images.
//!
//! The pipeline has three stages:
//!
//! 1. [`segment`]: blockwise foreground scoring, binarization, 3D thinning and
//!    extraction of non-branching fragments into a [`graph::SegmentGraph`].
//! 2. [`connect`]: agents launched from fragment endpoints follow the
//!    structure through the image ([`flight`]) and bridge false-negative gaps.
//! 3. Proofreading: unresolved merges are reviewed through the HTTP service in
//!    [`server`], with every edit recorded in an audit log ([`proofread`]).
//!
//! [`volume`] provides the image model and synthetic tube phantoms used as
//! ground truth, [`geometry`] the spline and frame machinery, and [`metrics`]
//! skeleton-level scoring.

pub mod config;
pub mod connect;
pub mod flight;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod proofread;
pub mod segment;
pub mod server;
pub mod spatial;
pub mod volume;

/// 3-vector used for positions and directions, in µm unless noted.
pub type Vec3 = nalgebra::Vector3<f64>;
