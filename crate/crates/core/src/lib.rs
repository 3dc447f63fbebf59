//! Reconstructs the full commit graph of forked Git projects, dangling
//! commits included, and estimates how long a fork took to pick up an
//! upstream patch.

pub mod archive;
pub mod graph;
pub mod heuristics;
pub mod model;
pub mod provider;
pub mod report;
pub mod sim;
