//! Consistency analysis and coordination synthesis for annotated dataflows.
//!
//! The pipeline: describe a [`model::LogicalDataflow`], label its streams
//! with [`analysis::analyze`], derive a [`synthesis::CoordinationPlan`], then
//! check the result empirically with the interleaving [`sim`]ulator.

pub mod analysis;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod lineage;
pub mod model;
pub mod report;
pub mod sim;
pub mod synthesis;

pub use error::{Error, Result};
