//! Incompleteness profiling for knowledge-graph collections.
//!
//! The pipeline enumerates the property paths of a collection ([`paths`]), retrieves
//! every entity despite endpoint quotas ([`harvest`]), records which paths each entity
//! lacks ([`vectors`]), lays entities out on a 2D map by missing-path profile
//! ([`projection`]), and summarises and compares any subset against the whole
//! ([`summaries`], [`selection`], [`export`]).

pub mod collection;
pub mod error;
pub mod export;
pub mod gateway;
pub mod harvest;
pub mod paths;
pub mod projection;
pub mod selection;
pub mod summaries;
pub mod synth;
pub mod term;
pub mod vectors;

pub use error::{Error, Result};
