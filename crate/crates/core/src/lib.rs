//! Route-based localization against a 2-D vector map using 4-bit binary
//! semantic descriptors.

pub mod detector_sim;
pub mod error;
pub mod experiments;
pub mod hamming_index;
pub mod localizer;
pub mod map_ingest;
pub mod map_model;
pub mod routes;
