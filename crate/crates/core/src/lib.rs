//! Bone surface delineation in B-mode ultrasound.

pub mod boost;
pub mod confmap;
pub mod delineate;
pub mod error;
pub mod features;
pub mod graphmodel;
pub mod imagecore;
pub mod metrics;
pub mod phantom;
pub mod phasesym;
pub mod pipeline;
pub mod raster;
pub mod trws;

pub use error::{Error, Result};
