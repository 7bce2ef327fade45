//! Data side of event-assisted blurry video super-resolution: event
//! simulation and voxel grids, blur and LR synthesis, datasets on disk, and
//! evaluation metrics.

pub mod dataset;
mod error;
pub mod events;
pub mod frame;
pub mod kvconf;
pub mod metrics;
pub mod resize;
pub mod sample;
pub mod synth;

pub use error::{Error, Result};
pub use frame::Frame;
