//! Event-assisted joint deblurring and video super-resolution network.

pub mod align;
pub mod attention;
pub mod batch;
pub mod checkpoint;
pub mod config;
pub mod dcn;
mod error;
pub mod fixtures;
pub mod flow;
pub mod gradcheck;
pub mod infer;
pub mod layers;
pub mod loss;
pub mod network;
pub mod ops;
pub mod optim;
pub mod params;
pub mod propagate;
pub mod selfcheck;
pub mod train;
pub mod upsample;
pub mod warp;

pub use config::{ModelConfig, RfdOrder, RunConfig, TrainConfig};
pub use error::{Error, Result};
pub use network::{EvDeblurVsr, NetInput};
pub use params::ParamStore;
