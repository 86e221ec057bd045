//! The GenLV prompt-conditioned network.

mod checkpoint;
mod config;
mod genlv;
pub mod net;
mod weights;

pub use checkpoint::{Checkpoint, Moments, CKPT_FORMAT};
pub use config::ModelConfig;
pub use genlv::{images_to_tensor, tensor_to_images, tile_starts, GenLv, TILE_OVERLAP};
pub use net::{param_specs, Params};
pub use weights::{build_model, count_params, is_no_decay, Init, ParamSpec, Weights};
