pub mod error;
pub mod image;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
pub use image::Image;
pub mod corpus;
pub mod fsutil;
pub mod model;
pub mod train;
pub mod eval;
pub mod pipeline;
