//! Synthetic task operators and sample construction.

mod blur;
mod edges;
pub mod filter;
mod jpeg;
mod noise;
mod ringing;
mod rl;
mod spatial;
mod style;
mod task;
mod tone;

pub use blur::{apply_gaussian_blur, gaussian_blur_auto};
pub use edges::{edge_canny, edge_laplacian};
pub use jpeg::apply_jpeg_like;
pub use noise::{apply_gaussian_noise, apply_poisson_noise, apply_salt_pepper};
pub use ringing::apply_ringing;
pub use rl::{apply_rl_artifact, richardson_lucy};
pub use spatial::{apply_inpaint_mask, apply_pixelation, apply_rain_streaks, Mask, INPAINT_FILL};
pub use style::{quantize_levels, stylize_cartoon, stylize_pencil};
pub use task::{
    default_roster, make_sample, BucketRange, Category, Direction, PromptPair, RosterEntry, SamplePair, TaskId,
    TaskSpec,
};
pub use tone::{adjust_tone, hist_equalize, tone_curve, ToneKind};
