//! Image-quality metrics and evaluation protocols.

mod metrics;
mod models;
mod protocol;
pub mod report;

pub use metrics::{mae, mean_std, mse, psnr, ssim, SSIM_SIGMA, SSIM_WINDOW};
pub use models::{Identity, ImageModel, Oracle, PromptBlind};
pub use protocol::{evaluate_corpus, mismatch_test, prompt_stability, Stability, STABILITY_POOL};
pub use report::{EvalReport, MismatchReport, TaskRecord, REPORT_VERSION};
