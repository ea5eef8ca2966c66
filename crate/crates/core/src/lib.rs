//! Full-reference image quality assessment from convolutional activation maps.
//!
//! A reference/distorted image pair is pushed through a pretrained
//! convolutional network; at every conv layer the two activation volumes are
//! compared channel by channel with a classical similarity metric (PSNR,
//! SSIM or HaarPSI), and the concatenated per-channel scores form the
//! feature vector that a trained regressor maps to a quality score.

pub mod archive;
pub mod dataset;
pub mod evaluation;
pub mod features;
pub mod metrics;
pub mod protocol;
pub mod regression;
pub mod synthetic;
pub mod tensor;

pub use archive::{load_archive, run_network, save_archive, NetworkDescriptor, TapPoint};
pub use metrics::{MapView, SimilarityMetric};
pub use tensor::Tensor;
