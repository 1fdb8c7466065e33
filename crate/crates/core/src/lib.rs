//! Steganographic sampling of images from explicit per-pixel distributions.
//!
//! A secret bitstream drives a fixed-precision arithmetic decoder whose
//! "symbols" are pixel values, so the generated image both looks like a
//! sample from the model and carries the message. The receiver, holding the
//! same model, runs the matching encoder over the pixels to get it back.
//!
//! - [`bitio`]: message bits, sliding window, length framing
//! - [`distmodel`]: per-step distributions and the models behind them
//! - [`stegocoder`]: the coder, plus an LSB rejection-sampling baseline
//! - [`imageio`]: PGM/PPM and the raster coding order
//! - [`metrics`]: capacity, entropy, KLD/JSD, heatmaps

pub mod bitio;
pub mod cli;
pub mod corpus;
pub mod distmodel;
pub mod imageio;
pub mod metrics;
pub mod selftest;
pub mod stegocoder;

pub use bitio::BitStream;
pub use distmodel::{
    ContextConfig, ContextModel, DegenerateModel, DistributionStream, PixelDistribution,
    ProbabilityModel, UniformModel,
};
pub use imageio::{ImageGrid, SequencePosition, Shape};
pub use metrics::EmbedReport;
pub use stegocoder::{CoderState, Framing, QuantizedPartition, StegoError, StepRecord};
