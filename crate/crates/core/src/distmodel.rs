//! Per-step pixel distributions and the models that produce them.
//!
//! The coder only ever sees [`PixelDistribution`]: 256 integer weights. Models
//! are anything implementing [`ProbabilityModel`]; the built-in ones are a
//! uniform model, a point mass, a trainable causal-context model and a
//! replayed stream of externally computed distributions.

use std::io::{Read, Write};

use thiserror::Error;

use crate::imageio::{ImageGrid, SequencePosition};

/// Upper bound (exclusive) on a distribution's total weight.
pub const MAX_TOTAL: u64 = 1 << 40;

const MODEL_MAGIC: &[u8; 4] = b"PSCM";
const STREAM_MAGIC: &[u8; 4] = b"PSDS";
const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("distribution has zero total weight")]
    ZeroTotal,
    #[error("distribution total {0} exceeds 2^40")]
    TotalTooLarge(u64),
    #[error("negative probability {value} for pixel value {index}")]
    NegativeProbability { index: usize, value: f64 },
    #[error("probabilities sum to {0}, outside [0.99, 1.01]")]
    BadProbabilitySum(f64),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("corpus mixes channel counts {0} and {1}")]
    MixedChannelCorpus(usize, usize),
    #[error("model expects {model} channels, image has {image}")]
    ChannelMismatch { model: usize, image: usize },
    #[error("bad model configuration: {0}")]
    BadConfig(String),
    #[error("distribution stream exhausted at step {step} (stream holds {available})")]
    StreamExhausted { step: usize, available: usize },
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("corrupt table: {0}")]
    CorruptTable(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// 256 non-negative integer weights; P(v) = weights[v] / total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelDistribution {
    weights: [u64; 256],
    total: u64,
}

impl PixelDistribution {
    pub fn new(weights: [u64; 256]) -> Result<Self, ModelError> {
        let total = weights
            .iter()
            .try_fold(0u64, |acc, &w| acc.checked_add(w))
            .ok_or(ModelError::TotalTooLarge(u64::MAX))?;
        if total == 0 {
            return Err(ModelError::ZeroTotal);
        }
        if total >= MAX_TOTAL {
            return Err(ModelError::TotalTooLarge(total));
        }
        Ok(PixelDistribution { weights, total })
    }

    pub fn uniform() -> Self {
        PixelDistribution {
            weights: [1; 256],
            total: 256,
        }
    }

    pub fn point_mass(value: u8) -> Self {
        let mut weights = [0; 256];
        weights[value as usize] = 1;
        PixelDistribution { weights, total: 1 }
    }

    pub fn weights(&self) -> &[u64; 256] {
        &self.weights
    }

    pub fn weight(&self, value: u8) -> u64 {
        self.weights[value as usize]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn probability(&self, value: u8) -> f64 {
        self.weights[value as usize] as f64 / self.total as f64
    }
}

/// Converts float probabilities into integer weights:
/// `weights[v] = floor(p[v] * 2^31) + 1`.
///
/// Scaling by a power of two is exact in IEEE doubles, so the result depends
/// only on the input bits.
pub fn weights_from_floats(probs: &[f64; 256]) -> Result<PixelDistribution, ModelError> {
    if let Some((index, &value)) = probs
        .iter()
        .enumerate()
        .find(|(_, &p)| p < 0.0 || p.is_nan())
    {
        return Err(ModelError::NegativeProbability { index, value });
    }
    let sum: f64 = probs.iter().sum();
    if !(0.99..=1.01).contains(&sum) {
        return Err(ModelError::BadProbabilitySum(sum));
    }
    let scale = (1u64 << 31) as f64;
    let mut weights = [0u64; 256];
    for (w, &p) in weights.iter_mut().zip(probs) {
        *w = (p * scale).floor() as u64 + 1;
    }
    PixelDistribution::new(weights)
}

/// Source of p(x_i | x_<i).
///
/// `prefix` holds the image generated so far; implementations must only read
/// values at sequence indices below `pos.index`.
pub trait ProbabilityModel: Sync {
    fn distribution(
        &self,
        prefix: &ImageGrid,
        pos: SequencePosition,
    ) -> Result<PixelDistribution, ModelError>;

    /// Channel count the model was built for, if it cares.
    fn channels(&self) -> Option<usize> {
        None
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UniformModel;

impl ProbabilityModel for UniformModel {
    fn distribution(&self, _: &ImageGrid, _: SequencePosition) -> Result<PixelDistribution, ModelError> {
        Ok(PixelDistribution::uniform())
    }
}

/// Always emits a point mass on one value. Zero entropy, zero capacity.
#[derive(Debug, Clone, Copy)]
pub struct DegenerateModel(pub u8);

impl ProbabilityModel for DegenerateModel {
    fn distribution(&self, _: &ImageGrid, _: SequencePosition) -> Result<PixelDistribution, ModelError> {
        Ok(PixelDistribution::point_mass(self.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextConfig {
    /// Neighbor quantization levels; the EDGE bucket is index `buckets`.
    pub buckets: u8,
    /// Pseudo-count added to every value.
    pub smooth: u32,
    pub channels: usize,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            buckets: 16,
            smooth: 1,
            channels: 1,
        }
    }
}

/// Occurrence counts of each pixel value conditioned on the bucketed
/// same-channel left and up neighbors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextModel {
    config: ContextConfig,
    counts: Vec<u64>,
}

impl ContextModel {
    pub fn empty(config: ContextConfig) -> Result<Self, ModelError> {
        if config.buckets == 0 {
            return Err(ModelError::BadConfig("buckets must be at least 1".into()));
        }
        if config.channels != 1 && config.channels != 3 {
            return Err(ModelError::BadConfig(format!(
                "{} channels (need 1 or 3)",
                config.channels
            )));
        }
        let rows = config.channels * (config.buckets as usize + 1).pow(2);
        Ok(ContextModel {
            config,
            counts: vec![0; rows * 256],
        })
    }

    pub fn config(&self) -> ContextConfig {
        self.config
    }

    pub fn edge(&self) -> usize {
        self.config.buckets as usize
    }

    pub fn context_rows(&self) -> usize {
        self.counts.len() / 256
    }

    pub fn bucket(&self, value: u8) -> usize {
        value as usize * self.config.buckets as usize / 256
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Count row for (channel, left bucket, up bucket).
    pub fn row(&self, channel: usize, left: usize, up: usize) -> &[u64] {
        let start = self.row_index(channel, left, up) * 256;
        &self.counts[start..start + 256]
    }

    fn row_index(&self, channel: usize, left: usize, up: usize) -> usize {
        let side = self.config.buckets as usize + 1;
        (channel * side + left) * side + up
    }

    fn context_of(&self, image: &ImageGrid, pos: SequencePosition) -> usize {
        let left = if pos.col == 0 {
            self.edge()
        } else {
            self.bucket(image.get(pos.row, pos.col - 1, pos.channel))
        };
        let up = if pos.row == 0 {
            self.edge()
        } else {
            self.bucket(image.get(pos.row - 1, pos.col, pos.channel))
        };
        self.row_index(pos.channel, left, up)
    }

    /// Writes the versioned little-endian PSCM format.
    pub fn save(&self, mut sink: impl Write) -> Result<(), ModelError> {
        sink.write_all(MODEL_MAGIC)?;
        sink.write_all(&FORMAT_VERSION.to_le_bytes())?;
        sink.write_all(&[self.config.channels as u8, self.config.buckets])?;
        sink.write_all(&self.config.smooth.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.counts.len() * 8);
        for c in &self.counts {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        sink.write_all(&buf)?;
        sink.flush()?;
        Ok(())
    }

    pub fn load(mut source: impl Read) -> Result<Self, ModelError> {
        let mut bytes = Vec::new();
        source.read_to_end(&mut bytes)?;
        if bytes.len() < 4 || &bytes[..4] != MODEL_MAGIC {
            return Err(ModelError::BadMagic);
        }
        if bytes.len() < 12 {
            return Err(ModelError::CorruptTable("header truncated".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(ModelError::UnsupportedVersion(version));
        }
        let config = ContextConfig {
            channels: bytes[6] as usize,
            buckets: bytes[7],
            smooth: u32::from_le_bytes(bytes[8..12].try_into().unwrap()),
        };
        let mut model = ContextModel::empty(config)
            .map_err(|e| ModelError::CorruptTable(e.to_string()))?;
        let table = &bytes[12..];
        if table.len() != model.counts.len() * 8 {
            return Err(ModelError::CorruptTable(format!(
                "table holds {} bytes, expected {}",
                table.len(),
                model.counts.len() * 8
            )));
        }
        for (c, chunk) in model.counts.iter_mut().zip(table.chunks_exact(8)) {
            *c = u64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(model)
    }
}

impl ProbabilityModel for ContextModel {
    fn distribution(
        &self,
        prefix: &ImageGrid,
        pos: SequencePosition,
    ) -> Result<PixelDistribution, ModelError> {
        if prefix.channels() != self.config.channels {
            return Err(ModelError::ChannelMismatch {
                model: self.config.channels,
                image: prefix.channels(),
            });
        }
        let start = self.context_of(prefix, pos) * 256;
        let smooth = self.config.smooth as u64;
        let mut weights = [0u64; 256];
        for (w, &c) in weights.iter_mut().zip(&self.counts[start..start + 256]) {
            *w = c + smooth;
        }
        PixelDistribution::new(weights)
    }

    fn channels(&self) -> Option<usize> {
        Some(self.config.channels)
    }
}

/// Counts every subpixel of every corpus image under its causal context.
pub fn train_context_model(
    corpus: &[ImageGrid],
    config: ContextConfig,
) -> Result<ContextModel, ModelError> {
    let first = corpus.first().ok_or(ModelError::EmptyCorpus)?;
    if let Some(other) = corpus.iter().find(|g| g.channels() != first.channels()) {
        return Err(ModelError::MixedChannelCorpus(first.channels(), other.channels()));
    }
    if first.channels() != config.channels {
        return Err(ModelError::ChannelMismatch {
            model: config.channels,
            image: first.channels(),
        });
    }
    let mut model = ContextModel::empty(config)?;
    for image in corpus {
        for pos in crate::imageio::sequence_positions(image.shape()) {
            let ctx = model.context_of(image, pos);
            model.counts[ctx * 256 + image.data()[pos.index] as usize] += 1;
        }
    }
    Ok(model)
}

/// Replays distributions computed elsewhere, one per coding step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistributionStream {
    steps: Vec<PixelDistribution>,
}

impl DistributionStream {
    pub fn new(steps: Vec<PixelDistribution>) -> Self {
        DistributionStream { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Writes the PSDS format. Every weight must fit in a u32.
    pub fn save(&self, mut sink: impl Write) -> Result<(), ModelError> {
        let count = u32::try_from(self.steps.len())
            .map_err(|_| ModelError::BadConfig("more than 2^32-1 steps".into()))?;
        let mut buf = Vec::with_capacity(10 + self.steps.len() * 1024);
        buf.extend_from_slice(STREAM_MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&count.to_le_bytes());
        for dist in &self.steps {
            for &w in dist.weights() {
                let w = u32::try_from(w)
                    .map_err(|_| ModelError::BadConfig(format!("weight {w} exceeds u32")))?;
                buf.extend_from_slice(&w.to_le_bytes());
            }
        }
        sink.write_all(&buf)?;
        sink.flush()?;
        Ok(())
    }

    pub fn load(mut source: impl Read) -> Result<Self, ModelError> {
        let mut bytes = Vec::new();
        source.read_to_end(&mut bytes)?;
        if bytes.len() < 4 || &bytes[..4] != STREAM_MAGIC {
            return Err(ModelError::BadMagic);
        }
        if bytes.len() < 10 {
            return Err(ModelError::CorruptTable("header truncated".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(ModelError::UnsupportedVersion(version));
        }
        let count = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let body = &bytes[10..];
        if body.len() != count * 1024 {
            return Err(ModelError::CorruptTable(format!(
                "stream body holds {} bytes, expected {}",
                body.len(),
                count * 1024
            )));
        }
        let steps = body
            .chunks_exact(1024)
            .enumerate()
            .map(|(i, chunk)| {
                let mut weights = [0u64; 256];
                for (w, b) in weights.iter_mut().zip(chunk.chunks_exact(4)) {
                    *w = u32::from_le_bytes(b.try_into().unwrap()) as u64;
                }
                PixelDistribution::new(weights)
                    .map_err(|e| ModelError::CorruptTable(format!("step {i}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        Ok(DistributionStream { steps })
    }
}

impl ProbabilityModel for DistributionStream {
    fn distribution(&self, _: &ImageGrid, pos: SequencePosition) -> Result<PixelDistribution, ModelError> {
        self.steps
            .get(pos.index)
            .cloned()
            .ok_or(ModelError::StreamExhausted {
                step: pos.index,
                available: self.steps.len(),
            })
    }
}
