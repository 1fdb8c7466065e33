//! Fixed-precision arithmetic-coding stegosampling.
//!
//! Embedding runs an arithmetic *decoder* with the secret message as the
//! code: at each step the current interval `[low, high]` is split among the
//! 256 pixel values in proportion to the model distribution, and the value
//! whose subinterval holds the message window becomes the pixel. Extraction
//! runs the matching *encoder* over the pixels and reads the same bits back.
//!
//! Both directions share [`quantize`] and [`CoderState::select`], so they
//! cannot disagree about interval boundaries. All arithmetic is integer.

mod lsb;

pub use lsb::{lsb_embed, lsb_extract, LSB_MAX_RETRIES};

use thiserror::Error;

use crate::bitio::{self, BitStream, FrameError};
use crate::distmodel::{ModelError, PixelDistribution, ProbabilityModel};
use crate::imageio::{sequence_positions, ImageGrid, Shape};
use crate::metrics::{EmbedReport, MetricError, StepStats};

pub const DEFAULT_PRC: u32 = 26;
pub const MIN_PRC: u32 = 8;
pub const MAX_PRC: u32 = 62;

#[derive(Debug, Error)]
pub enum StegoError {
    #[error("precision {0} outside [{MIN_PRC}, {MAX_PRC}]")]
    BadPrecision(u32),
    #[error("capacity exceeded: {confirmed} of {needed} message bits confirmed")]
    CapacityExceeded { confirmed: usize, needed: usize },
    #[error("pixel value {value} at step {step} has an empty subinterval")]
    UndecodablePixel { step: usize, value: u8 },
    #[error("no mass on values with LSB {parity} at step {step}")]
    NoParityMass { step: usize, parity: u8 },
    #[error("model built for {model} channels, image has {image}")]
    ChannelMismatch { model: usize, image: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Whether the message carries a length header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Framing {
    #[default]
    Framed,
    Raw,
}

/// Interval registers. `high` is inclusive, so the full interval is
/// `[0, 2^prc - 1]` and both registers fit in `prc` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoderState {
    prc: u32,
    low: u64,
    high: u64,
    steps: u64,
    confirmed: u64,
}

impl CoderState {
    /// Fresh full-interval state. Accepts any register width in `1..=62`;
    /// image-level entry points restrict it to [`MIN_PRC`]..=[`MAX_PRC`].
    pub fn new(prc: u32) -> Self {
        assert!((1..=MAX_PRC).contains(&prc), "register width {prc} out of range");
        CoderState {
            prc,
            low: 0,
            high: (1 << prc) - 1,
            steps: 0,
            confirmed: 0,
        }
    }

    /// State with explicit registers, for driving single steps in tests and
    /// golden vectors.
    pub fn with_interval(prc: u32, low: u64, high: u64) -> Self {
        let mut s = CoderState::new(prc);
        assert!(low <= high && high <= s.high, "bad interval [{low}, {high}]");
        s.low = low;
        s.high = high;
        s
    }

    pub fn prc(&self) -> u32 {
        self.prc
    }

    pub fn low(&self) -> u64 {
        self.low
    }

    pub fn high(&self) -> u64 {
        self.high
    }

    pub fn width(&self) -> u64 {
        self.high - self.low + 1
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn confirmed(&self) -> u64 {
        self.confirmed
    }

    fn mask(&self) -> u64 {
        (1 << self.prc) - 1
    }

    fn check(&self) {
        debug_assert!(self.low <= self.high && self.high <= self.mask());
        debug_assert!(
            (self.low == 0 && self.high == self.mask())
                || (self.low ^ self.high) >> (self.prc - 1) == 1,
            "unnormalized interval [{}, {}]",
            self.low,
            self.high
        );
    }

    /// Narrows to subinterval `k` of `part`, shifts out the shared prefix and
    /// returns `(prefix, length)`. The prefix bits are the top `length` bits
    /// of `prefix`'s low end, i.e. `prefix < 2^length`.
    pub fn select(&mut self, part: &QuantizedPartition, k: usize) -> (u64, u32) {
        let low = self.low + part.cut[k];
        let high = self.low + part.cut[k + 1] - 1;
        debug_assert!(low <= high, "empty subinterval {k}");
        let diff = low ^ high;
        let shared = if diff == 0 {
            self.prc
        } else {
            diff.leading_zeros() - (64 - self.prc)
        };
        let prefix = if shared == 0 { 0 } else { low >> (self.prc - shared) };
        let mask = self.mask();
        // shared == prc shifts everything out; 2^prc fits since prc <= 62
        self.low = (low << shared) & mask;
        self.high = ((high << shared) & mask) | ((1 << shared) - 1);
        self.steps += 1;
        self.confirmed += shared as u64;
        self.check();
        (prefix, shared)
    }
}

/// The current interval split among pixel values in sorted-probability order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedPartition {
    order: [u8; 256],
    rank: [u8; 256],
    /// Offsets from `low`; `cut[k]..cut[k+1]` belongs to `order[k]`.
    cut: [u64; 257],
}

impl QuantizedPartition {
    /// Builds a partition from an explicit order and per-rank widths.
    ///
    /// # Panics
    /// If `order` is not a permutation of 0..=255.
    pub fn from_widths(order: [u8; 256], widths: &[u64; 256]) -> Self {
        let mut rank = [0u8; 256];
        let mut seen = [false; 256];
        for (k, &v) in order.iter().enumerate() {
            assert!(!seen[v as usize], "order repeats value {v}");
            seen[v as usize] = true;
            rank[v as usize] = k as u8;
        }
        let mut cut = [0u64; 257];
        for k in 0..256 {
            cut[k + 1] = cut[k] + widths[k];
        }
        QuantizedPartition { order, rank, cut }
    }

    pub fn order(&self) -> &[u8; 256] {
        &self.order
    }

    pub fn cut(&self) -> &[u64; 257] {
        &self.cut
    }

    /// Total width; equals the coder interval width.
    pub fn width(&self) -> u64 {
        self.cut[256]
    }

    /// Widths in rank order.
    pub fn widths(&self) -> impl Iterator<Item = u64> + '_ {
        self.cut.windows(2).map(|c| c[1] - c[0])
    }

    pub fn rank_of(&self, value: u8) -> usize {
        self.rank[value as usize] as usize
    }

    pub fn width_of(&self, value: u8) -> u64 {
        let k = self.rank_of(value);
        self.cut[k + 1] - self.cut[k]
    }

    /// Rank whose subinterval contains `offset` (relative to `low`).
    pub fn locate(&self, offset: u64) -> usize {
        debug_assert!(offset < self.width());
        self.cut[1..].partition_point(|&c| c <= offset)
    }
}

/// Splits the state's interval among the 256 values.
///
/// Values are ranked by weight, descending, ties by ascending value. Each gets
/// `floor(width * weight / total)`; the leftover goes to rank 0, so the most
/// probable value is always selectable.
pub fn quantize(dist: &PixelDistribution, state: &CoderState) -> QuantizedPartition {
    let weights = dist.weights();
    let mut order: [u8; 256] = std::array::from_fn(|v| v as u8);
    order.sort_by_key(|&v| std::cmp::Reverse(weights[v as usize]));

    let width = state.width() as u128;
    let total = dist.total() as u128;
    let mut widths = [0u64; 256];
    for (w, &v) in widths.iter_mut().zip(&order) {
        *w = (width * weights[v as usize] as u128 / total) as u64;
    }
    let assigned: u64 = widths.iter().sum();
    widths[0] += state.width() - assigned;
    QuantizedPartition::from_widths(order, &widths)
}

pub type QuantizeFn = fn(&PixelDistribution, &CoderState) -> QuantizedPartition;

/// What happened at one coding step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub pixel_value: u8,
    pub bits_confirmed: u32,
    pub q_width: u64,
    pub width_before: u64,
    pub stats: StepStats,
}

/// Embedding step against an already computed partition; `window` is the
/// `prc`-bit message register.
pub fn embed_with_partition(
    state: &mut CoderState,
    part: &QuantizedPartition,
    window: u64,
) -> (u8, u64, u32) {
    debug_assert!(
        state.low <= window && window <= state.high,
        "message window {window} outside [{}, {}]",
        state.low,
        state.high
    );
    let k = part.locate(window - state.low);
    let (prefix, s) = state.select(part, k);
    (part.order[k], prefix, s)
}

/// Chooses the pixel whose subinterval contains the message window and
/// advances the stream past the newly confirmed bits.
pub fn embed_step(
    state: &mut CoderState,
    dist: &PixelDistribution,
    msg: &mut BitStream,
) -> Result<StepRecord, StegoError> {
    embed_step_with(quantize, state, dist, msg)
}

pub fn embed_step_with(
    quantizer: QuantizeFn,
    state: &mut CoderState,
    dist: &PixelDistribution,
    msg: &mut BitStream,
) -> Result<StepRecord, StegoError> {
    let part = quantizer(dist, state);
    let width_before = state.width();
    let window = msg.current_window(state.prc);
    let (pixel, _, s) = embed_with_partition(state, &part, window);
    msg.advance(s as usize);
    Ok(StepRecord {
        pixel_value: pixel,
        bits_confirmed: s,
        q_width: part.width_of(pixel),
        width_before,
        stats: StepStats::measure(&part, dist)?,
    })
}

/// Re-derives the interval update from an observed pixel and returns the
/// confirmed bits.
pub fn extract_step(
    state: &mut CoderState,
    dist: &PixelDistribution,
    pixel: u8,
) -> Result<Vec<bool>, StegoError> {
    let part = quantize(dist, state);
    let k = part.rank_of(pixel);
    if part.width_of(pixel) == 0 {
        return Err(StegoError::UndecodablePixel {
            step: state.steps as usize,
            value: pixel,
        });
    }
    let (prefix, s) = state.select(&part, k);
    Ok((0..s).rev().map(|i| (prefix >> i) & 1 == 1).collect())
}

fn check_prc(prc: u32) -> Result<(), StegoError> {
    if (MIN_PRC..=MAX_PRC).contains(&prc) {
        Ok(())
    } else {
        Err(StegoError::BadPrecision(prc))
    }
}

fn check_channels(model: &dyn ProbabilityModel, shape: Shape) -> Result<(), StegoError> {
    match model.channels() {
        Some(c) if c != shape.channels => Err(StegoError::ChannelMismatch {
            model: c,
            image: shape.channels,
        }),
        _ => Ok(()),
    }
}

/// Generates an image of `shape` whose pixels encode `msg`.
///
/// In [`Framing::Framed`] mode `msg` must hold framed bits (see
/// [`message_bits`]) and every one of them must be confirmed by the last step.
pub fn embed_image(
    model: &dyn ProbabilityModel,
    shape: Shape,
    msg: &mut BitStream,
    prc: u32,
    framing: Framing,
) -> Result<(ImageGrid, EmbedReport), StegoError> {
    check_prc(prc)?;
    check_channels(model, shape)?;
    let mut state = CoderState::new(prc);
    let mut image = ImageGrid::zeros(shape);
    let mut steps = Vec::with_capacity(shape.steps());
    for pos in sequence_positions(shape) {
        let dist = model.distribution(&image, pos)?;
        let record = embed_step(&mut state, &dist, msg)?;
        image.set_index(pos.index, record.pixel_value);
        steps.push(record);
    }
    if framing == Framing::Framed && msg.confirmed() < msg.payload_len() {
        return Err(StegoError::CapacityExceeded {
            confirmed: msg.confirmed(),
            needed: msg.payload_len(),
        });
    }
    Ok((image, EmbedReport { shape, prc, steps }))
}

/// Bits handed to the coder: framed and whitened, or the raw payload bits.
pub fn message_bits(payload: &[u8], framing: Framing) -> Result<Vec<bool>, StegoError> {
    Ok(match framing {
        Framing::Framed => {
            let mut bits = bitio::frame_encode(payload)?;
            bitio::whiten(&mut bits);
            bits
        }
        Framing::Raw => bitio::bytes_to_bits(payload),
    })
}

/// Inverse of [`message_bits`]; trailing padding is dropped.
pub fn payload_from_bits(mut bits: Vec<bool>, framing: Framing) -> Result<Vec<u8>, StegoError> {
    Ok(match framing {
        Framing::Framed => {
            bitio::whiten(&mut bits);
            bitio::frame_decode(&bits)?
        }
        Framing::Raw => bitio::bits_to_bytes(&bits),
    })
}

/// Frames (or not) `payload` and embeds it.
pub fn embed_payload(
    model: &dyn ProbabilityModel,
    shape: Shape,
    payload: &[u8],
    prc: u32,
    framing: Framing,
    pad_seed: Option<u64>,
) -> Result<(ImageGrid, EmbedReport), StegoError> {
    let mut msg = BitStream::new(message_bits(payload, framing)?, pad_seed);
    embed_image(model, shape, &mut msg, prc, framing)
}

/// Every confirmed bit recoverable from `image`, in order.
pub fn extract_bits(
    model: &dyn ProbabilityModel,
    image: &ImageGrid,
    prc: u32,
) -> Result<Vec<bool>, StegoError> {
    check_prc(prc)?;
    check_channels(model, image.shape())?;
    let mut state = CoderState::new(prc);
    let mut bits = Vec::new();
    for pos in sequence_positions(image.shape()) {
        let dist = model.distribution(image, pos)?;
        bits.extend(extract_step(&mut state, &dist, image.data()[pos.index])?);
    }
    Ok(bits)
}

/// Framed mode returns the original payload; raw mode returns every whole
/// byte of recovered bits.
pub fn extract_image(
    model: &dyn ProbabilityModel,
    image: &ImageGrid,
    prc: u32,
    framing: Framing,
) -> Result<Vec<u8>, StegoError> {
    payload_from_bits(extract_bits(model, image, prc)?, framing)
}
