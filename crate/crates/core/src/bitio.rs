//! Bit-level message handling.
//!
//! A [`BitStream`] exposes the secret message as an MSB-first bit sequence
//! that the coder reads through a fixed-width sliding window. Reads past the
//! end of the payload are served from a seeded padding generator, so the
//! window never runs dry and the bits it sees stay uniformly distributed.
//!
//! [`frame_encode`] / [`frame_decode`] prepend and strip a 32-bit big-endian
//! length header so the extractor knows where the payload stops.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Width of the big-endian bit-count header written by [`frame_encode`].
pub const HEADER_BITS: usize = 32;

/// Public, fixed seed of the keystream applied by [`whiten`].
pub const WHITENING_SEED: u64 = 0x5354_4547_4f53_4d50;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("payload of {0} bytes does not fit a 32-bit bit-length header")]
    OversizePayload(usize),
    #[error("truncated stream: need {needed} bits, have {available}")]
    TruncatedStream { needed: usize, available: usize },
}

/// Secret message bits plus the count of bits the coder has confirmed.
#[derive(Debug, Clone)]
pub struct BitStream {
    bits: Vec<bool>,
    confirmed: usize,
    pad_seed: u64,
}

impl BitStream {
    /// Builds a stream over explicit bits. `pad_seed = None` draws a seed
    /// from OS entropy; read it back with [`BitStream::pad_seed`].
    pub fn new(bits: Vec<bool>, pad_seed: Option<u64>) -> Self {
        let pad_seed = pad_seed.unwrap_or_else(rand::random);
        BitStream {
            bits,
            confirmed: 0,
            pad_seed,
        }
    }

    pub fn from_bytes(bytes: &[u8], pad_seed: Option<u64>) -> Self {
        Self::new(bytes_to_bits(bytes), pad_seed)
    }

    pub fn payload_len(&self) -> usize {
        self.bits.len()
    }

    pub fn confirmed(&self) -> usize {
        self.confirmed
    }

    pub fn pad_seed(&self) -> u64 {
        self.pad_seed
    }

    /// Bit at an absolute offset; offsets past the payload read padding.
    pub fn bit(&self, offset: usize) -> bool {
        match self.bits.get(offset) {
            Some(&b) => b,
            None => {
                let pad = offset - self.bits.len();
                let word = padding_word(self.pad_seed, (pad / 64) as u64);
                (word >> (63 - pad % 64)) & 1 == 1
            }
        }
    }

    /// The `width` bits starting at `offset`, read as an unsigned integer
    /// with the first bit most significant.
    pub fn window(&self, offset: usize, width: u32) -> u64 {
        assert!(width <= 64, "window width {width} exceeds 64 bits");
        let mut value = 0u64;
        let mut cached: Option<(u64, u64)> = None;
        for i in 0..width as usize {
            let pos = offset + i;
            let bit = match self.bits.get(pos) {
                Some(&b) => b,
                None => {
                    let pad = pos - self.bits.len();
                    let block = (pad / 64) as u64;
                    let word = match cached {
                        Some((b, w)) if b == block => w,
                        _ => {
                            let w = padding_word(self.pad_seed, block);
                            cached = Some((block, w));
                            w
                        }
                    };
                    (word >> (63 - pad % 64)) & 1 == 1
                }
            };
            value = (value << 1) | bit as u64;
        }
        value
    }

    /// Window at the confirmed pointer.
    pub fn current_window(&self, width: u32) -> u64 {
        self.window(self.confirmed, width)
    }

    /// Marks `count` more bits as confirmed.
    pub fn advance(&mut self, count: usize) {
        self.confirmed += count;
    }
}

/// 64 padding bits for block `block` of the padding region. ChaCha8 is
/// addressed by word position, so any block can be read without generating
/// the ones before it.
fn padding_word(seed: u64, block: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(block as u128 * 2);
    rng.next_u64()
}

/// XORs `bits` with a fixed public keystream; applying it twice restores the
/// input. Framed messages are whitened before embedding because a low-entropy
/// message (the length header alone starts with ~20 zeros) drives the coder
/// into the most probable pixels and confirms bits very slowly.
pub fn whiten(bits: &mut [bool]) {
    let mut rng = ChaCha8Rng::seed_from_u64(WHITENING_SEED);
    for chunk in bits.chunks_mut(64) {
        let word = rng.next_u64();
        for (i, b) in chunk.iter_mut().enumerate() {
            *b ^= (word >> (63 - i)) & 1 == 1;
        }
    }
}

/// Unpacks bytes MSB-first.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<bool> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1 == 1))
        .collect()
}

/// Packs bits MSB-first; a trailing partial byte is dropped.
pub fn bits_to_bytes(bits: &[bool]) -> Vec<u8> {
    bits.chunks_exact(8)
        .map(|chunk| chunk.iter().fold(0u8, |acc, &b| (acc << 1) | b as u8))
        .collect()
}

/// 32-bit big-endian bit-length header followed by the payload bits.
pub fn frame_encode(payload: &[u8]) -> Result<Vec<bool>, FrameError> {
    let bit_len = payload
        .len()
        .checked_mul(8)
        .and_then(|n| u32::try_from(n).ok())
        .ok_or(FrameError::OversizePayload(payload.len()))?;
    let mut bits = bytes_to_bits(&bit_len.to_be_bytes());
    bits.extend(bytes_to_bits(payload));
    Ok(bits)
}

/// Reads the header and returns exactly that many payload bits re-packed
/// into bytes. Anything after the payload is ignored.
pub fn frame_decode(bits: &[bool]) -> Result<Vec<u8>, FrameError> {
    if bits.len() < HEADER_BITS {
        return Err(FrameError::TruncatedStream {
            needed: HEADER_BITS,
            available: bits.len(),
        });
    }
    let declared = bits[..HEADER_BITS]
        .iter()
        .fold(0u64, |acc, &b| (acc << 1) | b as u64) as usize;
    let needed = HEADER_BITS + declared;
    if bits.len() < needed {
        return Err(FrameError::TruncatedStream {
            needed,
            available: bits.len(),
        });
    }
    Ok(bits_to_bytes(&bits[HEADER_BITS..needed]))
}
