#![allow(dead_code)]

use stegosample::distmodel::ModelError;
use stegosample::{ImageGrid, PixelDistribution, ProbabilityModel, SequencePosition};

fn mix(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Causal, deliberately awkward model: sparse supports, heavy peaks, lots of
/// zero weights and exact ties, all keyed on position and the left/up
/// neighbors.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticModel {
    pub salt: u64,
}

impl ProbabilityModel for SyntheticModel {
    fn distribution(
        &self,
        prefix: &ImageGrid,
        pos: SequencePosition,
    ) -> Result<PixelDistribution, ModelError> {
        let left = if pos.col > 0 {
            prefix.get(pos.row, pos.col - 1, pos.channel) as u64
        } else {
            256
        };
        let up = if pos.row > 0 {
            prefix.get(pos.row - 1, pos.col, pos.channel) as u64
        } else {
            257
        };
        let key = mix(self.salt ^ mix(pos.index as u64) ^ (left << 20) ^ (up << 40));
        let support = 1 + (key % 6) as u32; // keep 1 in 2^support values
        let mut w = [0u64; 256];
        for (v, slot) in w.iter_mut().enumerate() {
            let h = mix(key ^ v as u64);
            if h.is_multiple_of(1 << support) {
                *slot = match h >> 60 {
                    0 => 1_000_000,
                    1..=3 => 7, // ties
                    _ => (h >> 8) % 5000,
                };
            }
        }
        w[(key >> 8) as usize % 256] += 1 + (key >> 32) % 100_000;
        PixelDistribution::new(w)
    }
}
