//! Baseline: rejection sampling until the pixel's LSB matches the next
//! message bit. Exactly one bit per step.

use rand::distributions::{Distribution, WeightedIndex};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_channels, StegoError};
use crate::bitio::BitStream;
use crate::distmodel::{PixelDistribution, ProbabilityModel};
use crate::imageio::{sequence_positions, ImageGrid, Shape};

/// Samples drawn per step before falling back to the heaviest value of the
/// right parity.
pub const LSB_MAX_RETRIES: usize = 64;

fn heaviest_with_parity(dist: &PixelDistribution, parity: u8) -> Option<u8> {
    (0..=255u8)
        .filter(|v| v & 1 == parity && dist.weight(*v) > 0)
        // max_by_key keeps the last maximum; reverse so ties go to the lowest value
        .rev()
        .max_by_key(|&v| dist.weight(v))
}

pub fn lsb_embed(
    model: &dyn ProbabilityModel,
    shape: Shape,
    msg: &mut BitStream,
    rng_seed: u64,
) -> Result<ImageGrid, StegoError> {
    check_channels(model, shape)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut image = ImageGrid::zeros(shape);
    for pos in sequence_positions(shape) {
        let dist = model.distribution(&image, pos)?;
        let parity = msg.current_window(1) as u8;
        let fallback = heaviest_with_parity(&dist, parity).ok_or(StegoError::NoParityMass {
            step: pos.index,
            parity,
        })?;
        let sampler = WeightedIndex::new(dist.weights().iter().copied())
            .expect("distribution has positive total");
        let value = (0..LSB_MAX_RETRIES)
            .map(|_| sampler.sample(&mut rng) as u8)
            .find(|v| v & 1 == parity)
            .unwrap_or(fallback);
        image.set_index(pos.index, value);
        msg.advance(1);
    }
    Ok(image)
}

/// LSBs in coding order.
pub fn lsb_extract(image: &ImageGrid) -> Vec<bool> {
    image.data().iter().map(|v| v & 1 == 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distmodel::{DegenerateModel, UniformModel};

    #[test]
    fn lsbs_follow_message() {
        let bits = vec![true, false, true, false];
        let mut msg = BitStream::new(bits.clone(), Some(0));
        let img = lsb_embed(&UniformModel, Shape::gray(2, 2), &mut msg, 11).unwrap();
        assert_eq!(lsb_extract(&img), bits);
        assert_eq!(msg.confirmed(), 4);
    }

    #[test]
    fn extract_reads_parities() {
        let img = ImageGrid::new(Shape::gray(4, 1), vec![3, 8, 255, 0]).unwrap();
        assert_eq!(lsb_extract(&img), vec![true, false, true, false]);
    }

    #[test]
    fn point_mass_without_parity_fails() {
        let mut msg = BitStream::new(vec![true], Some(0));
        assert!(matches!(
            lsb_embed(&DegenerateModel(8), Shape::gray(1, 1), &mut msg, 0),
            Err(StegoError::NoParityMass { step: 0, parity: 1 })
        ));
        let mut msg = BitStream::new(vec![false], Some(0));
        let img = lsb_embed(&DegenerateModel(8), Shape::gray(1, 1), &mut msg, 0).unwrap();
        assert_eq!(img.data(), &[8]);
    }

    #[test]
    fn fallback_prefers_heaviest_then_lowest() {
        let mut w = [0u64; 256];
        w[0] = 1_000_000;
        w[3] = 1;
        w[5] = 1;
        let d = PixelDistribution::new(w).unwrap();
        assert_eq!(heaviest_with_parity(&d, 1), Some(3));
        assert_eq!(heaviest_with_parity(&d, 0), Some(0));
    }
}
