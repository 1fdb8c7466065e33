//! Golden vectors replayed by `stegosample selftest`.

use crate::bitio::BitStream;
use crate::distmodel::{PixelDistribution, UniformModel};
use crate::imageio::Shape;
use crate::stegocoder::{
    embed_payload, embed_step_with, extract_image, quantize, CoderState, Framing, QuantizeFn,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelftestFailure {
    pub vector: &'static str,
    pub detail: String,
}

impl std::fmt::Display for SelftestFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "vector {} failed: {}", self.vector, self.detail)
    }
}

pub const FIG3_VECTOR: &str = "fig3-prc5";
pub const PASSTHROUGH_VECTOR: &str = "uniform-byte-passthrough";
pub const FRAMED_VECTOR: &str = "framed-roundtrip";

/// Weights that, at prc = 5 on the full interval, give value 0 the units
/// [0, 13], value 4 the units [14, 15], and values 5..=20 one unit each.
pub fn fig3_distribution() -> PixelDistribution {
    let mut w = [0u64; 256];
    w[0] = 14;
    w[4] = 2;
    w[5..=20].fill(1);
    PixelDistribution::new(w).expect("positive total")
}

fn fail(vector: &'static str, detail: impl Into<String>) -> SelftestFailure {
    SelftestFailure {
        vector,
        detail: detail.into(),
    }
}

fn fig3(quantizer: QuantizeFn) -> Result<(), SelftestFailure> {
    let dist = fig3_distribution();
    let mut state = CoderState::new(5);
    let part = quantizer(&dist, &state);
    let k = part.rank_of(4);
    let sub = (part.cut()[k], part.cut()[k + 1].wrapping_sub(1));
    if sub != (14, 15) {
        return Err(fail(FIG3_VECTOR, format!("pixel 4 got subinterval {sub:?}, want (14, 15)")));
    }
    let mut msg = BitStream::new(vec![false, true, true, true, true], Some(0));
    let rec = embed_step_with(quantizer, &mut state, &dist, &mut msg)
        .map_err(|e| fail(FIG3_VECTOR, e.to_string()))?;
    let got = (rec.pixel_value, rec.bits_confirmed, state.low(), state.high());
    if got != (4, 4, 0, 31) {
        return Err(fail(
            FIG3_VECTOR,
            format!("(pixel, bits, low, high) = {got:?}, want (4, 4, 0, 31)"),
        ));
    }
    let confirmed = msg.window(0, 4);
    if confirmed != 0b0111 {
        return Err(fail(FIG3_VECTOR, format!("confirmed bits {confirmed:04b}, want 0111")));
    }
    Ok(())
}

fn passthrough(quantizer: QuantizeFn) -> Result<(), SelftestFailure> {
    let message = [0x0F, 0xF0, 0xAA, 0x55];
    let mut state = CoderState::new(26);
    let mut msg = BitStream::from_bytes(&message, Some(0));
    let mut pixels = Vec::new();
    for _ in 0..4 {
        let rec = embed_step_with(quantizer, &mut state, &PixelDistribution::uniform(), &mut msg)
            .map_err(|e| fail(PASSTHROUGH_VECTOR, e.to_string()))?;
        pixels.push(rec.pixel_value);
    }
    if pixels != message || msg.confirmed() != 32 {
        return Err(fail(
            PASSTHROUGH_VECTOR,
            format!("pixels {pixels:?} with {} bits, want {message:?} with 32", msg.confirmed()),
        ));
    }
    Ok(())
}

fn framed() -> Result<(), SelftestFailure> {
    let payload = b"selftest payload";
    let shape = Shape::gray(8, 8);
    let (image, _) = embed_payload(&UniformModel, shape, payload, 26, Framing::Framed, Some(42))
        .map_err(|e| fail(FRAMED_VECTOR, e.to_string()))?;
    let back = extract_image(&UniformModel, &image, 26, Framing::Framed)
        .map_err(|e| fail(FRAMED_VECTOR, e.to_string()))?;
    if back != payload {
        return Err(fail(FRAMED_VECTOR, "recovered payload differs"));
    }
    Ok(())
}

/// Runs every vector, stopping at the first failure.
pub fn run_with(quantizer: QuantizeFn) -> Result<Vec<&'static str>, SelftestFailure> {
    fig3(quantizer)?;
    passthrough(quantizer)?;
    framed()?;
    Ok(vec![FIG3_VECTOR, PASSTHROUGH_VECTOR, FRAMED_VECTOR])
}

pub fn run() -> Result<Vec<&'static str>, SelftestFailure> {
    run_with(quantize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stegocoder::QuantizedPartition;

    #[test]
    fn passes_on_correct_build() {
        assert_eq!(run().unwrap().len(), 3);
    }

    /// Ranks by ascending weight instead of descending.
    fn ascending(dist: &PixelDistribution, state: &CoderState) -> QuantizedPartition {
        let mut order: [u8; 256] = std::array::from_fn(|v| v as u8);
        order.sort_by_key(|&v| dist.weight(v));
        let mut widths = [0u64; 256];
        for (w, &v) in widths.iter_mut().zip(&order) {
            *w = (state.width() as u128 * dist.weight(v) as u128 / dist.total() as u128) as u64;
        }
        widths[0] += state.width() - widths.iter().sum::<u64>();
        QuantizedPartition::from_widths(order, &widths)
    }

    #[test]
    fn perturbed_quantizer_names_fig3() {
        assert_eq!(run_with(ascending).unwrap_err().vector, FIG3_VECTOR);
    }
}
