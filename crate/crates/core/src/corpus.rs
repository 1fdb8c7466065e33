//! Synthetic handwriting-like corpus: bright strokes on a black background,
//! 28×28 by default. Good enough to train a context model whose entropy is
//! concentrated along stroke edges.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::imageio::{ImageGrid, Shape};

pub const DIGIT_SIZE: usize = 28;

/// Distance from `p` to the segment `a`–`b`.
fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// One image of 1–3 random quadratic strokes with a one-pixel soft edge.
pub fn stroke_image(rng: &mut impl Rng, size: usize) -> ImageGrid {
    let margin = size as f64 * 0.15;
    let span = size as f64 - 2.0 * margin;
    let point = |rng: &mut dyn rand::RngCore| {
        (
            margin + rng.gen::<f64>() * span,
            margin + rng.gen::<f64>() * span,
        )
    };
    let mut segments = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        let (a, c, b) = (point(rng), point(rng), point(rng));
        let radius = rng.gen_range(0.8..1.8);
        // flatten the quadratic Bezier a-c-b into short segments
        let n = 12;
        let at = |t: f64| {
            let u = 1.0 - t;
            (
                u * u * a.0 + 2.0 * u * t * c.0 + t * t * b.0,
                u * u * a.1 + 2.0 * u * t * c.1 + t * t * b.1,
            )
        };
        for i in 0..n {
            segments.push((at(i as f64 / n as f64), at((i + 1) as f64 / n as f64), radius));
        }
    }
    let mut data = vec![0u8; size * size];
    for row in 0..size {
        for col in 0..size {
            let p = (col as f64 + 0.5, row as f64 + 0.5);
            let ink = segments
                .iter()
                .map(|&(a, b, r)| (r + 1.0 - segment_distance(p, a, b)).clamp(0.0, 1.0))
                .fold(0.0, f64::max);
            data[row * size + col] = (ink * 255.0).round() as u8;
        }
    }
    ImageGrid::new(Shape::gray(size, size), data).expect("square gray image")
}

/// `count` stroke images, reproducible from `seed`.
pub fn stroke_corpus(count: usize, size: usize, seed: u64) -> Vec<ImageGrid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| stroke_image(&mut rng, size)).collect()
}
