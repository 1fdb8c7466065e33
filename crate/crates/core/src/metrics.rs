//! Capacity and distortion measurements.
//!
//! Everything here is floating point and used for reporting only; nothing
//! feeds back into the coding path.

use std::io::Write;

use thiserror::Error;

use crate::distmodel::PixelDistribution;
use crate::imageio::{ImageGrid, Shape};
use crate::stegocoder::{QuantizedPartition, StepRecord};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("q assigns mass {q} to a symbol with zero probability under p")]
    AbsoluteContinuityViolated { q: f64 },
    #[error("report shapes differ: {0:?} vs {1:?}")]
    ShapeMismatch(Shape, Shape),
    #[error("no reports to aggregate")]
    NoReports,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Shannon entropy in bits; zero-mass terms contribute nothing.
pub fn entropy_bits(probs: impl IntoIterator<Item = f64>) -> f64 {
    let h: f64 = probs
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum();
    // -0.0 for point masses
    h.max(0.0)
}

pub fn entropy(dist: &PixelDistribution) -> f64 {
    let total = dist.total() as f64;
    entropy_bits(dist.weights().iter().map(|&w| w as f64 / total))
}

pub fn partition_entropy(part: &QuantizedPartition) -> f64 {
    let width = part.width() as f64;
    entropy_bits(part.widths().map(|w| w as f64 / width))
}

/// D_KL(q‖p) in bits.
pub fn kl_divergence(q: &[f64], p: &[f64]) -> Result<f64, MetricError> {
    let mut d = 0.0;
    for (&qi, &pi) in q.iter().zip(p) {
        if qi > 0.0 {
            if pi <= 0.0 {
                return Err(MetricError::AbsoluteContinuityViolated { q: qi });
            }
            d += qi * (qi / pi).log2();
        }
    }
    Ok(d.max(0.0))
}

/// D_JS(q‖p) in bits, bounded by 1.
pub fn js_divergence(q: &[f64], p: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&qi, &pi) in q.iter().zip(p) {
        let m = 0.5 * (qi + pi);
        if qi > 0.0 {
            d += 0.5 * qi * (qi / m).log2();
        }
        if pi > 0.0 {
            d += 0.5 * pi * (pi / m).log2();
        }
    }
    d.clamp(0.0, 1.0)
}

/// (q, p) as probability vectors indexed by pixel value.
fn q_and_p(part: &QuantizedPartition, dist: &PixelDistribution) -> ([f64; 256], [f64; 256]) {
    let width = part.width() as f64;
    let total = dist.total() as f64;
    let mut q = [0.0; 256];
    let mut p = [0.0; 256];
    for v in 0..=255u8 {
        q[v as usize] = part.width_of(v) as f64 / width;
        p[v as usize] = dist.weight(v) as f64 / total;
    }
    (q, p)
}

pub fn kld_q_p(part: &QuantizedPartition, dist: &PixelDistribution) -> Result<f64, MetricError> {
    let (q, p) = q_and_p(part, dist);
    kl_divergence(&q, &p)
}

pub fn jsd_q_p(part: &QuantizedPartition, dist: &PixelDistribution) -> f64 {
    let (q, p) = q_and_p(part, dist);
    js_divergence(&q, &p)
}

/// Per-step entropies and divergences.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepStats {
    pub h_p: f64,
    pub h_q: f64,
    pub kld: f64,
    pub jsd: f64,
}

impl StepStats {
    pub fn measure(part: &QuantizedPartition, dist: &PixelDistribution) -> Result<Self, MetricError> {
        let (q, p) = q_and_p(part, dist);
        Ok(StepStats {
            h_p: entropy_bits(p),
            h_q: entropy_bits(q),
            kld: kl_divergence(&q, &p)?,
            jsd: js_divergence(&q, &p),
        })
    }
}

/// Step-by-step record of one embedding run.
#[derive(Debug, Clone)]
pub struct EmbedReport {
    pub shape: Shape,
    pub prc: u32,
    pub steps: Vec<StepRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportTotals {
    pub steps: usize,
    pub bits_confirmed: u64,
    /// Bits per pixel (w·h denominator).
    pub er_pixel: f64,
    /// Bits per coding step (w·h·C denominator).
    pub er_step: f64,
    pub mean_h_p: f64,
    pub mean_h_q: f64,
    pub mean_kld: f64,
    pub mean_jsd: f64,
}

impl EmbedReport {
    pub fn bits_confirmed(&self) -> u64 {
        self.steps.iter().map(|s| s.bits_confirmed as u64).sum()
    }

    /// Σ −log2(q_width / width_before) over all steps: the self-information
    /// of the chosen pixels under q.
    pub fn self_information(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| (s.width_before as f64).log2() - (s.q_width as f64).log2())
            .sum()
    }

    pub fn totals(&self) -> ReportTotals {
        let n = self.steps.len().max(1) as f64;
        let bits = self.bits_confirmed();
        let mean = |f: fn(&StepRecord) -> f64| self.steps.iter().map(f).sum::<f64>() / n;
        ReportTotals {
            steps: self.steps.len(),
            bits_confirmed: bits,
            er_pixel: bits as f64 / self.shape.pixels() as f64,
            er_step: bits as f64 / self.shape.steps() as f64,
            mean_h_p: mean(|s| s.stats.h_p),
            mean_h_q: mean(|s| s.stats.h_q),
            mean_kld: mean(|s| s.stats.kld),
            mean_jsd: mean(|s| s.stats.jsd),
        }
    }

    /// Per-step CSV: `step,pixel,bits,q_width,width_before,h_p,h_q,kld,jsd`.
    pub fn write_steps_csv(&self, sink: impl Write) -> Result<(), MetricError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record([
            "step",
            "pixel",
            "bits",
            "q_width",
            "width_before",
            "h_p",
            "h_q",
            "kld",
            "jsd",
        ])?;
        for (i, s) in self.steps.iter().enumerate() {
            w.write_record([
                i.to_string(),
                s.pixel_value.to_string(),
                s.bits_confirmed.to_string(),
                s.q_width.to_string(),
                s.width_before.to_string(),
                s.stats.h_p.to_string(),
                s.stats.h_q.to_string(),
                s.stats.kld.to_string(),
                s.stats.jsd.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return MeanStd { mean: 0.0, std: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanStd { mean, std }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRow {
    pub image: String,
    pub totals: ReportTotals,
}

/// Per-image rows and their mean ± std summary.
#[derive(Debug, Clone)]
pub struct Summary {
    pub rows: Vec<ImageRow>,
    pub steps: MeanStd,
    pub bits: MeanStd,
    pub er_pixel: MeanStd,
    pub er_step: MeanStd,
    pub h_p: MeanStd,
    pub h_q: MeanStd,
    pub kld: MeanStd,
    pub jsd: MeanStd,
}

pub const CSV_HEADER: [&str; 9] = [
    "image", "steps", "bits", "er_pixel", "er_step", "h_p", "h_q", "kld", "jsd",
];

pub fn aggregate<'a>(
    reports: impl IntoIterator<Item = (String, &'a EmbedReport)>,
) -> Result<Summary, MetricError> {
    let rows: Vec<ImageRow> = reports
        .into_iter()
        .map(|(image, r)| ImageRow {
            image,
            totals: r.totals(),
        })
        .collect();
    if rows.is_empty() {
        return Err(MetricError::NoReports);
    }
    let col = |f: fn(&ReportTotals) -> f64| {
        MeanStd::of(&rows.iter().map(|r| f(&r.totals)).collect::<Vec<_>>())
    };
    Ok(Summary {
        steps: col(|t| t.steps as f64),
        bits: col(|t| t.bits_confirmed as f64),
        er_pixel: col(|t| t.er_pixel),
        er_step: col(|t| t.er_step),
        h_p: col(|t| t.mean_h_p),
        h_q: col(|t| t.mean_h_q),
        kld: col(|t| t.mean_kld),
        jsd: col(|t| t.mean_jsd),
        rows,
    })
}

impl Summary {
    /// One row per image, then a `summary` row with `mean±std` cells.
    pub fn write_csv(&self, sink: impl Write) -> Result<(), MetricError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            let t = &r.totals;
            w.write_record([
                r.image.clone(),
                t.steps.to_string(),
                t.bits_confirmed.to_string(),
                format!("{:.6}", t.er_pixel),
                format!("{:.6}", t.er_step),
                format!("{:.6}", t.mean_h_p),
                format!("{:.6}", t.mean_h_q),
                format!("{:.6e}", t.mean_kld),
                format!("{:.6e}", t.mean_jsd),
            ])?;
        }
        let cell = |m: &MeanStd, sci: bool| {
            if sci {
                format!("{:.4e}±{:.4e}", m.mean, m.std)
            } else {
                format!("{:.4}±{:.4}", m.mean, m.std)
            }
        };
        w.write_record([
            "summary".to_string(),
            cell(&self.steps, false),
            cell(&self.bits, false),
            cell(&self.er_pixel, false),
            cell(&self.er_step, false),
            cell(&self.h_p, false),
            cell(&self.h_q, false),
            cell(&self.kld, true),
            cell(&self.jsd, true),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// Per-step means across reports sharing one shape.
#[derive(Debug, Clone)]
pub struct PositionMeans {
    pub shape: Shape,
    pub h_p: Vec<f64>,
    pub h_q: Vec<f64>,
    pub bits: Vec<f64>,
}

pub fn position_means(reports: &[EmbedReport]) -> Result<PositionMeans, MetricError> {
    let first = reports.first().ok_or(MetricError::NoReports)?;
    let shape = first.shape;
    let n = shape.steps();
    let mut m = PositionMeans {
        shape,
        h_p: vec![0.0; n],
        h_q: vec![0.0; n],
        bits: vec![0.0; n],
    };
    for r in reports {
        if r.shape != shape {
            return Err(MetricError::ShapeMismatch(shape, r.shape));
        }
        for (i, s) in r.steps.iter().enumerate() {
            m.h_p[i] += s.stats.h_p;
            m.h_q[i] += s.stats.h_q;
            m.bits[i] += s.bits_confirmed as f64;
        }
    }
    let k = reports.len() as f64;
    for v in m.h_p.iter_mut().chain(&mut m.h_q).chain(&mut m.bits) {
        *v /= k;
    }
    Ok(m)
}

/// Averages channels per pixel, then min-max scales to 0..=255. A constant
/// field maps to 255 if positive, else 0.
fn scaled_map(shape: Shape, per_step: &[f64]) -> ImageGrid {
    let c = shape.channels;
    let per_pixel: Vec<f64> = per_step
        .chunks_exact(c)
        .map(|px| px.iter().sum::<f64>() / c as f64)
        .collect();
    let lo = per_pixel.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = per_pixel.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let data = per_pixel
        .iter()
        .map(|&v| {
            if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
                if hi > 0.0 {
                    255
                } else {
                    0
                }
            } else {
                ((v - lo) / (hi - lo) * 255.0).round() as u8
            }
        })
        .collect();
    ImageGrid::new(Shape::gray(shape.width, shape.height), data).expect("shape matches data")
}

/// Mean H(p) map and mean confirmed-bits map, as gray images.
pub fn heatmaps(reports: &[EmbedReport]) -> Result<(ImageGrid, ImageGrid), MetricError> {
    let m = position_means(reports)?;
    Ok((scaled_map(m.shape, &m.h_p), scaled_map(m.shape, &m.bits)))
}

/// Pearson correlation coefficient; NaN if either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 1e-12;

    #[test]
    fn entropies() {
        assert!((entropy(&PixelDistribution::uniform()) - 8.0).abs() < EPS);
        assert_eq!(entropy(&PixelDistribution::point_mass(3)), 0.0);
        let mut w = [0u64; 256];
        w[1] = 5;
        w[9] = 5;
        assert!((entropy(&PixelDistribution::new(w).unwrap()) - 1.0).abs() < EPS);
    }

    #[test]
    fn divergences_of_identical_distributions() {
        let p = [0.25, 0.5, 0.25];
        assert!(kl_divergence(&p, &p).unwrap().abs() < EPS);
        assert!(js_divergence(&p, &p).abs() < EPS);
    }

    #[test]
    fn kld_closed_form() {
        // 1 - log2(3)/2, evaluated independently
        let expected = 1.0 - 0.5 * 3f64.log2();
        let got = kl_divergence(&[0.5, 0.5], &[0.75, 0.25]).unwrap();
        assert!((got - expected).abs() < EPS);
        assert!((got - 0.20752).abs() < 1e-5);
    }

    #[test]
    fn disjoint_point_masses() {
        assert!((js_divergence(&[1.0, 0.0], &[0.0, 1.0]) - 1.0).abs() < EPS);
        assert!(matches!(
            kl_divergence(&[1.0, 0.0], &[0.0, 1.0]),
            Err(MetricError::AbsoluteContinuityViolated { .. })
        ));
    }

    #[test]
    fn mean_std() {
        assert_eq!(MeanStd::of(&[4.2]), MeanStd { mean: 4.2, std: 0.0 });
        let m = MeanStd::of(&[1.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.std - 2f64.sqrt()).abs() < EPS);
    }

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < EPS);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < EPS);
    }

    fn normalized(raw: &[u32]) -> Vec<f64> {
        let s: f64 = raw.iter().map(|&x| x as f64).sum();
        raw.iter().map(|&x| x as f64 / s).collect()
    }

    proptest! {
        #[test]
        fn gibbs_and_jsd_bounds(
            a in proptest::collection::vec(1u32..1000, 8),
            b in proptest::collection::vec(0u32..1000, 8),
        ) {
            prop_assume!(b.iter().any(|&x| x > 0));
            let p = normalized(&a);
            let q = normalized(&b);
            let kl = kl_divergence(&q, &p).unwrap();
            prop_assert!(kl >= 0.0);
            if a.iter().zip(&b).all(|(x, y)| x == y) {
                prop_assert!(kl < 1e-12);
            }
            let js = js_divergence(&q, &p);
            prop_assert!((0.0..=1.0).contains(&js));
            prop_assert!((js - js_divergence(&p, &q)).abs() < 1e-12);
        }
    }
}
