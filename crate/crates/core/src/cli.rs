//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration / corpus / model
//! problems, 3 capacity exceeded, 4 extraction failure, 5 selftest mismatch.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::bitio::BitStream;
use crate::corpus;
use crate::distmodel::{
    train_context_model, ContextConfig, ContextModel, DistributionStream, ModelError,
    ProbabilityModel, UniformModel,
};
use crate::imageio::{self, ImageError, ImageGrid, Shape};
use crate::metrics::{self, EmbedReport, MetricError};
use crate::selftest;
use crate::stegocoder::{self, Framing, StegoError, DEFAULT_PRC, MAX_PRC, MIN_PRC};

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;
pub const EXIT_EXTRACT: i32 = 4;
pub const EXIT_SELFTEST: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Config(String),
    #[error("{0}; increase image size or use --raw")]
    Capacity(StegoError),
    #[error("extraction failed: {0}")]
    Extract(String),
    #[error("{0}")]
    Selftest(selftest::SelftestFailure),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => EXIT_IO,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Capacity(_) => EXIT_CAPACITY,
            CliError::Extract(_) => EXIT_EXTRACT,
            CliError::Selftest(_) => EXIT_SELFTEST,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "stegosample", version, about = "Hide data in generated images by arithmetic-coding stegosampling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a context model from a directory of PGM/PPM images
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 16)]
        buckets: u8,
        #[arg(long, default_value_t = 1)]
        smooth: u32,
    },
    /// Generate an image carrying a message
    Embed {
        #[command(flatten)]
        model: ModelSource,
        #[arg(long)]
        message: PathBuf,
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, default_value_t = DEFAULT_PRC, value_parser = prc_parser())]
        prc: u32,
        #[arg(long)]
        raw: bool,
        /// Padding seed; drawn from OS entropy when omitted
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Recover a message from a stego image
    Extract {
        #[command(flatten)]
        model: ModelSource,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PRC, value_parser = prc_parser())]
        prc: u32,
        #[arg(long)]
        raw: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate many stego images and report capacity and distortion
    Analyze {
        #[command(flatten)]
        model: ModelSource,
        #[arg(long)]
        count: usize,
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, default_value_t = DEFAULT_PRC, value_parser = prc_parser())]
        prc: u32,
        /// Base seed; image i pads with seed + i
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_csv: PathBuf,
        #[arg(long)]
        out_entropy_map: PathBuf,
        #[arg(long)]
        out_bits_map: PathBuf,
    },
    /// Write a synthetic stroke corpus (28x28 gray PGM files)
    Corpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Replay the built-in golden vectors
    Selftest,
}

fn prc_parser() -> clap::builder::RangedI64ValueParser<u32> {
    clap::value_parser!(u32).range(MIN_PRC as i64..=MAX_PRC as i64)
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ModelSource {
    /// Trained context model (PSCM)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Uniform distribution at every step
    #[arg(long)]
    uniform: bool,
    /// Precomputed distributions (PSDS)
    #[arg(long)]
    dist_stream: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ShapeArgs {
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    #[arg(long)]
    rgb: bool,
}

impl ShapeArgs {
    fn shape(&self) -> Result<Shape, CliError> {
        Shape::new(self.width, self.height, if self.rgb { 3 } else { 1 })
            .map_err(|e| CliError::Config(e.to_string()))
    }
}

impl ModelSource {
    fn load(&self) -> Result<Box<dyn ProbabilityModel>, CliError> {
        if let Some(path) = &self.model {
            let f = fs::File::open(path).map_err(io_err(path.display().to_string()))?;
            Ok(Box::new(ContextModel::load(std::io::BufReader::new(f))?))
        } else if let Some(path) = &self.dist_stream {
            let f = fs::File::open(path).map_err(io_err(path.display().to_string()))?;
            Ok(Box::new(DistributionStream::load(std::io::BufReader::new(f))?))
        } else {
            Ok(Box::new(UniformModel))
        }
    }
}

fn framing(raw: bool) -> Framing {
    if raw {
        Framing::Raw
    } else {
        Framing::Framed
    }
}

fn read_image_file(path: &Path) -> Result<ImageGrid, CliError> {
    let bytes = fs::read(path).map_err(io_err(path.display().to_string()))?;
    imageio::parse_image(&bytes).map_err(|e| match e {
        ImageError::SinkFailure(source) => CliError::Io {
            context: path.display().to_string(),
            source,
        },
        other => CliError::Config(format!("{}: {other}", path.display())),
    })
}

fn write_image_file(path: &Path, grid: &ImageGrid) -> Result<(), CliError> {
    fs::write(path, imageio::encode_image(grid)).map_err(io_err(path.display().to_string()))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(io_err(path.display().to_string()))
}

fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir.display().to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "pgm" | "ppm" | "pnm"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn embed_error(e: StegoError) -> CliError {
    match e {
        StegoError::CapacityExceeded { .. } => CliError::Capacity(e),
        other => CliError::Config(other.to_string()),
    }
}

fn extract_error(e: StegoError) -> CliError {
    match e {
        StegoError::BadPrecision(_) | StegoError::ChannelMismatch { .. } | StegoError::Model(_) => {
            CliError::Config(e.to_string())
        }
        other => CliError::Extract(other.to_string()),
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train {
            corpus,
            out,
            buckets,
            smooth,
        } => {
            let files = corpus_files(&corpus)?;
            let images = files
                .iter()
                .map(|p| read_image_file(p))
                .collect::<Result<Vec<_>, _>>()?;
            let channels = images.first().map_or(1, |g| g.channels());
            let config = ContextConfig {
                buckets,
                smooth,
                channels,
            };
            let model = train_context_model(&images, config)?;
            model.save(create(&out)?)?;
            println!(
                "trained {} contexts on {} images ({} channel{})",
                model.context_rows(),
                images.len(),
                channels,
                if channels == 1 { "" } else { "s" }
            );
        }
        Command::Embed {
            model,
            message,
            shape,
            prc,
            raw,
            seed,
            out,
            report,
        } => {
            let model = model.load()?;
            let shape = shape.shape()?;
            let payload = fs::read(&message).map_err(io_err(message.display().to_string()))?;
            let framing = framing(raw);
            let bits = stegocoder::message_bits(&payload, framing)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let mut msg = BitStream::new(bits, seed);
            println!("padding seed {}", msg.pad_seed());
            let (image, rep) =
                stegocoder::embed_image(model.as_ref(), shape, &mut msg, prc, framing)
                    .map_err(embed_error)?;
            write_image_file(&out, &image)?;
            let totals = rep.totals();
            if let Some(path) = report {
                let name = out.display().to_string();
                metrics::aggregate([(name, &rep)])?.write_csv(create(&path)?)?;
            }
            println!(
                "{} bits confirmed over {} steps (payload {} bits): ER {:.4} bpp, {:.4} bits/step",
                totals.bits_confirmed,
                totals.steps,
                msg.payload_len(),
                totals.er_pixel,
                totals.er_step
            );
        }
        Command::Extract {
            model,
            image,
            prc,
            raw,
            out,
        } => {
            let model = model.load()?;
            let grid = read_image_file(&image)?;
            let payload = stegocoder::extract_image(model.as_ref(), &grid, prc, framing(raw))
                .map_err(extract_error)?;
            fs::write(&out, &payload).map_err(io_err(out.display().to_string()))?;
            println!("recovered {} bytes", payload.len());
        }
        Command::Analyze {
            model,
            count,
            shape,
            prc,
            seed,
            out_csv,
            out_entropy_map,
            out_bits_map,
        } => {
            if count == 0 {
                return Err(CliError::Config("--count must be at least 1".into()));
            }
            let model = model.load()?;
            let shape = shape.shape()?;
            let reports = generate_reports(model.as_ref(), shape, count, prc, seed)?;
            let summary = metrics::aggregate(
                reports
                    .iter()
                    .enumerate()
                    .map(|(i, r)| (format!("img{i:05}"), r)),
            )?;
            summary.write_csv(create(&out_csv)?)?;
            let (entropy_map, bits_map) = metrics::heatmaps(&reports)?;
            write_image_file(&out_entropy_map, &entropy_map)?;
            write_image_file(&out_bits_map, &bits_map)?;
            println!("images {count}");
            println!("ER (bpp)      {}", summary.er_pixel);
            println!("ER (bits/step) {}", summary.er_step);
            println!("H(p)          {}", summary.h_p);
            println!("H(q)          {}", summary.h_q);
            println!("KLD(q||p)     {:.4e} ± {:.4e}", summary.kld.mean, summary.kld.std);
            println!("JSD(q||p)     {:.4e} ± {:.4e}", summary.jsd.mean, summary.jsd.std);
        }
        Command::Corpus { out, count, seed } => {
            fs::create_dir_all(&out).map_err(io_err(out.display().to_string()))?;
            for (i, image) in corpus::stroke_corpus(count, corpus::DIGIT_SIZE, seed)
                .iter()
                .enumerate()
            {
                write_image_file(&out.join(format!("stroke{i:05}.pgm")), image)?;
            }
            println!("wrote {count} images to {}", out.display());
        }
        Command::Selftest => match selftest::run() {
            Ok(vectors) => {
                for v in vectors {
                    println!("ok   {v}");
                }
            }
            Err(failure) => return Err(CliError::Selftest(failure)),
        },
    }
    Ok(())
}

/// Embeds seeded random bits into `count` images; image `i` uses padding
/// seed `seed + i` so results do not depend on worker scheduling.
pub fn generate_reports(
    model: &dyn ProbabilityModel,
    shape: Shape,
    count: usize,
    prc: u32,
    seed: u64,
) -> Result<Vec<EmbedReport>, CliError> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut msg = BitStream::new(Vec::new(), Some(seed.wrapping_add(i as u64)));
            stegocoder::embed_image(model, shape, &mut msg, prc, Framing::Raw)
                .map(|(_, r)| r)
                .map_err(embed_error)
        })
        .collect()
}
