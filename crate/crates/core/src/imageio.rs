//! Binary PGM (P5) / PPM (P6) reading and writing, and the raster coding
//! order.

use std::io::{Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("bad magic: expected P5 or P6")]
    BadMagic,
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("maxval {0} unsupported (only 255)")]
    MaxvalUnsupported(u32),
    #[error("short data: expected {expected} bytes, found {found}")]
    ShortData { expected: usize, found: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("i/o failure: {0}")]
    SinkFailure(#[from] std::io::Error),
}

/// Image shape: width, height and channel count (1 or 3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

impl Shape {
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidGrid(format!(
                "zero dimension {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::InvalidGrid(format!(
                "{channels} channels (need 1 or 3)"
            )));
        }
        Ok(Shape {
            width,
            height,
            channels,
        })
    }

    pub fn gray(width: usize, height: usize) -> Self {
        Shape::new(width, height, 1).expect("nonzero gray shape")
    }

    pub fn rgb(width: usize, height: usize) -> Self {
        Shape::new(width, height, 3).expect("nonzero rgb shape")
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    /// One coding step per subpixel.
    pub fn steps(&self) -> usize {
        self.width * self.height * self.channels
    }

    pub fn position(&self, index: usize) -> SequencePosition {
        let channel = index % self.channels;
        let pixel = index / self.channels;
        SequencePosition {
            index,
            row: pixel / self.width,
            col: pixel % self.width,
            channel,
        }
    }
}

/// A coding step's place in the raster sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequencePosition {
    pub index: usize,
    pub row: usize,
    pub col: usize,
    pub channel: usize,
}

/// Positions in coding order: rows top to bottom, columns left to right,
/// channels interleaved within each pixel.
pub fn sequence_positions(shape: Shape) -> impl Iterator<Item = SequencePosition> {
    (0..shape.steps()).map(move |i| shape.position(i))
}

/// Row-major, channel-interleaved 8-bit image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageGrid {
    shape: Shape,
    data: Vec<u8>,
}

impl ImageGrid {
    pub fn new(shape: Shape, data: Vec<u8>) -> Result<Self, ImageError> {
        let shape = Shape::new(shape.width, shape.height, shape.channels)?;
        if data.len() != shape.steps() {
            return Err(ImageError::InvalidGrid(format!(
                "data length {} != {}",
                data.len(),
                shape.steps()
            )));
        }
        Ok(ImageGrid { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        ImageGrid {
            shape,
            data: vec![0; shape.steps()],
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> u8 {
        self.data[(row * self.shape.width + col) * self.shape.channels + channel]
    }

    pub fn set_index(&mut self, index: usize, value: u8) {
        self.data[index] = value;
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&c) = self.bytes.get(self.pos) {
            if c == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, ImageError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_digit())
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::BadHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::BadHeader(format!("{what} out of range")))
    }
}

/// Parses a binary PGM/PPM from a byte buffer.
pub fn parse_image(bytes: &[u8]) -> Result<ImageGrid, ImageError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(ImageError::BadMagic),
    };
    let mut r = HeaderReader { bytes, pos: 2 };
    let width = r.number("width")? as usize;
    let height = r.number("height")? as usize;
    let maxval = r.number("maxval")?;
    if maxval != 255 {
        return Err(ImageError::MaxvalUnsupported(maxval));
    }
    // exactly one whitespace byte separates maxval from the raster
    match bytes.get(r.pos) {
        Some(c) if c.is_ascii_whitespace() => r.pos += 1,
        _ => return Err(ImageError::BadHeader("no whitespace after maxval".into())),
    }
    let shape = Shape::new(width, height, channels)
        .map_err(|e| ImageError::BadHeader(e.to_string()))?;
    let expected = shape.steps();
    let raster = &bytes[r.pos..];
    if raster.len() < expected {
        return Err(ImageError::ShortData {
            expected,
            found: raster.len(),
        });
    }
    ImageGrid::new(shape, raster[..expected].to_vec())
}

pub fn read_image(mut source: impl Read) -> Result<ImageGrid, ImageError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    parse_image(&bytes)
}

/// Canonical header (`P5\n<w> <h>\n255\n`, or P6) followed by raw samples.
pub fn write_image(grid: &ImageGrid, mut sink: impl Write) -> Result<(), ImageError> {
    let magic = if grid.channels() == 3 { "P6" } else { "P5" };
    write!(sink, "{magic}\n{} {}\n255\n", grid.width(), grid.height())?;
    sink.write_all(grid.data())?;
    sink.flush()?;
    Ok(())
}

pub fn encode_image(grid: &ImageGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(grid.data().len() + 20);
    write_image(grid, &mut out).expect("writing to a Vec cannot fail");
    out
}
