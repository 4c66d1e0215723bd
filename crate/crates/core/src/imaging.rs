//! Image loading, gray-level quantization, synthetic test images and
//! matrix serialization.

use std::f64::consts::PI;
use std::io::{self, BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::glcm::{Glcm, NormalizedGlcm};

/// Errors raised while building, decoding or encoding images.
#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image dimensions must be positive, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("pixel buffer holds {actual} values, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("gray level count {0} outside [2, 256]")]
    LevelsOutOfRange(usize),
    #[error("pixel value {value} at index {index} is not below {levels} levels")]
    ValueOutOfRange {
        index: usize,
        value: u8,
        levels: usize,
    },
    #[error("synthetic images need at least 2x2 pixels, got {width}x{height}")]
    TooSmall { width: usize, height: usize },
    #[error("bad magic number: expected P5")]
    BadMagic,
    #[error("malformed header: {0}")]
    BadHeader(&'static str),
    #[error("unsupported maxval {0}; only 255 is accepted")]
    UnsupportedMaxval(u32),
    #[error("truncated pixel data: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("malformed csv at line {line}: {reason}")]
    BadCsv { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Rectangular 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        check_dimensions(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// A `width`x`height` image filled with `value`.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }
}

/// Raster of gray levels in `[0, levels)`; the voting input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedImage {
    width: usize,
    height: usize,
    levels: usize,
    pixels: Vec<u8>,
}

impl QuantizedImage {
    pub fn new(
        width: usize,
        height: usize,
        levels: usize,
        pixels: Vec<u8>,
    ) -> Result<Self, ImageError> {
        check_levels(levels)?;
        check_dimensions(width, height, pixels.len())?;
        if let Some((index, &value)) = pixels
            .iter()
            .enumerate()
            .find(|(_, &v)| usize::from(v) >= levels)
        {
            return Err(ImageError::ValueOutOfRange {
                index,
                value,
                levels,
            });
        }
        Ok(Self {
            width,
            height,
            levels,
            pixels,
        })
    }

    /// Builds an image from nested rows, mostly for tests and small fixtures.
    pub fn from_rows(levels: usize, rows: &[&[u8]]) -> Result<Self, ImageError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(ImageError::BufferSize {
                expected: width * height,
                actual: rows.iter().map(|r| r.len()).sum(),
            });
        }
        Self::new(width, height, levels, rows.concat())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }
}

fn check_dimensions(width: usize, height: usize, len: usize) -> Result<(), ImageError> {
    if width == 0 || height == 0 {
        return Err(ImageError::EmptyDimensions { width, height });
    }
    let expected = width
        .checked_mul(height)
        .ok_or(ImageError::BadHeader("dimensions overflow"))?;
    if len != expected {
        return Err(ImageError::BufferSize {
            expected,
            actual: len,
        });
    }
    Ok(())
}

pub(crate) fn check_levels(levels: usize) -> Result<(), ImageError> {
    if (2..=256).contains(&levels) {
        Ok(())
    } else {
        Err(ImageError::LevelsOutOfRange(levels))
    }
}

/// Maps one 8-bit intensity onto `levels` equal-width bins: `floor(v * L / 256)`.
#[inline]
pub fn quantize_value(value: u8, levels: usize) -> u8 {
    (usize::from(value) * levels / 256) as u8
}

/// Reduces every intensity to `levels` gray levels with [`quantize_value`].
pub fn quantize(img: &GrayImage, levels: usize) -> Result<QuantizedImage, ImageError> {
    check_levels(levels)?;
    let pixels = quantize_slice(img.pixels(), levels);
    Ok(QuantizedImage {
        width: img.width,
        height: img.height,
        levels,
        pixels,
    })
}

pub(crate) fn quantize_slice(raw: &[u8], levels: usize) -> Vec<u8> {
    let mut lut = [0u8; 256];
    for (v, slot) in lut.iter_mut().enumerate() {
        *slot = quantize_value(v as u8, levels);
    }
    raw.iter().map(|&v| lut[usize::from(v)]).collect()
}

// ---------------------------------------------------------------------------
// PGM

/// Parsed P5 header; `data_offset` is where the raster begins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PgmHeader {
    pub width: usize,
    pub height: usize,
    pub data_offset: usize,
}

/// Parses a binary PGM header. Comments (`#` to end of line) are allowed
/// between header tokens; exactly one whitespace byte precedes the raster.
pub fn parse_pgm_header(bytes: &[u8]) -> Result<PgmHeader, ImageError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(ImageError::BadMagic);
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    let missing = ["missing width", "missing height", "missing maxval"];
    for (slot, missing) in fields.iter_mut().zip(missing) {
        skip_whitespace_and_comments(bytes, &mut pos);
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(ImageError::BadHeader(missing));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *slot = text
            .parse()
            .map_err(|_| ImageError::BadHeader("header value too large"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(ImageError::UnsupportedMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(ImageError::EmptyDimensions {
            width: width as usize,
            height: height as usize,
        });
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(ImageError::BadHeader("missing separator before raster")),
    }
    Ok(PgmHeader {
        width: width as usize,
        height: height as usize,
        data_offset: pos,
    })
}

fn skip_whitespace_and_comments(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        match bytes[*pos] {
            b'#' => {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            b if b.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
}

/// Decodes a binary PGM (`P5`, maxval 255). Trailing bytes after the raster
/// are ignored.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    let header = parse_pgm_header(bytes)?;
    let expected = header.width * header.height;
    let data = &bytes[header.data_offset..];
    if data.len() < expected {
        return Err(ImageError::Truncated {
            expected,
            actual: data.len(),
        });
    }
    GrayImage::new(header.width, header.height, data[..expected].to_vec())
}

/// Encodes `img` as a binary PGM with maxval 255.
pub fn write_pgm<W: Write>(img: &GrayImage, mut sink: W) -> Result<(), ImageError> {
    write!(sink, "P5\n{} {}\n255\n", img.width, img.height)?;
    sink.write_all(&img.pixels)?;
    sink.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Synthetic images

/// Upper bound on a smooth field's spatial frequency (radians per pixel).
/// 127.5 * MAX_OMEGA + 1 (rounding) stays below the 8-level neighbor step.
const MAX_OMEGA: f64 = 2.0 * PI / 128.0;

/// Low-frequency image: a sum of up to four seeded sinusoidal gradients.
///
/// Each component has wavelength of at least 128 pixels and the sum is
/// scaled by its total amplitude onto `[0, 255]`, so horizontally adjacent
/// pixels never differ by more than 8.
pub fn synth_smooth(width: usize, height: usize, seed: u64) -> Result<GrayImage, ImageError> {
    check_synth_size(width, height)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_components = rng.random_range(2..=4);
    let components: Vec<(f64, f64, f64, f64)> = (0..n_components)
        .map(|_| {
            let omega = rng.random_range(MAX_OMEGA / 4.0..=MAX_OMEGA);
            let direction = rng.random_range(0.0..2.0 * PI);
            let phase = rng.random_range(0.0..2.0 * PI);
            let amplitude = rng.random_range(0.5..=1.0);
            (
                omega * direction.cos(),
                omega * direction.sin(),
                phase,
                amplitude,
            )
        })
        .collect();
    let total_amplitude: f64 = components.iter().map(|c| c.3).sum();

    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let field: f64 = components
                .iter()
                .map(|&(wx, wy, phase, amp)| amp * (wx * x as f64 + wy * y as f64 + phase).sin())
                .sum();
            let value = 127.5 + 127.5 * field / total_amplitude;
            pixels.push(value.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(width, height, pixels)
}

/// Uniform random intensities over `[0, 255]`.
pub fn synth_noise(width: usize, height: usize, seed: u64) -> Result<GrayImage, ImageError> {
    check_synth_size(width, height)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = vec![0u8; width * height];
    rng.fill(pixels.as_mut_slice());
    GrayImage::new(width, height, pixels)
}

fn check_synth_size(width: usize, height: usize) -> Result<(), ImageError> {
    if width < 2 || height < 2 {
        return Err(ImageError::TooSmall { width, height });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// CSV

/// Writes `glcm` as `L` lines of `L` comma-separated counts. Row index is the
/// reference gray level, column index the associate gray level.
pub fn write_glcm_csv<W: Write>(glcm: &Glcm, mut sink: W) -> Result<(), ImageError> {
    let mut line = String::new();
    for row in glcm.rows() {
        line.clear();
        for (i, count) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&count.to_string());
        }
        line.push('\n');
        sink.write_all(line.as_bytes())?;
    }
    sink.flush()?;
    Ok(())
}

/// Same layout as [`write_glcm_csv`] with probabilities instead of counts.
pub fn write_normalized_csv<W: Write>(p: &NormalizedGlcm, mut sink: W) -> Result<(), ImageError> {
    for row in p.values().chunks_exact(p.levels()) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(sink, "{}", line.join(","))?;
    }
    sink.flush()?;
    Ok(())
}

/// Parses the output of [`write_glcm_csv`].
pub fn read_glcm_csv<R: BufRead>(source: R) -> Result<Glcm, ImageError> {
    let mut counts = Vec::new();
    let mut levels = None;
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let row: Vec<u64> = line
            .split(',')
            .map(|cell| cell.trim().parse::<u64>())
            .collect::<Result<_, _>>()
            .map_err(|e| ImageError::BadCsv {
                line: i + 1,
                reason: e.to_string(),
            })?;
        match levels {
            None => levels = Some(row.len()),
            Some(l) if l != row.len() => {
                return Err(ImageError::BadCsv {
                    line: i + 1,
                    reason: format!("expected {l} columns, found {}", row.len()),
                })
            }
            Some(_) => {}
        }
        counts.extend(row);
    }
    let levels = levels.unwrap_or(0);
    Glcm::from_counts(levels, counts).map_err(|e| ImageError::BadCsv {
        line: 0,
        reason: e.to_string(),
    })
}
