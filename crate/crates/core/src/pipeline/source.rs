use std::fs::File;
use std::io::{self, Read, Seek, SeekFrom};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use super::ChunkSpec;
use crate::imaging::{check_levels, parse_pgm_header, quantize_slice, ImageError, QuantizedImage};

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("chunk rows {start}..{end} fall outside an image of height {height}")]
    OutOfRange {
        start: usize,
        end: usize,
        height: usize,
    },
    #[error("chunk buffer holds {actual} bytes, expected {expected}")]
    ShortBuffer { expected: usize, actual: usize },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Counts live chunk buffers and remembers the peak.
#[derive(Debug, Clone, Default)]
pub struct ResidencyGauge {
    inner: Arc<GaugeInner>,
}

#[derive(Debug, Default)]
struct GaugeInner {
    current: AtomicUsize,
    peak: AtomicUsize,
}

impl ResidencyGauge {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn current(&self) -> usize {
        self.inner.current.load(Ordering::SeqCst)
    }

    pub fn peak(&self) -> usize {
        self.inner.peak.load(Ordering::SeqCst)
    }

    /// Registers one more resident buffer until the lease is dropped.
    pub fn lease(&self) -> Lease {
        let now = self.inner.current.fetch_add(1, Ordering::SeqCst) + 1;
        self.inner.peak.fetch_max(now, Ordering::SeqCst);
        Lease {
            gauge: self.inner.clone(),
        }
    }
}

#[derive(Debug)]
pub struct Lease {
    gauge: Arc<GaugeInner>,
}

impl Drop for Lease {
    fn drop(&mut self) {
        self.gauge.current.fetch_sub(1, Ordering::SeqCst);
    }
}

/// Quantized pixels for rows `[spec.owned_row_start, spec.buffer_row_end)`.
#[derive(Debug)]
pub struct ChunkBuffer {
    pub spec: ChunkSpec,
    pub pixels: Vec<u8>,
    _lease: Option<Lease>,
}

impl ChunkBuffer {
    pub fn new(spec: ChunkSpec, pixels: Vec<u8>, lease: Option<Lease>) -> Self {
        Self {
            spec,
            pixels,
            _lease: lease,
        }
    }
}

/// Pull interface handing out chunk buffers in any order the caller asks.
pub trait ChunkSource {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn levels(&self) -> usize;
    fn fetch(&mut self, spec: &ChunkSpec) -> Result<ChunkBuffer, SourceError>;
}

impl<S: ChunkSource + ?Sized> ChunkSource for &mut S {
    fn width(&self) -> usize {
        (**self).width()
    }
    fn height(&self) -> usize {
        (**self).height()
    }
    fn levels(&self) -> usize {
        (**self).levels()
    }
    fn fetch(&mut self, spec: &ChunkSpec) -> Result<ChunkBuffer, SourceError> {
        (**self).fetch(spec)
    }
}

fn check_rows(spec: &ChunkSpec, height: usize) -> Result<(), SourceError> {
    if spec.owned_row_start > spec.buffer_row_end || spec.buffer_row_end > height {
        return Err(SourceError::OutOfRange {
            start: spec.owned_row_start,
            end: spec.buffer_row_end,
            height,
        });
    }
    Ok(())
}

/// Serves chunks out of an image already in memory.
#[derive(Debug)]
pub struct InMemorySource<'a> {
    image: &'a QuantizedImage,
    gauge: ResidencyGauge,
}

impl<'a> InMemorySource<'a> {
    pub fn new(image: &'a QuantizedImage) -> Self {
        Self {
            image,
            gauge: ResidencyGauge::new(),
        }
    }

    pub fn gauge(&self) -> &ResidencyGauge {
        &self.gauge
    }
}

impl ChunkSource for InMemorySource<'_> {
    fn width(&self) -> usize {
        self.image.width()
    }

    fn height(&self) -> usize {
        self.image.height()
    }

    fn levels(&self) -> usize {
        self.image.levels()
    }

    fn fetch(&mut self, spec: &ChunkSpec) -> Result<ChunkBuffer, SourceError> {
        check_rows(spec, self.image.height())?;
        let w = self.image.width();
        let pixels =
            self.image.pixels()[spec.owned_row_start * w..spec.buffer_row_end * w].to_vec();
        Ok(ChunkBuffer::new(*spec, pixels, Some(self.gauge.lease())))
    }
}

/// Reads row ranges straight out of a binary PGM file and quantizes them.
#[derive(Debug)]
pub struct PgmFileSource {
    file: File,
    width: usize,
    height: usize,
    levels: usize,
    data_offset: u64,
    gauge: ResidencyGauge,
}

/// Upper bound on a PGM header with comments; longer headers are rejected.
const MAX_HEADER_BYTES: u64 = 4096;

impl PgmFileSource {
    pub fn open(path: impl AsRef<Path>, levels: usize) -> Result<Self, SourceError> {
        check_levels(levels)?;
        let mut file = File::open(path)?;
        let mut head = Vec::new();
        (&mut file).take(MAX_HEADER_BYTES).read_to_end(&mut head)?;
        let header = parse_pgm_header(&head)?;
        let expected = (header.width * header.height) as u64;
        let available = file
            .metadata()?
            .len()
            .saturating_sub(header.data_offset as u64);
        if available < expected {
            return Err(ImageError::Truncated {
                expected: expected as usize,
                actual: available as usize,
            }
            .into());
        }
        Ok(Self {
            file,
            width: header.width,
            height: header.height,
            levels,
            data_offset: header.data_offset as u64,
            gauge: ResidencyGauge::new(),
        })
    }

    pub fn gauge(&self) -> &ResidencyGauge {
        &self.gauge
    }
}

impl ChunkSource for PgmFileSource {
    fn width(&self) -> usize {
        self.width
    }

    fn height(&self) -> usize {
        self.height
    }

    fn levels(&self) -> usize {
        self.levels
    }

    fn fetch(&mut self, spec: &ChunkSpec) -> Result<ChunkBuffer, SourceError> {
        check_rows(spec, self.height)?;
        let start = self.data_offset + (spec.owned_row_start * self.width) as u64;
        let mut raw = vec![0u8; (spec.buffer_row_end - spec.owned_row_start) * self.width];
        self.file.seek(SeekFrom::Start(start))?;
        self.file.read_exact(&mut raw)?;
        let pixels = quantize_slice(&raw, self.levels);
        Ok(ChunkBuffer::new(*spec, pixels, Some(self.gauge.lease())))
    }
}

/// Adds a fixed delay per fetched byte, standing in for a slow transfer.
#[derive(Debug)]
pub struct LatencySource<S> {
    inner: S,
    nanos_per_byte: f64,
}

impl<S: ChunkSource> LatencySource<S> {
    pub fn new(inner: S, nanos_per_byte: f64) -> Self {
        Self {
            inner,
            nanos_per_byte: nanos_per_byte.max(0.0),
        }
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn nanos_per_byte(&self) -> f64 {
        self.nanos_per_byte
    }

    pub fn set_nanos_per_byte(&mut self, nanos_per_byte: f64) {
        self.nanos_per_byte = nanos_per_byte.max(0.0);
    }
}

impl<S: ChunkSource> ChunkSource for LatencySource<S> {
    fn width(&self) -> usize {
        self.inner.width()
    }

    fn height(&self) -> usize {
        self.inner.height()
    }

    fn levels(&self) -> usize {
        self.inner.levels()
    }

    fn fetch(&mut self, spec: &ChunkSpec) -> Result<ChunkBuffer, SourceError> {
        let buf = self.inner.fetch(spec)?;
        let delay = buf.pixels.len() as f64 * self.nanos_per_byte;
        if delay >= 1.0 {
            std::thread::sleep(Duration::from_nanos(delay as u64));
        }
        Ok(buf)
    }
}
