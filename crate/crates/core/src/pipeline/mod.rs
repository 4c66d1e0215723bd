//! Chunked GLCM computation with overlapped ingestion.
//!
//! The image is cut into `K` row blocks. Chunk `i` *owns* a contiguous range
//! of anchor rows and its buffer extends `d` halo rows further down (none for
//! 0°, whose pairs never leave a row). A chunk votes only for anchors it owns
//! and reads halo rows without voting for them, so every in-bounds pair is
//! counted exactly once.
//!
//! [`compute_glcm_chunked`] runs a depth-2 pipeline: one thread pulls chunk
//! `i + 1` from the [`ChunkSource`] while the caller's thread votes on chunk
//! `i`. The hand-off is a rendezvous channel, so at most two chunk buffers are
//! alive at any moment.

mod source;

use std::sync::mpsc;
use std::thread;

use serde::Serialize;
use thiserror::Error;

use crate::engine::{vote_privatized_view, ExecutionPlan};
use crate::glcm::{valid_pair_count, Angle, Glcm, GlcmError, GlcmParams, RasterView};

pub use source::{
    ChunkBuffer, ChunkSource, InMemorySource, LatencySource, Lease, PgmFileSource, ResidencyGauge,
    SourceError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("chunk count must be at least 1")]
    ZeroChunks,
    #[error("{chunks} chunks cannot split an image of height {height}")]
    TooManyChunks { chunks: usize, height: usize },
    #[error(transparent)]
    Glcm(#[from] GlcmError),
    #[error("chunk {chunk}: {source}")]
    Source {
        chunk: usize,
        #[source]
        source: SourceError,
    },
    #[error("chunk {chunk}: gray value {value} is not below {levels} levels")]
    BadChunkValue {
        chunk: usize,
        value: u8,
        levels: usize,
    },
}

/// One row block of a partitioned image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChunkSpec {
    pub index: usize,
    pub owned_row_start: usize,
    pub owned_row_end: usize,
    /// Exclusive end of the rows the chunk's buffer holds (owned plus halo).
    pub buffer_row_end: usize,
    pub chunk_count: usize,
}

impl ChunkSpec {
    pub fn owned_rows(&self) -> usize {
        self.owned_row_end - self.owned_row_start
    }

    pub fn buffer_rows(&self) -> usize {
        self.buffer_row_end - self.owned_row_start
    }

    pub fn halo_rows(&self) -> usize {
        self.buffer_row_end - self.owned_row_end
    }
}

/// Halo rows needed below an owned block.
pub fn halo_rows(params: &GlcmParams) -> usize {
    match params.angle() {
        Angle::Deg0 => 0,
        Angle::Deg45 | Angle::Deg90 | Angle::Deg135 => params.distance(),
    }
}

/// Splits `height` rows into `k` owned blocks (the first `height mod k` get
/// one extra row) and attaches halos.
///
/// A halo never runs past the bottom of the image: when the rows below a
/// block are fewer than `d`, the buffer stops at `height` and the anchors
/// whose neighbor would fall outside are simply out of bounds.
pub fn partition(
    width: usize,
    height: usize,
    params: &GlcmParams,
    k: usize,
) -> Result<Vec<ChunkSpec>, PipelineError> {
    valid_pair_count(width, height, params)?;
    if k == 0 {
        return Err(PipelineError::ZeroChunks);
    }
    if k > height {
        return Err(PipelineError::TooManyChunks { chunks: k, height });
    }
    let halo = halo_rows(params);
    let (base, extra) = (height / k, height % k);
    let mut start = 0;
    Ok((0..k)
        .map(|index| {
            let end = start + base + usize::from(index < extra);
            let buffer_row_end = if index + 1 == k {
                height
            } else {
                (end + halo).min(height)
            };
            let spec = ChunkSpec {
                index,
                owned_row_start: start,
                owned_row_end: end,
                buffer_row_end,
                chunk_count: k,
            };
            start = end;
            spec
        })
        .collect())
}

/// Elementwise sum of per-chunk matrices.
pub fn merge_chunk_glcms(parts: &[Glcm]) -> Result<Glcm, PipelineError> {
    let first = parts.first().ok_or(GlcmError::EmptyReduction)?;
    let levels = first.levels();
    let mut merged = Glcm::zeros(levels);
    for part in parts {
        if part.levels() != levels {
            return Err(GlcmError::LevelMismatch {
                image: part.levels(),
                params: levels,
            }
            .into());
        }
        for (m, &c) in merged.counts_mut().iter_mut().zip(part.counts()) {
            *m += c;
        }
    }
    Ok(merged)
}

fn check_source<S: ChunkSource>(
    source: &S,
    params: &GlcmParams,
    k: usize,
) -> Result<Vec<ChunkSpec>, PipelineError> {
    if source.levels() != params.levels() {
        return Err(GlcmError::LevelMismatch {
            image: source.levels(),
            params: params.levels(),
        }
        .into());
    }
    partition(source.width(), source.height(), params, k)
}

fn vote_chunk(
    spec: &ChunkSpec,
    buf: &ChunkBuffer,
    width: usize,
    params: &GlcmParams,
    plan: &ExecutionPlan,
) -> Result<Glcm, PipelineError> {
    let chunk = spec.index;
    let expected = spec.buffer_rows() * width;
    if buf.pixels.len() != expected {
        return Err(PipelineError::Source {
            chunk,
            source: SourceError::ShortBuffer {
                expected,
                actual: buf.pixels.len(),
            },
        });
    }
    if let Some(&value) = buf.pixels.iter().max() {
        if usize::from(value) >= params.levels() {
            return Err(PipelineError::BadChunkValue {
                chunk,
                value,
                levels: params.levels(),
            });
        }
    }
    let view = RasterView {
        width,
        rows: spec.buffer_rows(),
        pixels: &buf.pixels,
    };
    Ok(vote_privatized_view(&view, 0..spec.owned_rows(), params, plan).reduce())
}

/// Overlapped chunked computation; equals the serial GLCM of the full image.
pub fn compute_glcm_chunked<S: ChunkSource + Send>(
    source: S,
    params: &GlcmParams,
    plan: &ExecutionPlan,
    k: usize,
) -> Result<Glcm, PipelineError> {
    let specs = check_source(&source, params, k)?;
    let width = source.width();

    thread::scope(|s| {
        let (tx, rx) = mpsc::sync_channel::<Result<ChunkBuffer, PipelineError>>(0);
        let specs_ref = &specs;
        s.spawn(move || {
            let mut source = source;
            for spec in specs_ref {
                let msg = source.fetch(spec).map_err(|e| PipelineError::Source {
                    chunk: spec.index,
                    source: e,
                });
                let failed = msg.is_err();
                if tx.send(msg).is_err() || failed {
                    break;
                }
            }
        });

        let mut parts = Vec::with_capacity(specs.len());
        for (spec, msg) in specs.iter().zip(rx.iter()) {
            let buf = msg?;
            parts.push(vote_chunk(spec, &buf, width, params, plan)?);
        }
        // the ingest thread stops early only after sending an error
        debug_assert_eq!(parts.len(), specs.len());
        merge_chunk_glcms(&parts)
    })
}

/// Same chunks, no overlap: each chunk is fully ingested, then voted on.
pub fn compute_glcm_chunked_sequential<S: ChunkSource>(
    mut source: S,
    params: &GlcmParams,
    plan: &ExecutionPlan,
    k: usize,
) -> Result<Glcm, PipelineError> {
    let specs = check_source(&source, params, k)?;
    let width = source.width();
    let parts = specs
        .iter()
        .map(|spec| {
            let buf = source.fetch(spec).map_err(|e| PipelineError::Source {
                chunk: spec.index,
                source: e,
            })?;
            vote_chunk(spec, &buf, width, params, plan)
        })
        .collect::<Result<Vec<_>, _>>()?;
    merge_chunk_glcms(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{plan, DEFAULT_SCRATCH_BUDGET};
    use crate::glcm::{compute_glcm_serial, neighbor_offset};
    use crate::imaging::{quantize, synth_noise, QuantizedImage};

    fn params(d: usize, angle: Angle, levels: usize) -> GlcmParams {
        GlcmParams::new(d, angle, levels).unwrap()
    }

    #[test]
    fn vertical_partition_of_1024() {
        let specs = partition(1024, 1024, &params(1, Angle::Deg90, 8), 4).unwrap();
        let owned: Vec<_> = specs
            .iter()
            .map(|s| (s.owned_row_start, s.owned_row_end))
            .collect();
        assert_eq!(owned, vec![(0, 256), (256, 512), (512, 768), (768, 1024)]);
        let ends: Vec<_> = specs.iter().map(|s| s.buffer_row_end).collect();
        assert_eq!(ends, vec![257, 513, 769, 1024]);
        // every owned anchor's neighbor is in its chunk's buffer
        let (dr, _) = neighbor_offset(&params(1, Angle::Deg90, 8));
        for s in &specs {
            for r in s.owned_row_start..s.owned_row_end {
                let n = r + dr as usize;
                assert!(n >= 1024 || n < s.buffer_row_end);
            }
        }
    }

    #[test]
    fn single_chunk_has_no_halo() {
        let specs = partition(10, 10, &params(2, Angle::Deg45, 8), 1).unwrap();
        assert_eq!(specs.len(), 1);
        assert_eq!(
            (
                specs[0].owned_row_start,
                specs[0].owned_row_end,
                specs[0].buffer_row_end
            ),
            (0, 10, 10)
        );
    }

    #[test]
    fn uneven_split_front_loads() {
        let specs = partition(10, 10, &params(1, Angle::Deg0, 8), 3).unwrap();
        let sizes: Vec<_> = specs.iter().map(ChunkSpec::owned_rows).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        assert!(specs.iter().all(|s| s.halo_rows() == 0));
    }

    #[test]
    fn halo_clamps_at_bottom() {
        let specs = partition(8, 5, &params(4, Angle::Deg135, 4), 3).unwrap();
        let ends: Vec<_> = specs.iter().map(|s| s.buffer_row_end).collect();
        assert_eq!(ends, vec![5, 5, 5]);
    }

    #[test]
    fn partition_errors() {
        let p = params(1, Angle::Deg0, 8);
        assert!(matches!(
            partition(8, 8, &p, 0),
            Err(PipelineError::ZeroChunks)
        ));
        assert!(matches!(
            partition(8, 8, &p, 9),
            Err(PipelineError::TooManyChunks {
                chunks: 9,
                height: 8
            })
        ));
        assert!(matches!(
            partition(8, 3, &params(3, Angle::Deg90, 8), 1),
            Err(PipelineError::Glcm(GlcmError::DegenerateGeometry { .. }))
        ));
    }

    #[test]
    fn chunked_matches_serial_and_holds_two_buffers() {
        let img = quantize(&synth_noise(33, 41, 5).unwrap(), 8).unwrap();
        for angle in Angle::ALL {
            for d in [1, 4] {
                let p = params(d, angle, 8);
                let serial = compute_glcm_serial(&img, &p).unwrap();
                for k in [1, 2, 3, 8, 41] {
                    let pl = plan(8, DEFAULT_SCRATCH_BUDGET, 2);
                    let mut src = InMemorySource::new(&img);
                    assert_eq!(compute_glcm_chunked(&mut src, &p, &pl, k).unwrap(), serial);
                    assert!(src.gauge().peak() <= 2);
                    assert_eq!(src.gauge().current(), 0);
                    let src = InMemorySource::new(&img);
                    assert_eq!(
                        compute_glcm_chunked_sequential(src, &p, &pl, k).unwrap(),
                        serial
                    );
                }
            }
        }
    }

    #[test]
    fn merge_examples() {
        let a = Glcm::from_counts(2, vec![1, 2, 3, 4]).unwrap();
        let b = Glcm::from_counts(2, vec![0, 1, 0, 1]).unwrap();
        let m = merge_chunk_glcms(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(m.counts(), &[1, 3, 3, 5]);
        assert_eq!(merge_chunk_glcms(&[b.clone(), a.clone()]).unwrap(), m);
        assert_eq!(merge_chunk_glcms(std::slice::from_ref(&a)).unwrap(), a);
        assert!(matches!(
            merge_chunk_glcms(&[a, Glcm::zeros(3)]),
            Err(PipelineError::Glcm(GlcmError::LevelMismatch { .. }))
        ));
    }

    struct FailingSource<'a> {
        inner: InMemorySource<'a>,
        fail_at: usize,
    }

    impl ChunkSource for FailingSource<'_> {
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
            if spec.index == self.fail_at {
                return Err(SourceError::Io(std::io::Error::other("link dropped")));
            }
            self.inner.fetch(spec)
        }
    }

    #[test]
    fn source_failure_names_the_chunk() {
        let img = QuantizedImage::new(8, 8, 4, vec![1; 64]).unwrap();
        let p = params(1, Angle::Deg90, 4);
        let pl = plan(4, DEFAULT_SCRATCH_BUDGET, 1);
        let src = FailingSource {
            inner: InMemorySource::new(&img),
            fail_at: 2,
        };
        let err = compute_glcm_chunked(src, &p, &pl, 4).unwrap_err();
        assert!(
            matches!(err, PipelineError::Source { chunk: 2, .. }),
            "{err}"
        );
        let src = FailingSource {
            inner: InMemorySource::new(&img),
            fail_at: 0,
        };
        let err = compute_glcm_chunked_sequential(src, &p, &pl, 4).unwrap_err();
        assert!(matches!(err, PipelineError::Source { chunk: 0, .. }));
    }

    struct ShortSource<'a>(InMemorySource<'a>);

    impl ChunkSource for ShortSource<'_> {
        fn width(&self) -> usize {
            self.0.width()
        }
        fn height(&self) -> usize {
            self.0.height()
        }
        fn levels(&self) -> usize {
            self.0.levels()
        }
        fn fetch(&mut self, spec: &ChunkSpec) -> Result<ChunkBuffer, SourceError> {
            let mut buf = self.0.fetch(spec)?;
            if spec.index == 1 {
                buf.pixels.pop();
            }
            Ok(buf)
        }
    }

    #[test]
    fn short_buffer_is_rejected() {
        let img = QuantizedImage::new(8, 8, 4, vec![1; 64]).unwrap();
        let p = params(1, Angle::Deg0, 4);
        let pl = plan(4, DEFAULT_SCRATCH_BUDGET, 1);
        let err =
            compute_glcm_chunked(ShortSource(InMemorySource::new(&img)), &p, &pl, 2).unwrap_err();
        assert!(matches!(
            err,
            PipelineError::Source {
                chunk: 1,
                source: SourceError::ShortBuffer { .. }
            }
        ));
    }

    #[test]
    fn level_mismatch_with_source() {
        let img = QuantizedImage::new(8, 8, 4, vec![1; 64]).unwrap();
        let pl = plan(8, DEFAULT_SCRATCH_BUDGET, 1);
        let err = compute_glcm_chunked(
            InMemorySource::new(&img),
            &params(1, Angle::Deg0, 8),
            &pl,
            2,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            PipelineError::Glcm(GlcmError::LevelMismatch { .. })
        ));
    }
}
