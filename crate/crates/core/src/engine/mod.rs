//! Data-parallel GLCM voting.
//!
//! Two modes share one anchor enumeration:
//!
//! * **shared**: every worker increments one `L`x`L` accumulator with atomic
//!   read-modify-write, so concurrent votes for the same cell serialize.
//! * **privatized**: anchors are split into contiguous row stripes, one per
//!   worker group. Each group owns `R` private 32-bit sub-GLCMs; lane `i` of
//!   the group votes into copy `i mod R`. All sub-GLCMs are summed into a
//!   64-bit [`Glcm`] once every group has finished.
//!
//! Both produce exactly the serial result.

mod plan;

use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;

use serde::Serialize;

use crate::glcm::{
    check_inputs, compute_glcm_serial, neighbor_offset, Glcm, GlcmError, GlcmParams, RasterView,
};
use crate::imaging::QuantizedImage;

pub use plan::{
    detect_workers, plan, ExecutionPlan, COUNTER_BYTES, DEFAULT_GROUP_SIZE, DEFAULT_SCRATCH_BUDGET,
    MAX_COPIES, WORKERS_ENV,
};

/// Largest number of votes one group may cast; keeps every 32-bit copy
/// counter from wrapping.
pub const MAX_GROUP_VOTES: u64 = u32::MAX as u64;

/// Vote concentration, a hardware-independent proxy for atomic collision
/// pressure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContentionStats {
    pub total_votes: u64,
    pub hottest_cell_votes: u64,
    /// `(reference gray, associate gray)`; ties resolve to the lowest flat index.
    pub hottest_cell_index: (usize, usize),
    /// Each sub-GLCM's count at the hottest cell, ordered group-major.
    /// Empty outside privatized mode.
    pub per_copy_hottest: Vec<u64>,
    pub concentration: f64,
}

impl ContentionStats {
    pub fn from_glcm(glcm: &Glcm) -> Self {
        let (index, votes) = glcm.hottest();
        let total = glcm.total();
        Self {
            total_votes: total,
            hottest_cell_votes: votes,
            hottest_cell_index: (index / glcm.levels(), index % glcm.levels()),
            per_copy_hottest: Vec::new(),
            concentration: if total == 0 {
                0.0
            } else {
                votes as f64 / total as f64
            },
        }
    }

    fn from_subs(glcm: &Glcm, subs: &SubGlcms) -> Self {
        let mut stats = Self::from_glcm(glcm);
        let (row, col) = stats.hottest_cell_index;
        let pos = row * glcm.levels() + col;
        stats.per_copy_hottest = subs.copies().map(|c| u64::from(c[pos])).collect();
        stats
    }
}

/// Vote concentration of the exact GLCM.
pub fn contention_profile(
    img: &QuantizedImage,
    params: &GlcmParams,
) -> Result<ContentionStats, GlcmError> {
    compute_glcm_serial(img, params).map(|g| ContentionStats::from_glcm(&g))
}

/// Splits `rows` into `parts` contiguous, near-equal ranges; the first
/// `len % parts` ranges get one extra row.
pub(crate) fn split_even(rows: Range<usize>, parts: usize) -> Vec<Range<usize>> {
    let len = rows.len();
    let parts = parts.clamp(1, len.max(1));
    let (base, extra) = (len / parts, len % parts);
    let mut start = rows.start;
    (0..parts)
        .map(|i| {
            let end = start + base + usize::from(i < extra);
            let r = start..end;
            start = end;
            r
        })
        .collect()
}

/// Anchor rows of `view` within `rows` whose neighbor row is present.
fn voting_rows(view: &RasterView<'_>, rows: Range<usize>, dr: usize) -> Range<usize> {
    let end = rows.end.min(view.rows.saturating_sub(dr));
    rows.start..end.max(rows.start)
}

// ---------------------------------------------------------------------------
// Shared accumulator

/// Every worker votes into one atomic accumulator.
pub fn compute_glcm_shared(
    img: &QuantizedImage,
    params: &GlcmParams,
    plan: &ExecutionPlan,
) -> Result<(Glcm, ContentionStats), GlcmError> {
    check_inputs(img, params)?;
    let levels = params.levels();
    let offset = neighbor_offset(params);
    let view = RasterView::of(img);
    let acc: Vec<AtomicU64> = (0..levels * levels).map(|_| AtomicU64::new(0)).collect();

    let rows = voting_rows(&view, 0..img.height(), offset.0 as usize);
    let stripes = split_even(rows, plan.worker_count);
    let vote = |stripe: Range<usize>| {
        view.for_each_pair(stripe, offset, levels, |pos| {
            acc[pos].fetch_add(1, Ordering::Relaxed);
        })
    };
    if stripes.len() == 1 {
        vote(stripes[0].clone());
    } else {
        thread::scope(|s| {
            for stripe in stripes {
                s.spawn(move || vote(stripe));
            }
        });
    }

    let counts = acc.into_iter().map(AtomicU64::into_inner).collect();
    let glcm = Glcm::from_counts(levels, counts)?;
    let stats = ContentionStats::from_glcm(&glcm);
    Ok((glcm, stats))
}

// ---------------------------------------------------------------------------
// Privatized copies

/// All private sub-GLCMs of a privatized run, before reduction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubGlcms {
    levels: usize,
    copies_per_group: usize,
    groups: usize,
    counters: Vec<u32>,
}

impl SubGlcms {
    fn zeros(levels: usize, copies_per_group: usize, groups: usize) -> Self {
        Self {
            levels,
            copies_per_group,
            groups,
            counters: vec![0; levels * levels * copies_per_group * groups],
        }
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn copies_per_group(&self) -> usize {
        self.copies_per_group
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    /// Counters of copy `copy` in group `group`.
    pub fn copy(&self, group: usize, copy: usize) -> &[u32] {
        let cells = self.levels * self.levels;
        let idx = group * self.copies_per_group + copy;
        &self.counters[idx * cells..(idx + 1) * cells]
    }

    /// Every sub-GLCM, group-major.
    pub fn copies(&self) -> impl Iterator<Item = &[u32]> {
        self.counters.chunks_exact(self.levels * self.levels)
    }

    /// Sum of one cell across every copy.
    pub fn cell_sum(&self, pos: usize) -> u64 {
        self.copies().map(|c| u64::from(c[pos])).sum()
    }

    pub fn reduce(&self) -> Glcm {
        let mut glcm = Glcm::zeros(self.levels);
        accumulate(glcm.counts_mut(), self.copies());
        glcm
    }
}

fn accumulate<'a>(out: &mut [u64], subs: impl Iterator<Item = &'a [u32]>) {
    for sub in subs {
        for (o, &c) in out.iter_mut().zip(sub) {
            *o += u64::from(c);
        }
    }
}

/// Elementwise 64-bit sum of flattened `L`x`L` sub-GLCMs.
pub fn reduce_subglcms<S: AsRef<[u32]>>(subs: &[S]) -> Result<Glcm, GlcmError> {
    let first = subs.first().ok_or(GlcmError::EmptyReduction)?.as_ref();
    let cells = first.len();
    let levels = (cells as f64).sqrt().round() as usize;
    if levels == 0 || levels * levels != cells {
        return Err(GlcmError::BadShape { levels, len: cells });
    }
    if let Some((index, s)) = subs
        .iter()
        .enumerate()
        .find(|(_, s)| s.as_ref().len() != cells)
    {
        return Err(GlcmError::MismatchedLengths {
            index,
            expected: cells,
            actual: s.as_ref().len(),
        });
    }
    let mut glcm = Glcm::zeros(levels);
    accumulate(glcm.counts_mut(), subs.iter().map(AsRef::as_ref));
    Ok(glcm)
}

fn vote_group(
    view: &RasterView<'_>,
    rows: Range<usize>,
    offset: (isize, isize),
    levels: usize,
    copies: usize,
    group_size: usize,
    out: &mut [u32],
) {
    let cells = levels * levels;
    let (mut lane, mut copy) = (0usize, 0usize);
    view.for_each_pair(rows, offset, levels, |pos| {
        out[copy * cells + pos] += 1;
        lane += 1;
        copy += 1;
        if copy == copies {
            copy = 0;
        }
        if lane == group_size {
            lane = 0;
            copy = 0;
        }
    });
}

/// Privatized voting over `rows` of `view`; the core of both the whole-image
/// and the chunked paths.
pub(crate) fn vote_privatized_view(
    view: &RasterView<'_>,
    rows: Range<usize>,
    params: &GlcmParams,
    plan: &ExecutionPlan,
) -> SubGlcms {
    let levels = params.levels();
    let offset = neighbor_offset(params);
    let copies = plan.copies.max(1);
    let group_size = plan.group_size.max(1);
    let rows = voting_rows(view, rows, offset.0 as usize);

    let row_votes = view.width.saturating_sub(offset.1.unsigned_abs()) as u64;
    let rows_per_group_cap = (MAX_GROUP_VOTES / row_votes.max(1)).max(1) as usize;
    let min_groups = rows.len().div_ceil(rows_per_group_cap);
    let stripes = split_even(rows, plan.worker_count.max(min_groups));

    let mut subs = SubGlcms::zeros(levels, copies, stripes.len());
    let group_len = levels * levels * copies;
    let mut work: Vec<(Range<usize>, &mut [u32])> = stripes
        .into_iter()
        .zip(subs.counters.chunks_exact_mut(group_len))
        .collect();

    let workers = plan.worker_count.clamp(1, work.len());
    if workers == 1 {
        for (stripe, out) in work {
            vote_group(view, stripe, offset, levels, copies, group_size, out);
        }
    } else {
        let mut buckets: Vec<Vec<(Range<usize>, &mut [u32])>> =
            (0..workers).map(|_| Vec::new()).collect();
        for (i, item) in work.drain(..).enumerate() {
            buckets[i % workers].push(item);
        }
        thread::scope(|s| {
            for bucket in buckets {
                s.spawn(move || {
                    for (stripe, out) in bucket {
                        vote_group(view, stripe, offset, levels, copies, group_size, out);
                    }
                });
            }
        });
    }
    subs
}

/// Runs the privatized voting phase and returns the unreduced copies.
pub fn vote_privatized(
    img: &QuantizedImage,
    params: &GlcmParams,
    plan: &ExecutionPlan,
) -> Result<SubGlcms, GlcmError> {
    check_inputs(img, params)?;
    Ok(vote_privatized_view(
        &RasterView::of(img),
        0..img.height(),
        params,
        plan,
    ))
}

/// Privatized voting followed by reduction.
pub fn compute_glcm_privatized(
    img: &QuantizedImage,
    params: &GlcmParams,
    plan: &ExecutionPlan,
) -> Result<(Glcm, ContentionStats), GlcmError> {
    let subs = vote_privatized(img, params, plan)?;
    let glcm = subs.reduce();
    let stats = ContentionStats::from_subs(&glcm, &subs);
    Ok((glcm, stats))
}
