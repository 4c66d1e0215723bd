//! Serial reference GLCM: the exactness oracle for every parallel scheme.
//!
//! Pixels are addressed row-major. The *associate* pixel is the anchor; the
//! *reference* pixel sits at [`neighbor_offset`] from it. Each in-bounds pair
//! votes once into cell `ref * L + assoc`, so matrix rows are indexed by the
//! reference gray level and columns by the associate gray level.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::imaging::{check_levels, QuantizedImage};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GlcmError {
    #[error("distance must be at least 1")]
    ZeroDistance,
    #[error("gray level count {0} outside [2, 256]")]
    LevelsOutOfRange(usize),
    #[error("image has {image} gray levels but parameters ask for {params}")]
    LevelMismatch { image: usize, params: usize },
    #[error("distance {distance} does not fit a {width}x{height} image")]
    DegenerateGeometry {
        distance: usize,
        width: usize,
        height: usize,
    },
    #[error("matrix of {len} cells is not {levels}x{levels}")]
    BadShape { levels: usize, len: usize },
    #[error("sub-matrix {index} has {actual} cells, expected {expected}")]
    MismatchedLengths {
        index: usize,
        expected: usize,
        actual: usize,
    },
    #[error("nothing to reduce")]
    EmptyReduction,
    #[error("matrix has no votes to normalize")]
    AllZero,
}

/// Direction from the associate pixel to the reference pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Angle {
    #[serde(rename = "0")]
    Deg0,
    #[serde(rename = "45")]
    Deg45,
    #[serde(rename = "90")]
    Deg90,
    #[serde(rename = "135")]
    Deg135,
}

impl Angle {
    pub const ALL: [Angle; 4] = [Angle::Deg0, Angle::Deg45, Angle::Deg90, Angle::Deg135];

    pub fn degrees(self) -> u32 {
        match self {
            Angle::Deg0 => 0,
            Angle::Deg45 => 45,
            Angle::Deg90 => 90,
            Angle::Deg135 => 135,
        }
    }

    pub fn from_degrees(degrees: u32) -> Option<Self> {
        match degrees {
            0 => Some(Angle::Deg0),
            45 => Some(Angle::Deg45),
            90 => Some(Angle::Deg90),
            135 => Some(Angle::Deg135),
            _ => None,
        }
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.degrees())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("angle must be one of 0, 45, 90, 135; got {0:?}")]
pub struct ParseAngleError(String);

impl FromStr for Angle {
    type Err = ParseAngleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .parse::<u32>()
            .ok()
            .and_then(Angle::from_degrees)
            .ok_or_else(|| ParseAngleError(s.to_string()))
    }
}

/// Displacement `(d, θ)` together with the gray level count `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GlcmParams {
    distance: usize,
    angle: Angle,
    levels: usize,
}

impl GlcmParams {
    pub fn new(distance: usize, angle: Angle, levels: usize) -> Result<Self, GlcmError> {
        if distance == 0 {
            return Err(GlcmError::ZeroDistance);
        }
        check_levels(levels).map_err(|_| GlcmError::LevelsOutOfRange(levels))?;
        Ok(Self {
            distance,
            angle,
            levels,
        })
    }

    pub fn distance(&self) -> usize {
        self.distance
    }

    pub fn angle(&self) -> Angle {
        self.angle
    }

    pub fn levels(&self) -> usize {
        self.levels
    }
}

/// Row/column step from the associate pixel to the reference pixel.
///
/// On a row-major raster of stride `W` these are the flat offsets
/// `d`, `d(W-1)`, `dW` and `d(W+1)` for 0°, 45°, 90° and 135°.
pub fn neighbor_offset(params: &GlcmParams) -> (isize, isize) {
    let d = params.distance as isize;
    match params.angle {
        Angle::Deg0 => (0, d),
        Angle::Deg45 => (d, -d),
        Angle::Deg90 => (d, 0),
        Angle::Deg135 => (d, d),
    }
}

fn check_geometry(width: usize, height: usize, distance: usize) -> Result<(), GlcmError> {
    if distance >= width || distance >= height {
        return Err(GlcmError::DegenerateGeometry {
            distance,
            width,
            height,
        });
    }
    Ok(())
}

/// Number of anchors whose offset neighbor lies inside a `width`x`height` image.
pub fn valid_pair_count(
    width: usize,
    height: usize,
    params: &GlcmParams,
) -> Result<u64, GlcmError> {
    let d = params.distance;
    check_geometry(width, height, d)?;
    let (w, h, d) = (width as u64, height as u64, d as u64);
    Ok(match params.angle {
        Angle::Deg0 => h * (w - d),
        Angle::Deg90 => (h - d) * w,
        Angle::Deg45 | Angle::Deg135 => (h - d) * (w - d),
    })
}

/// `L`x`L` matrix of 64-bit vote counts, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Glcm {
    levels: usize,
    counts: Vec<u64>,
}

impl Glcm {
    pub fn zeros(levels: usize) -> Self {
        Self {
            levels,
            counts: vec![0; levels * levels],
        }
    }

    pub fn from_counts(levels: usize, counts: Vec<u64>) -> Result<Self, GlcmError> {
        if levels == 0 || counts.len() != levels * levels {
            return Err(GlcmError::BadShape {
                levels,
                len: counts.len(),
            });
        }
        Ok(Self { levels, counts })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub(crate) fn counts_mut(&mut self) -> &mut [u64] {
        &mut self.counts
    }

    /// Count at (reference gray, associate gray).
    pub fn get(&self, reference: usize, associate: usize) -> u64 {
        self.counts[reference * self.levels + associate]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks_exact(self.levels)
    }

    pub fn transpose(&self) -> Glcm {
        let l = self.levels;
        let mut counts = vec![0; l * l];
        for i in 0..l {
            for j in 0..l {
                counts[j * l + i] = self.counts[i * l + j];
            }
        }
        Glcm { levels: l, counts }
    }

    pub fn is_symmetric(&self) -> bool {
        let l = self.levels;
        (0..l).all(|i| (i + 1..l).all(|j| self.counts[i * l + j] == self.counts[j * l + i]))
    }

    /// Flat index and value of the largest cell; ties go to the lowest index.
    pub fn hottest(&self) -> (usize, u64) {
        self.counts.iter().copied().enumerate().fold(
            (0, 0),
            |best, (i, c)| if c > best.1 { (i, c) } else { best },
        )
    }
}

/// Probability matrix produced by [`normalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedGlcm {
    levels: usize,
    values: Vec<f64>,
}

impl NormalizedGlcm {
    /// Wraps raw probabilities; callers that skip [`normalize`] are checked
    /// again by the feature extractor.
    pub fn from_values(levels: usize, values: Vec<f64>) -> Result<Self, GlcmError> {
        if levels == 0 || values.len() != levels * levels {
            return Err(GlcmError::BadShape {
                levels,
                len: values.len(),
            });
        }
        Ok(Self { levels, values })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.levels + col]
    }
}

/// Row-major view over some rows of a quantized raster.
///
/// `rows` is the number of rows present in `pixels`; anchors whose neighbor
/// falls beyond the last present row are not counted.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RasterView<'a> {
    pub width: usize,
    pub rows: usize,
    pub pixels: &'a [u8],
}

impl<'a> RasterView<'a> {
    pub fn of(img: &'a QuantizedImage) -> Self {
        Self {
            width: img.width(),
            rows: img.height(),
            pixels: img.pixels(),
        }
    }

    /// Calls `vote(pos)` for every anchor in `anchor_rows` whose neighbor is
    /// present, in row-major anchor order, with `pos = ref * levels + assoc`.
    #[inline]
    pub fn for_each_pair<F: FnMut(usize)>(
        &self,
        anchor_rows: Range<usize>,
        offset: (isize, isize),
        levels: usize,
        mut vote: F,
    ) {
        let (dr, dc) = (offset.0 as usize, offset.1);
        let span = dc.unsigned_abs();
        if span >= self.width {
            return;
        }
        let len = self.width - span;
        let (assoc_col, ref_col) = if dc >= 0 { (0, span) } else { (span, 0) };
        let last = self.rows.saturating_sub(dr).min(anchor_rows.end);
        for r in anchor_rows.start..last {
            let a = &self.pixels[r * self.width + assoc_col..][..len];
            let b = &self.pixels[(r + dr) * self.width + ref_col..][..len];
            for (&assoc, &reference) in a.iter().zip(b) {
                vote(usize::from(reference) * levels + usize::from(assoc));
            }
        }
    }
}

pub(crate) fn check_inputs(img: &QuantizedImage, params: &GlcmParams) -> Result<(), GlcmError> {
    if img.levels() != params.levels {
        return Err(GlcmError::LevelMismatch {
            image: img.levels(),
            params: params.levels,
        });
    }
    check_geometry(img.width(), img.height(), params.distance)
}

/// Single-threaded voting over every in-bounds pixel pair.
pub fn compute_glcm_serial(img: &QuantizedImage, params: &GlcmParams) -> Result<Glcm, GlcmError> {
    check_inputs(img, params)?;
    let mut glcm = Glcm::zeros(params.levels);
    let counts = glcm.counts_mut();
    RasterView::of(img).for_each_pair(
        0..img.height(),
        neighbor_offset(params),
        params.levels,
        |pos| counts[pos] += 1,
    );
    Ok(glcm)
}

/// `M + Mᵀ`: each pair counted in both orders.
pub fn symmetrize(glcm: &Glcm) -> Glcm {
    let t = glcm.transpose();
    let counts = glcm
        .counts
        .iter()
        .zip(&t.counts)
        .map(|(a, b)| a + b)
        .collect();
    Glcm {
        levels: glcm.levels,
        counts,
    }
}

/// Divides every cell by the total vote count.
pub fn normalize(glcm: &Glcm) -> Result<NormalizedGlcm, GlcmError> {
    let total = glcm.total();
    if total == 0 {
        return Err(GlcmError::AllZero);
    }
    let total = total as f64;
    Ok(NormalizedGlcm {
        levels: glcm.levels,
        values: glcm.counts.iter().map(|&c| c as f64 / total).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(d: usize, angle: Angle, levels: usize) -> GlcmParams {
        GlcmParams::new(d, angle, levels).unwrap()
    }

    #[test]
    fn offsets_follow_row_major_addressing() {
        assert_eq!(neighbor_offset(&params(1, Angle::Deg0, 8)), (0, 1));
        assert_eq!(neighbor_offset(&params(4, Angle::Deg90, 8)), (4, 0));
        assert_eq!(neighbor_offset(&params(2, Angle::Deg45, 8)), (2, -2));
        assert_eq!(neighbor_offset(&params(3, Angle::Deg135, 8)), (3, 3));

        // flat offsets on stride w: d, d(w-1), dw, d(w+1)
        let w = 11isize;
        for angle in Angle::ALL {
            let d = 3;
            let (dr, dc) = neighbor_offset(&params(d as usize, angle, 8));
            let flat = dr * w + dc;
            let expected = match angle {
                Angle::Deg0 => d,
                Angle::Deg45 => d * (w - 1),
                Angle::Deg90 => d * w,
                Angle::Deg135 => d * (w + 1),
            };
            assert_eq!(flat, expected, "{angle}");
        }
    }

    #[test]
    fn angle_parsing() {
        assert_eq!("45".parse::<Angle>().unwrap(), Angle::Deg45);
        assert!("30".parse::<Angle>().is_err());
        assert!("east".parse::<Angle>().is_err());
    }

    #[test]
    fn param_validation() {
        assert_eq!(
            GlcmParams::new(0, Angle::Deg0, 8),
            Err(GlcmError::ZeroDistance)
        );
        assert_eq!(
            GlcmParams::new(1, Angle::Deg0, 1),
            Err(GlcmError::LevelsOutOfRange(1))
        );
    }

    #[test]
    fn pair_count_examples() {
        assert_eq!(valid_pair_count(4, 4, &params(1, Angle::Deg0, 8)), Ok(12));
        assert_eq!(valid_pair_count(4, 4, &params(1, Angle::Deg45, 8)), Ok(9));
        assert_eq!(
            valid_pair_count(1024, 1024, &params(4, Angle::Deg135, 8)),
            Ok(1_040_400)
        );
        assert!(matches!(
            valid_pair_count(4, 8, &params(4, Angle::Deg90, 8)),
            Err(GlcmError::DegenerateGeometry { .. })
        ));
    }

    #[test]
    fn constant_image_votes_one_cell() {
        let img = QuantizedImage::new(4, 4, 8, vec![3; 16]).unwrap();
        let glcm = compute_glcm_serial(&img, &params(1, Angle::Deg0, 8)).unwrap();
        assert_eq!(glcm.get(3, 3), 12);
        assert_eq!(glcm.counts()[3 * 8 + 3], 12);
        assert_eq!(glcm.total(), 12);
    }

    #[test]
    fn two_by_two_orientation() {
        let img = QuantizedImage::from_rows(2, &[&[0, 1], &[1, 0]]).unwrap();
        let glcm = compute_glcm_serial(&img, &params(1, Angle::Deg0, 2)).unwrap();
        // (assoc 0, ref 1) and (assoc 1, ref 0)
        assert_eq!(glcm.counts(), &[0, 1, 1, 0]);
        assert_eq!(glcm.get(1, 0), 1);
        assert_eq!(glcm.counts()[1], 1);
    }

    #[test]
    fn orientation_is_reference_by_associate() {
        // single 45° pair: anchor (0,1)=2, neighbor (1,0)=1
        let img = QuantizedImage::from_rows(4, &[&[0, 2], &[1, 3]]).unwrap();
        let glcm = compute_glcm_serial(&img, &params(1, Angle::Deg45, 4)).unwrap();
        assert_eq!(glcm.total(), 1);
        assert_eq!(glcm.get(1, 2), 1);
    }

    #[test]
    fn serial_rejects_bad_inputs() {
        let img = QuantizedImage::new(4, 4, 8, vec![0; 16]).unwrap();
        assert_eq!(
            compute_glcm_serial(&img, &params(1, Angle::Deg0, 4)),
            Err(GlcmError::LevelMismatch {
                image: 8,
                params: 4
            })
        );
        assert!(matches!(
            compute_glcm_serial(&img, &params(4, Angle::Deg0, 8)),
            Err(GlcmError::DegenerateGeometry { .. })
        ));
    }

    #[test]
    fn symmetrize_examples() {
        let m = Glcm::from_counts(2, vec![3, 0, 1, 2]).unwrap();
        let s = symmetrize(&m);
        assert_eq!(s.counts(), &[6, 1, 1, 4]);
        assert!(s.is_symmetric());
        assert_eq!(s.total(), 2 * m.total());

        let sym = Glcm::from_counts(2, vec![1, 5, 5, 2]).unwrap();
        assert_eq!(symmetrize(&sym).counts(), &[2, 10, 10, 4]);
    }

    #[test]
    fn normalize_examples() {
        let p = normalize(&Glcm::from_counts(2, vec![3, 0, 1, 2]).unwrap()).unwrap();
        let expected = [0.5, 0.0, 1.0 / 6.0, 1.0 / 3.0];
        for (a, b) in p.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let point = normalize(&Glcm::from_counts(2, vec![0, 0, 7, 0]).unwrap()).unwrap();
        assert_eq!(point.get(1, 0), 1.0);
        assert_eq!(normalize(&Glcm::zeros(3)), Err(GlcmError::AllZero));
    }

    #[test]
    fn hottest_breaks_ties_low() {
        let m = Glcm::from_counts(2, vec![1, 4, 4, 0]).unwrap();
        assert_eq!(m.hottest(), (1, 4));
        assert_eq!(Glcm::zeros(2).hottest(), (0, 0));
    }

    fn image_strategy() -> impl Strategy<Value = (QuantizedImage, GlcmParams)> {
        (2usize..=6, 2usize..=12, 2usize..=12, 1usize..=4, 0usize..4).prop_flat_map(
            |(levels, w, h, d, a)| {
                let d = d.min(w.min(h) - 1);
                proptest::collection::vec(0..levels as u8, w * h).prop_map(move |px| {
                    (
                        QuantizedImage::new(w, h, levels, px).unwrap(),
                        GlcmParams::new(d, Angle::ALL[a], levels).unwrap(),
                    )
                })
            },
        )
    }

    proptest! {
        #[test]
        fn conservation((img, p) in image_strategy()) {
            let glcm = compute_glcm_serial(&img, &p).unwrap();
            prop_assert_eq!(glcm.total(), valid_pair_count(img.width(), img.height(), &p).unwrap());
        }

        #[test]
        fn gray_permutation_permutes_cells(
            (img, p) in image_strategy(),
            shuffle_seed in any::<u64>(),
        ) {
            let l = p.levels();
            // Fisher-Yates from a tiny LCG keeps the permutation reproducible
            let mut perm: Vec<usize> = (0..l).collect();
            let mut s = shuffle_seed | 1;
            for i in (1..l).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let remapped = QuantizedImage::new(
                img.width(),
                img.height(),
                l,
                img.pixels().iter().map(|&v| perm[usize::from(v)] as u8).collect(),
            ).unwrap();
            let a = compute_glcm_serial(&img, &p).unwrap();
            let b = compute_glcm_serial(&remapped, &p).unwrap();
            for i in 0..l {
                for j in 0..l {
                    prop_assert_eq!(a.get(i, j), b.get(perm[i], perm[j]));
                }
            }
        }

        #[test]
        fn constant_image_law(w in 2usize..10, h in 2usize..10, v in 0u8..8, a in 0usize..4) {
            let img = QuantizedImage::new(w, h, 8, vec![v; w * h]).unwrap();
            let p = GlcmParams::new(1, Angle::ALL[a], 8).unwrap();
            let glcm = compute_glcm_serial(&img, &p).unwrap();
            let v = usize::from(v);
            for (i, &c) in glcm.counts().iter().enumerate() {
                if i == v * 8 + v {
                    prop_assert_eq!(c, valid_pair_count(w, h, &p).unwrap());
                } else {
                    prop_assert_eq!(c, 0);
                }
            }
        }

        #[test]
        fn normalized_sums_to_one((img, p) in image_strategy()) {
            let p = normalize(&compute_glcm_serial(&img, &p).unwrap()).unwrap();
            let sum: f64 = p.values().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
        }
    }
}
