#![allow(dead_code)]

use texture_forge_core::{Angle, QuantizedImage};

/// Flat-address step from associate to reference pixel on a stride-`width`
/// raster, written out case by case.
fn flat_step(width: usize, d: usize, angle: Angle) -> i64 {
    let (w, d) = (width as i64, d as i64);
    match angle {
        Angle::Deg0 => d,
        Angle::Deg45 => d * (w - 1),
        Angle::Deg90 => d * w,
        Angle::Deg135 => d * (w + 1),
    }
}

/// Literal co-occurrence count: for every cell `(i, j)` scan every ordered
/// pixel pair and count those where the second pixel sits at the flat step
/// from the first, one row band below (same row for 0°), the second has gray
/// `i` and the first has gray `j`.
pub fn brute_force_glcm(img: &QuantizedImage, d: usize, angle: Angle) -> Vec<u64> {
    let (w, h, l) = (img.width(), img.height(), img.levels());
    let n = w * h;
    let step = flat_step(w, d, angle);
    let row_step = if angle == Angle::Deg0 { 0 } else { d as i64 };
    let mut counts = vec![0u64; l * l];
    for i in 0..l {
        for j in 0..l {
            let mut c = 0;
            for a in 0..n {
                for r in 0..n {
                    let matches_step =
                        r as i64 - a as i64 == step && (r / w) as i64 - (a / w) as i64 == row_step;
                    if matches_step
                        && usize::from(img.pixels()[r]) == i
                        && usize::from(img.pixels()[a]) == j
                    {
                        c += 1;
                    }
                }
            }
            counts[i * l + j] = c;
        }
    }
    counts
}

/// splitmix64; small deterministic generator for test inputs.
pub struct Mix(pub u64);

impl Mix {
    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next() % n as u64) as usize
    }
}

pub fn random_image(rng: &mut Mix, w: usize, h: usize, levels: usize) -> QuantizedImage {
    let px = (0..w * h).map(|_| rng.below(levels) as u8).collect();
    QuantizedImage::new(w, h, levels, px).unwrap()
}
