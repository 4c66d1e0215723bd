mod common;

use common::{brute_force_glcm, random_image, Mix};
use texture_forge_core::{
    compute_glcm_privatized, compute_glcm_serial, compute_glcm_shared, plan, Angle, GlcmParams,
    QuantizedImage, DEFAULT_SCRATCH_BUDGET,
};

fn check(img: &QuantizedImage, d: usize, angle: Angle) {
    let params = GlcmParams::new(d, angle, img.levels()).unwrap();
    let serial = compute_glcm_serial(img, &params).unwrap();
    assert_eq!(
        serial.counts(),
        brute_force_glcm(img, d, angle).as_slice(),
        "{}x{} L={} d={d} θ={angle}",
        img.width(),
        img.height(),
        img.levels()
    );
}

#[test]
fn every_binary_3x3_image() {
    for bits in 0u32..512 {
        let px = (0..9).map(|i| ((bits >> i) & 1) as u8).collect();
        let img = QuantizedImage::new(3, 3, 2, px).unwrap();
        for angle in Angle::ALL {
            for d in 1..=2 {
                check(&img, d, angle);
            }
        }
    }
}

#[test]
fn every_ternary_2x3_and_3x2_image() {
    for code in 0..3usize.pow(6) {
        let px: Vec<u8> = (0..6).map(|i| (code / 3usize.pow(i) % 3) as u8).collect();
        for (w, h) in [(2, 3), (3, 2)] {
            let img = QuantizedImage::new(w, h, 3, px.clone()).unwrap();
            for angle in Angle::ALL {
                check(&img, 1, angle);
            }
        }
    }
}

#[test]
fn random_small_images() {
    let mut rng = Mix(0x5eed);
    for _ in 0..600 {
        let (w, h) = (2 + rng.below(7), 2 + rng.below(7));
        let levels = 2 + rng.below(3);
        let img = random_image(&mut rng, w, h, levels);
        let d = 1 + rng.below(w.min(h) - 1);
        check(&img, d, Angle::ALL[rng.below(4)]);
    }
}

#[test]
fn parallel_modes_on_awkward_shapes() {
    let mut rng = Mix(42);
    for (w, h) in [(2, 2), (3, 17), (17, 3), (1000, 2), (5, 129)] {
        let img = random_image(&mut rng, w, h, 4);
        for angle in Angle::ALL {
            let params = GlcmParams::new(1, angle, 4).unwrap();
            let serial = compute_glcm_serial(&img, &params).unwrap();
            for workers in [1, 3, 8] {
                let pl = plan(4, DEFAULT_SCRATCH_BUDGET, workers);
                assert_eq!(compute_glcm_shared(&img, &params, &pl).unwrap().0, serial);
                assert_eq!(
                    compute_glcm_privatized(&img, &params, &pl).unwrap().0,
                    serial
                );
            }
        }
    }
}
