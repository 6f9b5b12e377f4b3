mod common;

use common::*;
use facecut::simmask::*;
use facecut::synthetic::{block_mask, plant_noise, textured_image};
use image::{Rgb, RgbImage};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gray(img: &RgbImage) -> GrayImage {
    to_gray(img).unwrap()
}

#[test]
fn luma_coefficients() {
    let img = RgbImage::from_fn(3, 1, |x, _| match x {
        0 => Rgb([255, 255, 255]),
        1 => Rgb([0, 0, 0]),
        _ => Rgb([255, 0, 0]),
    });
    let g = gray(&img);
    assert!((g.get(0, 0) - 1.0).abs() < 1e-12);
    assert_eq!(g.get(1, 0), 0.0);
    assert!((g.get(2, 0) - 0.299).abs() < 1e-12);
    assert!(matches!(to_gray(&RgbImage::new(0, 4)), Err(SimMaskError::EmptyImage)));
}

#[test]
fn constant_images_match_closed_form() {
    let a = GrayImage::constant(20, 15, 0.2).unwrap();
    let b = GrayImage::constant(20, 15, 0.8).unwrap();
    let expected = ssim_of_constants(0.2, 0.8);
    let map = ssim_map(&a, &b, 11).unwrap();
    assert!(map.values().iter().all(|v| (v - expected).abs() < 1e-12));
}

#[test]
fn window_and_dims_validated() {
    let a = GrayImage::constant(10, 10, 0.5).unwrap();
    let b = GrayImage::constant(10, 9, 0.5).unwrap();
    assert!(matches!(ssim_map(&a, &b, 3), Err(SimMaskError::DimMismatch(..))));
    for bad in [4, 1, 11] {
        assert!(matches!(ssim_map(&a, &a, bad), Err(SimMaskError::BadWindow { .. })));
    }
}

#[test]
fn planted_block_is_recovered() {
    let real = textured_image(64, 64, 3);
    let block = block_mask(64, 64, 20, 24, 16);
    let fake = plant_noise(&real, &block, 4);
    let mask = difference_mask(&real, &fake, DEFAULT_SSIM_THRESHOLD).unwrap();
    assert!(iou(&mask, &block) >= 0.5, "iou {}", iou(&mask, &block));
    assert!(difference_mask(&real, &fake, -1.0).unwrap().is_empty());
}

#[test]
fn identical_frames_give_empty_mask() {
    let img = textured_image(32, 24, 9);
    for t in [-1.0, 0.0, 0.5, 0.99, 1.0] {
        assert!(difference_mask(&img, &img, t).unwrap().is_empty());
    }
}

fn arb_pair() -> impl Strategy<Value = (RgbImage, RgbImage)> {
    (any::<u64>(), 12u32..30, 12u32..30).prop_map(|(seed, w, h)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = textured_image(w, h, rng.random());
        let b = if rng.random_bool(0.5) {
            textured_image(w, h, rng.random())
        } else {
            plant_noise(&a, &block_mask(w, h, 2, 2, 8), rng.random())
        };
        (a, b)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ssim_identity_symmetry_and_range((a, b) in arb_pair(), win in prop::sample::select(vec![3u32, 5, 7, 11])) {
        let (ga, gb) = (gray(&a), gray(&b));
        let self_map = ssim_map(&ga, &ga, win).unwrap();
        prop_assert!(self_map.values().iter().all(|v| (v - 1.0).abs() <= 1e-9));
        let ab = ssim_map(&ga, &gb, win).unwrap();
        let ba = ssim_map(&gb, &ga, win).unwrap();
        for (x, y) in ab.values().iter().zip(ba.values()) {
            prop_assert!((x - y).abs() <= 1e-9);
            prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(x));
        }
    }

    #[test]
    fn mask_is_monotone_in_threshold((a, b) in arb_pair(), t1 in -1.0f64..1.0, t2 in -1.0f64..1.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let m_lo = difference_mask(&a, &b, lo).unwrap();
        let m_hi = difference_mask(&a, &b, hi).unwrap();
        prop_assert!(m_lo.is_subset_of(&m_hi));
    }
}
