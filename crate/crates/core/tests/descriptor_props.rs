mod common;

use proptest::prelude::*;
use spectrumshape::descriptors::{
    describe, lbp_bin, lbp_code, rotation_invariant_code, spectrum_histogram, HistogramKind, CANONICAL_CODES,
    LBP_BINS,
};
use spectrumshape::raster::Orientation;

#[test]
fn lbp_bins_cover_the_canonical_codes() {
    for code in 0..=255u8 {
        let bin = lbp_bin(code);
        assert!(bin < LBP_BINS);
        assert_eq!(CANONICAL_CODES[bin], rotation_invariant_code(code));
    }
    assert!(CANONICAL_CODES.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn rotating_the_neighborhood_rotates_the_code() {
    // exhaustive over binary neighborhoods around a foreground center
    for code in 0..=255u8 {
        let neighbors: [u8; 8] = std::array::from_fn(|p| (code >> p) & 1);
        assert_eq!(lbp_code(1, &neighbors), code);
        for k in 0..8 {
            let turned: [u8; 8] = std::array::from_fn(|p| neighbors[(p + k) % 8]);
            assert_eq!(lbp_code(1, &turned), code.rotate_right(k as u32));
            assert_eq!(rotation_invariant_code(lbp_code(1, &turned)), rotation_invariant_code(code));
        }
    }
}

#[test]
fn brute_force_canonical_codes() {
    // the 36 necklaces of 8 binary beads under rotation
    let mut reps: Vec<u8> = Vec::new();
    for code in 0..=255u8 {
        let orbit_min = (0..8).map(|k| code.rotate_left(k)).min().unwrap();
        if !reps.contains(&orbit_min) {
            reps.push(orbit_min);
        }
    }
    reps.sort_unstable();
    assert_eq!(reps, CANONICAL_CODES.to_vec());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn histograms_are_unit_mass(seed in any::<u64>()) {
        let shape = common::random_blob(&mut common::rng(seed), 40, "b");
        let d = describe(&shape).unwrap();
        for (h, kind) in [(&d.sps, HistogramKind::Sps), (&d.cps, HistogramKind::Cps), (&d.lbp, HistogramKind::Lbp)] {
            prop_assert_eq!(h.len(), kind.bin_count());
            prop_assert!(h.bins().iter().all(|&w| w >= 0.0));
            prop_assert!((h.bins().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn descriptors_ignore_grid_symmetries_and_translation(seed in any::<u64>(), dr in 0isize..5, dc in 0isize..5) {
        let shape = common::random_blob(&mut common::rng(seed), 28, "b");
        let base = describe(&shape).unwrap();
        let mut variants: Vec<_> = Orientation::ALL.iter().map(|&o| shape.oriented(o)).collect();
        variants.push(shape.translated(dr, dc, 5, 5).unwrap());
        for v in variants {
            let d = describe(&v).unwrap();
            prop_assert_eq!(d.sps.bins(), base.sps.bins());
            prop_assert_eq!(d.cps.bins(), base.cps.bins());
            prop_assert_eq!(d.lbp.bins(), base.lbp.bins());
        }
    }

    #[test]
    fn spectrum_ignores_radius_scale(radii in prop::collection::vec(1u32..500, 1..60), shift in 0i32..6) {
        let radii: Vec<f64> = radii.into_iter().map(f64::from).collect();
        let scaled: Vec<f64> = radii.iter().map(|r| r * 2f64.powi(shift)).collect();
        let (a, b) = (
            spectrum_histogram(&radii, HistogramKind::Sps).unwrap(),
            spectrum_histogram(&scaled, HistogramKind::Sps).unwrap(),
        );
        prop_assert_eq!(a.bins(), b.bins());
    }

    #[test]
    fn largest_radius_lands_in_the_top_bin(radii in prop::collection::vec(1u32..500, 1..60)) {
        let radii: Vec<f64> = radii.into_iter().map(f64::from).collect();
        let h = spectrum_histogram(&radii, HistogramKind::Cps).unwrap();
        let max = radii.iter().cloned().fold(0.0, f64::max);
        let at_max = radii.iter().filter(|&&r| r == max).count() as f64 / radii.len() as f64;
        prop_assert!(h.bins()[9] >= at_max - 1e-12);
    }
}
