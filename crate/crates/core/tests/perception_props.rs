use autodissect::mask::{largest_component, MaskError, DEFAULT_MIN_AREA_PX};
use autodissect::perception::{back_project, observe_segmentation};
use autodissect::phantom::generate_phantom;
use autodissect::{BinaryMask, CameraModel, DepthMap, NoiseProfile, PhantomConfig, TissueClass, Vec3};
use proptest::prelude::*;

#[test]
fn jitter_two_keeps_iou_high_on_average() {
    let ph = generate_phantom(PhantomConfig::default()).unwrap();
    let classes = [TissueClass::Liver, TissueClass::Gallbladder];
    let mut totals = [0.0; 2];
    let runs = 100;
    for seed in 0..runs {
        let noise = NoiseProfile {
            boundary_jitter_px: 2.0,
            ..NoiseProfile::zero()
        }
        .with_seed(seed);
        let obs = observe_segmentation(&ph.labels, &noise, 0);
        let masks = [&obs.liver, &obs.gallbladder];
        for (k, class) in classes.iter().enumerate() {
            totals[k] += masks[k].iou(&ph.labels.class_mask(*class));
        }
    }
    for (k, class) in classes.iter().enumerate() {
        let mean = totals[k] / runs as f64;
        assert!(mean >= 0.90, "{class:?} mean IoU {mean}");
    }
}

#[test]
fn saturated_flips_fail_the_area_check() {
    let ph = generate_phantom(PhantomConfig::default()).unwrap();
    let noise = NoiseProfile {
        pixel_flip_rate: 1.0,
        ..NoiseProfile::zero()
    };
    let obs = observe_segmentation(&ph.labels, &noise, 3);
    assert!(matches!(
        largest_component(&obs.gallbladder, DEFAULT_MIN_AREA_PX),
        Err(MaskError::MaskTooSmall { .. })
    ));
}

#[test]
fn four_pixel_square_matches_similar_triangles() {
    let cam = CameraModel::new(500.0, [10.0, 10.0]);
    let mut mask = BinaryMask::new(21, 21, false);
    for (x, y) in [(12, 12), (13, 12), (12, 13), (13, 13)] {
        mask.set(x, y, true);
    }
    let pts = back_project(&mask, &DepthMap::new(21, 21, 100.0), &cam).unwrap();
    // X = (u - cx) * Z / f, row-major order.
    let expected = [
        Vec3::new(0.4, 0.4, 100.0),
        Vec3::new(0.6, 0.4, 100.0),
        Vec3::new(0.4, 0.6, 100.0),
        Vec3::new(0.6, 0.6, 100.0),
    ];
    for (p, e) in pts.iter().zip(expected) {
        assert!((p - e).norm() < 1e-12);
    }
}

proptest! {
    #[test]
    fn back_projection_inverts_projection(
        u in 0usize..64, v in 0usize..48, depth in 1.0f64..500.0, f in 50.0f64..2000.0,
        cx in 0.0f64..64.0, cy in 0.0f64..48.0,
    ) {
        let cam = CameraModel::new(f, [cx, cy]);
        let p = cam.back_project_pixel(u as f64, v as f64, depth);
        let [pu, pv] = cam.project(&p).unwrap();
        prop_assert!((pu - u as f64).abs() < 1e-9 && (pv - v as f64).abs() < 1e-9);
        let again = cam.back_project_pixel(pu, pv, p.z);
        prop_assert!((again - p).norm() < 1e-9);
    }

    #[test]
    fn segmentation_is_a_pure_function_of_seed_and_tick(seed in any::<u64>(), tick in 0u64..1000) {
        let ph = generate_phantom(PhantomConfig { grid_width: 80, grid_height: 80, mm_per_pixel: 0.625, ..PhantomConfig::default() }).unwrap();
        let noise = NoiseProfile::high().with_seed(seed);
        prop_assert_eq!(observe_segmentation(&ph.labels, &noise, tick), observe_segmentation(&ph.labels, &noise, tick));
    }
}
