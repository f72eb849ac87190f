mod common;

use autodissect::frames::{
    fbf_goal_from_surface, orient_surface_frame, pca_axes, pch_goal_from_surface, SurfaceFrame,
};
use autodissect::geometry::{Frame, ORTHONORMAL_TOL};
use autodissect::Vec3;
use common::{brute_covariance, jacobi_eigenvalues, random_cloud};
use nalgebra::{Matrix3, Rotation3, Unit};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn pca_variances_match_jacobi_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for case in 0..100 {
        let pts = random_cloud(&mut rng);
        let pca = pca_axes(&pts).unwrap();
        let oracle = jacobi_eigenvalues(brute_covariance(&pts));
        for k in 0..3 {
            let tol = 0.01 * oracle[k].abs() + 1e-12;
            assert!(
                (pca.variances[k] - oracle[k]).abs() <= tol,
                "case {case} axis {k}: {} vs {}",
                pca.variances[k],
                oracle[k]
            );
        }
        // Each axis is a unit eigenvector of the covariance.
        let c = Matrix3::from_fn(|i, j| brute_covariance(&pts)[i][j]);
        for (axis, var) in pca.axes.iter().zip(pca.variances) {
            assert!((axis.norm() - 1.0).abs() < 1e-9);
            assert!((c * axis - axis * var).norm() < 1e-6 * (1.0 + var));
        }
    }
}

fn check_frame(f: &Frame) -> bool {
    f.orthonormality_error() < 1e-9 && f.is_right_handed(ORTHONORMAL_TOL)
}

#[test]
fn derived_frames_are_right_handed_orthonormal() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut checked = 0;
    for _ in 0..1000 {
        let cloud = random_cloud(&mut rng);
        let n = cloud.len();
        let (skel, bnd) = cloud.split_at(n / 2);
        let view = Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), 1.0).normalize();
        let Ok(s) = orient_surface_frame(skel, bnd, &cloud, &view) else {
            continue;
        };
        assert!(check_frame(&s.frame));
        assert!(s.normal_axis.dot(&view) >= 0.0);
        let p = cloud[0];
        assert!(check_frame(&fbf_goal_from_surface(&s, &p)));
        assert!(check_frame(&pch_goal_from_surface(&s, &p)));
        checked += 1;
    }
    assert_eq!(checked, 1000);
}

fn rotation_strategy() -> impl Strategy<Value = Rotation3<f64>> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, 0.0f64..std::f64::consts::PI).prop_filter_map(
        "non-zero axis",
        |(x, y, z, angle)| {
            let v = Vec3::new(x, y, z);
            (v.norm() > 1e-3).then(|| Rotation3::from_axis_angle(&Unit::new_normalize(v), angle))
        },
    )
}

/// Curved patch with a distinct variance per axis, skeleton on one side and boundary on the other.
fn scene() -> (Vec<Vec3>, Vec<Vec3>, Vec<Vec3>) {
    let mut surface = Vec::new();
    for i in 0..=12 {
        for j in 0..=30 {
            let x = i as f64 * 0.5;
            let y = -15.0 + j as f64;
            surface.push(Vec3::new(x, y, 0.02 * y * y + 0.1 * x));
        }
    }
    let skeleton: Vec<Vec3> = (0..20).map(|j| Vec3::new(0.0, -10.0 + j as f64, 0.0)).collect();
    let boundary: Vec<Vec3> = (0..20).map(|j| Vec3::new(6.0, -10.0 + j as f64, 0.0)).collect();
    (skeleton, boundary, surface)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn orient_surface_frame_is_rotation_equivariant(rot in rotation_strategy(), t in proptest::array::uniform3(-20.0f64..20.0)) {
        let (skel, bnd, surf) = scene();
        let view = Vec3::z();
        let base = orient_surface_frame(&skel, &bnd, &surf, &view).unwrap();
        let tr = Vec3::from(t);
        let map = |v: &[Vec3]| v.iter().map(|p| rot * p + tr).collect::<Vec<_>>();
        let moved = orient_surface_frame(&map(&skel), &map(&bnd), &map(&surf), &(rot * view)).unwrap();
        prop_assert!((moved.frame.axes - rot.matrix() * base.frame.axes).norm() < 1e-6);
        prop_assert!((moved.frame.origin - (rot * base.frame.origin + tr)).norm() < 1e-6);
    }

    #[test]
    fn surface_frame_from_any_orthonormal_pair(rot in rotation_strategy()) {
        let s = SurfaceFrame::from_axes(Vec3::zeros(), rot * Vec3::x(), rot * Vec3::z());
        prop_assert!(check_frame(&s.frame));
        prop_assert!((s.primary_axis - rot * Vec3::y()).norm() < 1e-9);
    }
}
