//! PCA surface frames and the instrument goal poses derived from them.

use nalgebra::{Matrix3, SymmetricEigen};
use thiserror::Error;

use crate::geometry::{centroid, Frame, Vec3};

/// Minimum second-largest covariance eigenvalue (mm²) for a usable point set.
pub const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum FrameError {
    #[error("point set is degenerate ({n} points, second variance {second_variance:e} mm²)")]
    DegeneratePointSet { n: usize, second_variance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcaResult {
    pub centroid: Vec3,
    /// Unit axes ordered by descending variance.
    pub axes: [Vec3; 3],
    pub variances: [f64; 3],
}

/// Flips `v` so that its largest-magnitude coordinate is positive.
fn canonical_sign(v: Vec3) -> Vec3 {
    let k = v.iamax();
    if v[k] < 0.0 {
        -v
    } else {
        v
    }
}

pub fn pca_axes(points: &[Vec3]) -> Result<PcaResult, FrameError> {
    let degenerate = |second_variance| FrameError::DegeneratePointSet {
        n: points.len(),
        second_variance,
    };
    if points.len() < 3 {
        return Err(degenerate(0.0));
    }
    let c = centroid(points).unwrap();
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - c;
        cov += d * d.transpose();
    }
    cov /= points.len() as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let variances = order.map(|i| eig.eigenvalues[i].max(0.0));
    if variances[1] < DEGENERACY_TOL {
        return Err(degenerate(variances[1]));
    }
    let axes = order.map(|i| canonical_sign(eig.eigenvectors.column(i).into_owned().normalize()));
    Ok(PcaResult {
        centroid: c,
        axes,
        variances,
    })
}

/// Local frame on the gallbladder surface between skeleton and boundary.
///
/// `frame` columns are `(secondary, primary, normal)`, which makes the frame
/// right-handed with `primary = normal × secondary`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceFrame {
    pub frame: Frame,
    pub primary_axis: Vec3,
    pub secondary_axis: Vec3,
    pub normal_axis: Vec3,
}

impl SurfaceFrame {
    pub fn from_axes(origin: Vec3, secondary: Vec3, normal: Vec3) -> Self {
        let primary = normal.cross(&secondary);
        Self {
            frame: Frame::from_axes(origin, secondary, primary, normal),
            primary_axis: primary,
            secondary_axis: secondary,
            normal_axis: normal,
        }
    }
}

/// PCA of `surface_points`, with the secondary axis turned toward the boundary
/// and the normal turned along the viewing direction.
pub fn orient_surface_frame(
    skeleton: &[Vec3],
    boundary: &[Vec3],
    surface_points: &[Vec3],
    view_direction: &Vec3,
) -> Result<SurfaceFrame, FrameError> {
    let pca = pca_axes(surface_points)?;
    let mut secondary = pca.axes[1];
    let mut normal = pca.axes[2];
    if let (Some(s), Some(b)) = (centroid(skeleton), centroid(boundary)) {
        if secondary.dot(&(b - s)) < 0.0 {
            secondary = -secondary;
        }
    }
    if normal.dot(view_direction) < 0.0 {
        normal = -normal;
    }
    Ok(SurfaceFrame::from_axes(pca.centroid, secondary, normal))
}

/// FBF goal: +x along the surface normal, +z along the secondary axis (so the
/// pull along −z runs from the boundary toward the skeleton), y completes.
pub fn fbf_goal_from_surface(s: &SurfaceFrame, grasp_point: &Vec3) -> Frame {
    let x = s.normal_axis;
    let z = s.secondary_axis;
    Frame::from_axes(*grasp_point, x, z.cross(&x), z)
}

/// PCH goal: shaft (+z) along −normal, +x along the secondary axis.
pub fn pch_goal_from_surface(s: &SurfaceFrame, target_point: &Vec3) -> Frame {
    let z = -s.normal_axis;
    let x = s.secondary_axis;
    Frame::from_axes(*target_point, x, z.cross(&x), z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ORTHONORMAL_TOL;

    fn planar_patch(x0: f64, x1: f64) -> Vec<Vec3> {
        let mut pts = Vec::new();
        for i in 0..=10 {
            for j in 0..=30 {
                let x = x0 + (x1 - x0) * i as f64 / 10.0;
                pts.push(Vec3::new(x, -15.0 + j as f64, 0.0));
            }
        }
        pts
    }

    fn column(x: f64) -> Vec<Vec3> {
        (0..20).map(|j| Vec3::new(x, -10.0 + j as f64, 0.0)).collect()
    }

    #[test]
    fn dominant_axis_is_recovered() {
        let eps = 1e-3;
        let pts = [
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(1.0, eps, 0.0),
            Vec3::new(-1.0, eps, 0.0),
        ];
        let pca = pca_axes(&pts).unwrap();
        assert!((pca.axes[0].x.abs() - 1.0).abs() < 1e-12);
        assert!(pca.variances[0] / pca.variances[1] > 1e5);
        assert!(pca.axes[0].x > 0.0);
    }

    #[test]
    fn repeated_point_is_degenerate() {
        let pts = vec![Vec3::new(1.0, 2.0, 3.0); 10];
        assert!(matches!(pca_axes(&pts), Err(FrameError::DegeneratePointSet { .. })));
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pts: Vec<_> = (0..10).map(|i| Vec3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert!(pca_axes(&pts).is_err());
    }

    #[test]
    fn canonical_scene_orients_as_expected() {
        let s = orient_surface_frame(&column(0.0), &column(5.0), &planar_patch(0.0, 5.0), &Vec3::z())
            .unwrap();
        assert!((s.secondary_axis - Vec3::x()).norm() < 1e-9);
        assert!((s.normal_axis - Vec3::z()).norm() < 1e-9);
        assert!((s.primary_axis - Vec3::y()).norm() < 1e-9);
        assert!(s.frame.is_right_handed(ORTHONORMAL_TOL));
    }

    #[test]
    fn mirrored_scene_flips_secondary_only() {
        let s = orient_surface_frame(
            &column(0.0),
            &column(-5.0),
            &planar_patch(-5.0, 0.0),
            &Vec3::z(),
        )
        .unwrap();
        assert!((s.secondary_axis + Vec3::x()).norm() < 1e-9);
        assert!((s.normal_axis - Vec3::z()).norm() < 1e-9);
        assert!(s.frame.is_right_handed(ORTHONORMAL_TOL));
    }

    #[test]
    fn uniform_scaling_keeps_directions() {
        let skel = column(0.0);
        let bnd = column(5.0);
        let surf: Vec<_> = planar_patch(0.0, 5.0)
            .into_iter()
            .map(|p| p + Vec3::new(0.0, 0.0, 0.05 * p.x * p.y))
            .collect();
        let a = orient_surface_frame(&skel, &bnd, &surf, &Vec3::z()).unwrap();
        let k = 3.7;
        let scale = |v: &[Vec3]| v.iter().map(|p| p * k).collect::<Vec<_>>();
        let b = orient_surface_frame(&scale(&skel), &scale(&bnd), &scale(&surf), &Vec3::z()).unwrap();
        assert!((a.frame.axes - b.frame.axes).norm() < 1e-9);
        assert!((a.frame.origin * k - b.frame.origin).norm() < 1e-9);
    }

    #[test]
    fn canonical_fbf_goal() {
        let s = SurfaceFrame::from_axes(Vec3::zeros(), Vec3::x(), Vec3::z());
        let g = fbf_goal_from_surface(&s, &Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(g.x_axis(), Vec3::z());
        assert_eq!(g.z_axis(), Vec3::x());
        assert!(g.is_right_handed(ORTHONORMAL_TOL));
        assert_eq!(g.origin, Vec3::new(1.0, 2.0, 3.0));
        let mirrored = SurfaceFrame::from_axes(Vec3::zeros(), -Vec3::x(), Vec3::z());
        let gm = fbf_goal_from_surface(&mirrored, &Vec3::zeros());
        assert_eq!(gm.z_axis(), -Vec3::x());
        assert!(gm.is_right_handed(ORTHONORMAL_TOL));
    }

    #[test]
    fn canonical_pch_goal() {
        let s = SurfaceFrame::from_axes(Vec3::zeros(), Vec3::x(), Vec3::z());
        let target = Vec3::new(4.0, -1.0, 90.0);
        let g = pch_goal_from_surface(&s, &target);
        assert_eq!(g.z_axis(), -Vec3::z());
        assert_eq!(g.origin, target);
        assert!(g.is_right_handed(ORTHONORMAL_TOL));
    }
}
