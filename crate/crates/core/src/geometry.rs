//! Rigid frames and small vector helpers shared by every module.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;
pub type PointSet3 = Vec<Vec3>;

/// Tolerance used when checking that an axis triple is orthonormal.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Right-handed orthonormal pose. Columns of `axes` are the x, y and z axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "FrameRecord", into = "FrameRecord")]
pub struct Frame {
    pub origin: Vec3,
    pub axes: Matrix3<f64>,
}

impl Frame {
    pub fn identity_at(origin: Vec3) -> Self {
        Self {
            origin,
            axes: Matrix3::identity(),
        }
    }

    pub fn from_axes(origin: Vec3, x: Vec3, y: Vec3, z: Vec3) -> Self {
        Self {
            origin,
            axes: Matrix3::from_columns(&[x, y, z]),
        }
    }

    pub fn x_axis(&self) -> Vec3 {
        self.axes.column(0).into_owned()
    }

    pub fn y_axis(&self) -> Vec3 {
        self.axes.column(1).into_owned()
    }

    pub fn z_axis(&self) -> Vec3 {
        self.axes.column(2).into_owned()
    }

    /// Maps a point given in this frame's coordinates into the parent frame.
    pub fn to_parent(&self, local: &Vec3) -> Vec3 {
        self.origin + self.axes * local
    }

    pub fn with_origin(mut self, origin: Vec3) -> Self {
        self.origin = origin;
        self
    }

    /// Largest deviation of `axesᵀ·axes` from identity.
    pub fn orthonormality_error(&self) -> f64 {
        (self.axes.transpose() * self.axes - Matrix3::identity())
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_right_handed(&self, tol: f64) -> bool {
        self.orthonormality_error() <= tol && (self.axes.determinant() - 1.0).abs() <= tol
    }
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    origin: [f64; 3],
    /// Column-major: `axes[0]` is the x axis.
    axes: [[f64; 3]; 3],
}

impl From<Frame> for FrameRecord {
    fn from(f: Frame) -> Self {
        let col = |i: usize| {
            let c = f.axes.column(i);
            [c[0], c[1], c[2]]
        };
        FrameRecord {
            origin: [f.origin.x, f.origin.y, f.origin.z],
            axes: [col(0), col(1), col(2)],
        }
    }
}

impl From<FrameRecord> for Frame {
    fn from(r: FrameRecord) -> Self {
        let v = |a: [f64; 3]| Vec3::new(a[0], a[1], a[2]);
        Frame::from_axes(v(r.origin), v(r.axes[0]), v(r.axes[1]), v(r.axes[2]))
    }
}

pub fn centroid(points: &[Vec3]) -> Option<Vec3> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
    Some(sum / points.len() as f64)
}

pub fn polyline_length(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}
