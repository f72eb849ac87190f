use std::f64::consts::TAU;

use super::{components8, MaskError};
use crate::geometry::PointSet3;
use crate::grid::{BinaryMask, DepthMap};
use crate::perception::{back_project_pixels, CameraModel};

/// Runs shorter than this are treated as segmentation speckle when a longer run exists.
pub const MIN_RUN_PX: usize = 3;

/// Liver/gallbladder interface, ordered clockwise about the gallbladder centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPolyline {
    pub pixels: Vec<(usize, usize)>,
    pub points3d: PointSet3,
    /// Pixel coordinates `[x, y]` of the gallbladder centroid.
    pub ordering_origin: [f64; 2],
}

impl BoundaryPolyline {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Clockwise screen angle of `(x, y)` about `origin`, in `[0, 2π)`, measured from
/// 12 o'clock with y pointing down.
pub fn clockwise_angle(x: f64, y: f64, origin: [f64; 2]) -> f64 {
    let dx = x - origin[0];
    let dy = y - origin[1];
    let a = dx.atan2(-dy);
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}

/// Sorts pixels clockwise about `origin`; ties go to the smaller radius, then raster order.
pub fn order_clockwise(points: &[(usize, usize)], origin: [f64; 2]) -> Vec<(usize, usize)> {
    let mut keyed: Vec<_> = points
        .iter()
        .map(|&(x, y)| {
            let (fx, fy) = (x as f64, y as f64);
            let r2 = (fx - origin[0]).powi(2) + (fy - origin[1]).powi(2);
            (clockwise_angle(fx, fy, origin), r2, (x, y))
        })
        .collect();
    keyed.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then((a.2 .1, a.2 .0).cmp(&(b.2 .1, b.2 .0)))
    });
    keyed.into_iter().map(|(_, _, p)| p).collect()
}

fn mean_xy(pixels: &[(usize, usize)]) -> [f64; 2] {
    let n = pixels.len() as f64;
    let (sx, sy) = pixels
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
    [sx / n, sy / n]
}

/// Unit minor axis of the 2D pixel covariance.
fn minor_axis(pixels: &[(usize, usize)], c: [f64; 2]) -> [f64; 2] {
    let n = pixels.len() as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in pixels {
        let dx = x as f64 - c[0];
        let dy = y as f64 - c[1];
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let (sxx, syy, sxy) = (sxx / n, syy / n, sxy / n);
    // Major-axis angle of a symmetric 2×2 matrix; the minor axis is perpendicular.
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    [-theta.sin(), theta.cos()]
}

/// Gallbladder pixels 8-adjacent to liver or liver bed, restricted to the runs
/// on the boundary side of the gallbladder's principal axis, ordered clockwise.
pub fn extract_boundary(
    gallbladder: &BinaryMask,
    liver: &BinaryMask,
    liver_bed: &BinaryMask,
    depth: &DepthMap,
    camera: &CameraModel,
) -> Result<BoundaryPolyline, MaskError> {
    if !gallbladder.same_dims(liver) || !gallbladder.same_dims(liver_bed) || !gallbladder.same_dims(depth)
    {
        return Err(MaskError::DimensionMismatch);
    }
    let neighbour_tissue = liver.or(liver_bed).and_not(gallbladder);
    let (w, h) = gallbladder.dims();
    let edge = BinaryMask::from_fn(w, h, |x, y| {
        *gallbladder.get(x, y) && neighbour_tissue.any_neighbor8(x, y)
    });
    if edge.is_empty_mask() {
        return Err(MaskError::EmptyBoundary);
    }

    let gb_pixels = gallbladder.pixels();
    let origin = mean_xy(&gb_pixels);
    let selected = select_runs(components8(&edge), &gb_pixels, origin);
    let pixels = order_clockwise(&selected, origin);
    let points3d = back_project_pixels(&pixels, depth, camera);
    Ok(BoundaryPolyline {
        pixels,
        points3d,
        ordering_origin: origin,
    })
}

fn select_runs(
    runs: Vec<Vec<(usize, usize)>>,
    gb_pixels: &[(usize, usize)],
    origin: [f64; 2],
) -> Vec<(usize, usize)> {
    if runs.len() == 1 {
        return runs.into_iter().next().unwrap();
    }
    let all: Vec<_> = runs.iter().flatten().copied().collect();
    let edge_mean = mean_xy(&all);
    let mut axis = minor_axis(gb_pixels, origin);
    let toward = [edge_mean[0] - origin[0], edge_mean[1] - origin[1]];
    if axis[0] * toward[0] + axis[1] * toward[1] < 0.0 {
        axis = [-axis[0], -axis[1]];
    }
    let side = |run: &[(usize, usize)]| {
        let c = mean_xy(run);
        (c[0] - origin[0]) * axis[0] + (c[1] - origin[1]) * axis[1]
    };
    let keep: Vec<(usize, usize)> = runs
        .iter()
        .filter(|r| r.len() >= MIN_RUN_PX && side(r) > 0.0)
        .flatten()
        .copied()
        .collect();
    if keep.is_empty() {
        runs.into_iter().max_by_key(|r| r.len()).unwrap()
    } else {
        keep
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::CameraModel;

    #[test]
    fn clock_positions_come_out_clockwise() {
        let origin = [10.0, 10.0];
        // 9, 6, 3 and 12 o'clock shuffled.
        let pts = [(5, 10), (10, 15), (15, 10), (10, 5)];
        let ordered = order_clockwise(&pts, origin);
        assert_eq!(ordered, vec![(10, 5), (15, 10), (10, 15), (5, 10)]);
    }

    #[test]
    fn single_point_orders_to_itself() {
        assert_eq!(order_clockwise(&[(3, 4)], [0.0, 0.0]), vec![(3, 4)]);
    }

    #[test]
    fn equal_angles_break_ties_by_radius() {
        let ordered = order_clockwise(&[(10, 2), (10, 6)], [10.0, 10.0]);
        assert_eq!(ordered, vec![(10, 6), (10, 2)]);
    }

    #[test]
    fn square_sharing_an_edge_with_liver() {
        let (w, h) = (30, 30);
        let mut gb = BinaryMask::new(w, h, false);
        let mut liver = BinaryMask::new(w, h, false);
        for y in 10..20 {
            for x in 5..15 {
                gb.set(x, y, true);
            }
            for x in 15..25 {
                liver.set(x, y, true);
            }
        }
        let bed = BinaryMask::new(w, h, false);
        let depth = DepthMap::new(w, h, 50.0);
        let cam = CameraModel::new(100.0, [15.0, 15.0]);
        let b = extract_boundary(&gb, &liver, &bed, &depth, &cam).unwrap();
        let mut got = b.pixels.clone();
        got.sort();
        let expected: Vec<_> = (10..20).map(|y| (14, y)).collect();
        assert_eq!(got, expected);
        // Clockwise about a centroid to the left: top to bottom.
        assert_eq!(b.pixels, expected);
        assert_eq!(b.points3d.len(), 10);
    }

    #[test]
    fn no_contact_means_empty_boundary() {
        let mut gb = BinaryMask::new(20, 20, false);
        let mut liver = BinaryMask::new(20, 20, false);
        gb.set(2, 2, true);
        liver.set(10, 10, true);
        let res = extract_boundary(
            &gb,
            &liver,
            &BinaryMask::new(20, 20, false),
            &DepthMap::new(20, 20, 1.0),
            &CameraModel::new(10.0, [10.0, 10.0]),
        );
        assert_eq!(res, Err(MaskError::EmptyBoundary));
    }
}
