//! Synthetic stand-ins for the segmentation and keypoint models, plus pinhole
//! back-projection of masks into 3D point sets.
//!
//! Segmentation noise is a uniform dilate/erode of the gallbladder interface,
//! random class flips and a 3×3 majority (median) filter. Keypoints are exact
//! pinhole projections of rigid instrument landmarks with Gaussian pixel noise,
//! independent dropout and edge-of-image dropout. Every draw comes from a
//! generator keyed by `(seed, tick)`.

use nalgebra::{Matrix3, SVD};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Frame, PointSet3, Vec3};
use crate::grid::{BinaryMask, DepthMap, Grid, LabelMask, TissueClass, NEIGHBORS_8};
use crate::rng::{stream_rng, SimRng, Stream};

#[derive(Debug, Error, PartialEq)]
pub enum PerceptionError {
    #[error("mask is {mask:?} but depth map is {depth:?}")]
    DimensionMismatch {
        mask: (usize, usize),
        depth: (usize, usize),
    },
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid noise profile: {0}")]
    InvalidNoise(String),
}

/// Pinhole camera whose optical axis is the camera-frame +z axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    /// Pixels.
    pub focal_length: f64,
    /// Pixels, `[u, v]`.
    pub principal_point: [f64; 2],
    pub view_direction: [f64; 3],
}

impl CameraModel {
    pub fn new(focal_length: f64, principal_point: [f64; 2]) -> Self {
        Self {
            focal_length,
            principal_point,
            view_direction: [0.0, 0.0, 1.0],
        }
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        if !(self.focal_length > 0.0 && self.focal_length.is_finite()) {
            return Err(PerceptionError::InvalidCamera(format!(
                "focal_length must be positive, got {}",
                self.focal_length
            )));
        }
        if ((self.view().norm()) - 1.0).abs() > 1e-9 {
            return Err(PerceptionError::InvalidCamera(
                "view_direction must be a unit vector".into(),
            ));
        }
        Ok(())
    }

    pub fn view(&self) -> Vec3 {
        Vec3::new(
            self.view_direction[0],
            self.view_direction[1],
            self.view_direction[2],
        )
    }

    /// Pixel coordinates of a camera-frame point; `None` when behind the camera.
    pub fn project(&self, p: &Vec3) -> Option<[f64; 2]> {
        if p.z <= 0.0 {
            return None;
        }
        Some([
            self.focal_length * p.x / p.z + self.principal_point[0],
            self.focal_length * p.y / p.z + self.principal_point[1],
        ])
    }

    /// Inverse pinhole: the point at `depth` along the ray through pixel `(u, v)`.
    pub fn back_project_pixel(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        Vec3::new(
            (u - self.principal_point[0]) * depth / self.focal_length,
            (v - self.principal_point[1]) * depth / self.focal_length,
            depth,
        )
    }
}

/// Perception error model. See [`NoiseProfile::preset`] for the named presets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub boundary_jitter_px: f64,
    pub pixel_flip_rate: f64,
    pub keypoint_sigma_px: f64,
    pub keypoint_dropout_rate: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl NoiseProfile {
    pub fn zero() -> Self {
        Self {
            boundary_jitter_px: 0.0,
            pixel_flip_rate: 0.0,
            keypoint_sigma_px: 0.0,
            keypoint_dropout_rate: 0.0,
            rng_seed: 0,
        }
    }

    /// "YOLO-like" preset.
    pub fn low() -> Self {
        Self {
            boundary_jitter_px: 1.0,
            pixel_flip_rate: 0.005,
            keypoint_sigma_px: 1.0,
            keypoint_dropout_rate: 0.01,
            rng_seed: 0,
        }
    }

    /// "DT2-like" preset.
    pub fn high() -> Self {
        Self {
            boundary_jitter_px: 3.0,
            pixel_flip_rate: 0.03,
            keypoint_sigma_px: 3.0,
            keypoint_dropout_rate: 0.10,
            rng_seed: 0,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "zero" => Some(Self::zero()),
            "low" => Some(Self::low()),
            "high" => Some(Self::high()),
            _ => None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        let rate_ok = |r: f64| (0.0..=1.0).contains(&r);
        if !rate_ok(self.pixel_flip_rate) || !rate_ok(self.keypoint_dropout_rate) {
            return Err(PerceptionError::InvalidNoise(
                "rates must lie in [0, 1]".into(),
            ));
        }
        if !(self.boundary_jitter_px >= 0.0 && self.keypoint_sigma_px >= 0.0) {
            return Err(PerceptionError::InvalidNoise(
                "jitter and sigma must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Per-class binary masks as a segmentation model would report them.
#[derive(Debug, Clone, PartialEq)]
pub struct SegObservation {
    pub liver: BinaryMask,
    pub gallbladder: BinaryMask,
    pub liver_bed: BinaryMask,
    pub tick: u64,
}

pub fn observe_segmentation(labels: &LabelMask, noise: &NoiseProfile, tick: u64) -> SegObservation {
    let mut rng = stream_rng(noise.rng_seed, tick, Stream::Segmentation);
    let mut working = labels.clone();

    // One shift per observation, drawn even when it rounds to zero so the stream
    // layout does not depend on the jitter amplitude.
    let shift = (rng.random::<f64>() * 2.0 - 1.0) * noise.boundary_jitter_px;
    let shift = shift.round() as i64;
    if shift > 0 {
        for _ in 0..shift {
            working = dilate_class(&working, TissueClass::Gallbladder);
        }
    } else if shift < 0 {
        for _ in 0..(-shift) {
            working = erode_class(&working, TissueClass::Gallbladder);
        }
    }

    if noise.pixel_flip_rate > 0.0 {
        let data: Vec<TissueClass> = working
            .data()
            .iter()
            .map(|&c| {
                if rng.random::<f64>() < noise.pixel_flip_rate {
                    let k = rng.random_range(0..3u8);
                    let others: Vec<TissueClass> =
                        TissueClass::ALL.iter().copied().filter(|&o| o != c).collect();
                    others[k as usize]
                } else {
                    c
                }
            })
            .collect();
        working = Grid::from_vec(working.width(), working.height(), data);
    }

    if noise.pixel_flip_rate > 0.0 {
        working = mode3(&working);
    }
    SegObservation {
        liver: working.class_mask(TissueClass::Liver),
        gallbladder: working.class_mask(TissueClass::Gallbladder),
        liver_bed: working.class_mask(TissueClass::LiverBed),
        tick,
    }
}

fn dilate_class(labels: &LabelMask, class: TissueClass) -> LabelMask {
    let mask = labels.class_mask(class);
    Grid::from_fn(labels.width(), labels.height(), |x, y| {
        let c = *labels.get(x, y);
        if c != class && mask.any_neighbor8(x, y) {
            class
        } else {
            c
        }
    })
}

/// Peels one layer off `class`; each removed pixel takes the most common
/// neighbouring class (ties go to the higher class id).
fn erode_class(labels: &LabelMask, class: TissueClass) -> LabelMask {
    Grid::from_fn(labels.width(), labels.height(), |x, y| {
        let c = *labels.get(x, y);
        if c != class {
            return c;
        }
        let mut counts = [0usize; 4];
        for &(dx, dy) in &NEIGHBORS_8 {
            if let Some(&n) = labels.get_signed(x as i64 + dx, y as i64 + dy) {
                if n != class {
                    counts[n.id() as usize] += 1;
                }
            }
        }
        let best = (0..4).rev().max_by_key(|&i| counts[i]).unwrap();
        if counts[best] == 0 {
            c
        } else {
            TissueClass::ALL[best]
        }
    })
}

/// 3×3 categorical median: each pixel takes the most frequent class among its
/// in-bounds window, ties going to the lowest class id.
pub fn mode3(labels: &LabelMask) -> LabelMask {
    Grid::from_fn(labels.width(), labels.height(), |x, y| {
        let mut counts = [0usize; 4];
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                if let Some(&c) = labels.get_signed(x as i64 + dx, y as i64 + dy) {
                    counts[c.id() as usize] += 1;
                }
            }
        }
        let best = *counts.iter().max().unwrap();
        TissueClass::ALL[counts.iter().position(|&n| n == best).unwrap()]
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InstrumentKind {
    /// Fenestrated bipolar forceps (grasping arm).
    Fbf,
    /// Permanent cautery hook (energy arm).
    Pch,
}

impl InstrumentKind {
    /// Rigid landmarks in the instrument frame (mm).
    ///
    /// FBF: +x points through the jaws into the tissue, the shaft runs back along −x.
    /// PCH: +z runs up the shaft away from the hook tip at the origin.
    pub fn landmarks(self) -> &'static [(&'static str, [f64; 3])] {
        match self {
            InstrumentKind::Fbf => &[
                ("jaw_tip", [0.0, 0.0, 0.0]),
                ("jaw_left", [-2.0, 1.5, 0.0]),
                ("jaw_right", [-2.0, -1.5, 0.0]),
                ("wrist", [-8.0, 0.0, 0.0]),
                ("shaft", [-20.0, 0.0, 0.0]),
            ],
            InstrumentKind::Pch => &[
                ("hook_tip", [0.0, 0.0, 0.0]),
                ("hook_bend", [1.5, 0.0, 1.0]),
                ("shaft_near", [0.0, 0.0, 8.0]),
                ("shaft_far", [0.0, 0.0, 20.0]),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub name: String,
    /// `None` when the detector dropped this keypoint.
    pub pixel: Option<[f64; 2]>,
    /// Stereo depth sampled near the keypoint (mm); `None` when dropped.
    pub depth: Option<f64>,
    pub confidence: f64,
}

impl Keypoint {
    pub fn is_dropped(&self) -> bool {
        self.pixel.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentKeypoints {
    pub kind: InstrumentKind,
    pub keypoints: Vec<Keypoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointObservation {
    pub tick: u64,
    pub instruments: Vec<InstrumentKeypoints>,
}

impl KeypointObservation {
    pub fn instrument(&self, kind: InstrumentKind) -> Option<&InstrumentKeypoints> {
        self.instruments.iter().find(|i| i.kind == kind)
    }
}

/// Projects the landmarks of each instrument, adds pixel noise and drops
/// keypoints at random or when they fall outside the `image_size` frame.
pub fn observe_keypoints(
    poses: &[(InstrumentKind, Frame)],
    camera: &CameraModel,
    noise: &NoiseProfile,
    image_size: (usize, usize),
    tick: u64,
) -> KeypointObservation {
    let mut rng = stream_rng(noise.rng_seed, tick, Stream::Keypoints);
    let instruments = poses
        .iter()
        .map(|(kind, pose)| InstrumentKeypoints {
            kind: *kind,
            keypoints: kind
                .landmarks()
                .iter()
                .map(|(name, local)| {
                    let world = pose.to_parent(&Vec3::new(local[0], local[1], local[2]));
                    observe_landmark(name, &world, camera, noise, image_size, &mut rng)
                })
                .collect(),
        })
        .collect();
    KeypointObservation { tick, instruments }
}

fn observe_landmark(
    name: &str,
    world: &Vec3,
    camera: &CameraModel,
    noise: &NoiseProfile,
    (width, height): (usize, usize),
    rng: &mut SimRng,
) -> Keypoint {
    // Fixed number of draws per landmark keeps streams aligned across outcomes.
    let dropout_draw: f64 = rng.random();
    let gauss = [
        standard_normal(rng),
        standard_normal(rng),
        standard_normal(rng),
    ];
    let dropped = Keypoint {
        name: name.to_string(),
        pixel: None,
        depth: None,
        confidence: 0.0,
    };
    let Some(exact) = camera.project(world) else {
        return dropped;
    };
    if dropout_draw < noise.keypoint_dropout_rate {
        return dropped;
    }
    let sigma = noise.keypoint_sigma_px;
    let u = exact[0] + sigma * gauss[0];
    let v = exact[1] + sigma * gauss[1];
    let inside = u > -0.5 && v > -0.5 && u < width as f64 - 0.5 && v < height as f64 - 0.5;
    if !inside {
        return dropped;
    }
    let depth_sigma = sigma * world.z / camera.focal_length;
    let offset = ((u - exact[0]).powi(2) + (v - exact[1]).powi(2)).sqrt();
    Keypoint {
        name: name.to_string(),
        pixel: Some([u, v]),
        depth: Some(world.z + depth_sigma * gauss[2]),
        confidence: 1.0 / (1.0 + offset),
    }
}

fn standard_normal(rng: &mut SimRng) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").sample(rng)
}

/// Least-squares rigid fit of the instrument model onto the lifted keypoints.
/// Needs at least three non-collinear surviving keypoints.
pub fn recover_pose(observed: &InstrumentKeypoints, camera: &CameraModel) -> Option<Frame> {
    let mut model = Vec::new();
    let mut seen = Vec::new();
    for (kp, (_, local)) in observed.keypoints.iter().zip(observed.kind.landmarks()) {
        if let (Some([u, v]), Some(d)) = (kp.pixel, kp.depth) {
            model.push(Vec3::new(local[0], local[1], local[2]));
            seen.push(camera.back_project_pixel(u, v, d));
        }
    }
    rigid_fit(&model, &seen)
}

/// Kabsch: rotation `R` and translation `t` minimising `Σ |R·mᵢ + t − sᵢ|²`.
pub fn rigid_fit(model: &[Vec3], seen: &[Vec3]) -> Option<Frame> {
    if model.len() < 3 || model.len() != seen.len() {
        return None;
    }
    let n = model.len() as f64;
    let mc = model.iter().sum::<Vec3>() / n;
    let sc = seen.iter().sum::<Vec3>() / n;
    let mut h = Matrix3::zeros();
    for (m, s) in model.iter().zip(seen) {
        h += (m - mc) * (s - sc).transpose();
    }
    let svd = SVD::new(h, true, true);
    // Rank < 2 means the surviving landmarks are collinear.
    let mut sv = svd.singular_values.iter().copied().collect::<Vec<_>>();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv[1] <= 1e-9 * sv[0].max(1e-300) {
        return None;
    }
    let u = svd.u?;
    let vt = svd.v_t?;
    let mut d = Matrix3::identity();
    if (vt.transpose() * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = vt.transpose() * d * u.transpose();
    Some(Frame {
        origin: sc - r * mc,
        axes: r,
    })
}

/// One 3D point per set pixel, in row-major order.
pub fn back_project(
    mask: &BinaryMask,
    depth: &DepthMap,
    camera: &CameraModel,
) -> Result<PointSet3, PerceptionError> {
    if !mask.same_dims(depth) {
        return Err(PerceptionError::DimensionMismatch {
            mask: mask.dims(),
            depth: depth.dims(),
        });
    }
    Ok(mask
        .iter_coords()
        .filter(|(_, _, &on)| on)
        .map(|(x, y, _)| camera.back_project_pixel(x as f64, y as f64, *depth.get(x, y)))
        .collect())
}

/// Back-projects an explicit pixel list, preserving its order.
pub fn back_project_pixels(
    pixels: &[(usize, usize)],
    depth: &DepthMap,
    camera: &CameraModel,
) -> PointSet3 {
    pixels
        .iter()
        .map(|&(x, y)| camera.back_project_pixel(x as f64, y as f64, *depth.get(x, y)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_filter_removes_speckle_and_keeps_strips() {
        let mut labels = LabelMask::new(9, 9, TissueClass::Liver);
        labels.set(4, 4, TissueClass::Gallbladder);
        assert_eq!(mode3(&labels).class_count(TissueClass::Gallbladder), 0);
        // Two-pixel gallbladder strip inside liver survives.
        let strip = Grid::from_fn(9, 9, |x, _| if (3..5).contains(&x) { TissueClass::Gallbladder } else { TissueClass::Liver });
        assert_eq!(mode3(&strip), strip);
    }

    fn cam() -> CameraModel {
        CameraModel::new(500.0, [32.0, 32.0])
    }

    #[test]
    fn principal_point_lies_on_the_optical_axis() {
        let p = cam().back_project_pixel(32.0, 32.0, 80.0);
        assert_eq!(p, Vec3::new(0.0, 0.0, 80.0));
    }

    #[test]
    fn square_back_projection_matches_similar_triangles() {
        // Oracle: X = (u - cx) * Z / f with f = 500 px, Z = 100 mm.
        let mut mask = BinaryMask::new(64, 64, false);
        for &(x, y) in &[(40, 30), (41, 30), (40, 31), (41, 31)] {
            mask.set(x, y, true);
        }
        let depth = DepthMap::new(64, 64, 100.0);
        let pts = back_project(&mask, &depth, &cam()).unwrap();
        let expected = [
            (8.0 * 0.2, -2.0 * 0.2),
            (9.0 * 0.2, -2.0 * 0.2),
            (8.0 * 0.2, -1.0 * 0.2),
            (9.0 * 0.2, -1.0 * 0.2),
        ];
        assert_eq!(pts.len(), 4);
        for (p, (ex, ey)) in pts.iter().zip(expected) {
            assert!((p.x - ex).abs() < 1e-12 && (p.y - ey).abs() < 1e-12);
            assert_eq!(p.z, 100.0);
        }
    }

    #[test]
    fn empty_mask_gives_no_points() {
        let mask = BinaryMask::new(8, 8, false);
        let depth = DepthMap::new(8, 8, 10.0);
        assert!(back_project(&mask, &depth, &cam()).unwrap().is_empty());
    }

    #[test]
    fn mismatched_depth_is_rejected() {
        let mask = BinaryMask::new(8, 8, true);
        let depth = DepthMap::new(8, 9, 10.0);
        assert!(matches!(
            back_project(&mask, &depth, &cam()),
            Err(PerceptionError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn projection_round_trip_on_pixel_centres() {
        let c = cam();
        for (u, v, d) in [(3.0, 60.0, 95.5), (32.0, 10.0, 120.0), (63.0, 63.0, 1.5)] {
            let p = c.back_project_pixel(u, v, d);
            let [pu, pv] = c.project(&p).unwrap();
            assert!((pu - u).abs() < 1e-9 && (pv - v).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_noise_segmentation_is_identity() {
        let labels = Grid::from_fn(20, 20, |x, y| match (x / 5 + y / 7) % 4 {
            0 => TissueClass::Background,
            1 => TissueClass::Liver,
            2 => TissueClass::Gallbladder,
            _ => TissueClass::LiverBed,
        });
        let obs = observe_segmentation(&labels, &NoiseProfile::zero(), 4);
        assert_eq!(obs.liver, labels.class_mask(TissueClass::Liver));
        assert_eq!(obs.gallbladder, labels.class_mask(TissueClass::Gallbladder));
        assert_eq!(obs.liver_bed, labels.class_mask(TissueClass::LiverBed));
    }

    #[test]
    fn segmentation_is_reproducible_per_seed_and_tick() {
        let labels = Grid::from_fn(30, 30, |x, _| {
            if x < 15 {
                TissueClass::Gallbladder
            } else {
                TissueClass::Liver
            }
        });
        let noise = NoiseProfile::high().with_seed(11);
        assert_eq!(
            observe_segmentation(&labels, &noise, 2),
            observe_segmentation(&labels, &noise, 2)
        );
    }

    #[test]
    fn noiseless_keypoints_are_exact_projections() {
        let c = cam();
        let pose = Frame::identity_at(Vec3::new(0.0, 0.0, 100.0));
        let obs = observe_keypoints(
            &[(InstrumentKind::Pch, pose)],
            &c,
            &NoiseProfile::zero(),
            (64, 64),
            0,
        );
        let kps = &obs.instruments[0].keypoints;
        for (kp, (_, local)) in kps.iter().zip(InstrumentKind::Pch.landmarks()) {
            let world = pose.to_parent(&Vec3::new(local[0], local[1], local[2]));
            let exact = c.project(&world).unwrap();
            assert_eq!(kp.pixel, Some(exact));
            assert_eq!(kp.depth, Some(world.z));
        }
        let fit = recover_pose(&obs.instruments[0], &c).unwrap();
        assert!((fit.origin - pose.origin).norm() < 1e-9);
        assert!((fit.axes - pose.axes).norm() < 1e-9);
    }

    #[test]
    fn tip_outside_the_image_is_dropped() {
        let c = cam();
        // 100 mm deep, 8 mm off-axis puts the tip 40 px right of centre: outside 64 px.
        let pose = Frame::identity_at(Vec3::new(8.0, 0.0, 100.0));
        let obs = observe_keypoints(
            &[(InstrumentKind::Pch, pose)],
            &c,
            &NoiseProfile::zero(),
            (64, 64),
            0,
        );
        let tip = &obs.instruments[0].keypoints[0];
        assert_eq!(tip.name, "hook_tip");
        assert!(tip.is_dropped());
        assert_eq!(tip.confidence, 0.0);
    }

    #[test]
    fn keypoint_noise_has_requested_spread() {
        // Monte-Carlo oracle: sample std over 1000 seeded draws within 10 % of sigma.
        let c = cam();
        let pose = Frame::identity_at(Vec3::new(0.0, 0.0, 100.0));
        let noise = NoiseProfile {
            keypoint_sigma_px: 2.0,
            ..NoiseProfile::zero()
        }
        .with_seed(5);
        let exact = c.project(&pose.origin).unwrap()[0];
        let samples: Vec<f64> = (0..1000)
            .map(|tick| {
                let obs =
                    observe_keypoints(&[(InstrumentKind::Pch, pose)], &c, &noise, (64, 64), tick);
                obs.instruments[0].keypoints[0].pixel.unwrap()[0] - exact
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>()
            / (samples.len() - 1) as f64;
        let std = var.sqrt();
        assert!((std - 2.0).abs() < 0.2, "std = {std}");
    }

    #[test]
    fn collinear_landmarks_cannot_be_fitted() {
        let model = [Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0];
        assert!(rigid_fit(&model, &model).is_none());
    }
}
