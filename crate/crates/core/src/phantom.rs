//! Synthetic liver/gallbladder scene standing in for the ex vivo specimen.
//!
//! The liver–gallbladder interface is a curve `n = h(s)` in a local frame
//! spanned by the first and last attachment control points (`s` along the
//! chord, `n` toward the liver). `h` is sampled at fine nodes; each node is
//! the sum of the control polyline, a waviness term scaled down by the
//! cumulative pull, and a bounded energy-induced perturbation. Labels and
//! depth are re-rendered from that geometry after every operation.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::grid::{BinaryMask, DepthMap, Grid, LabelMask, TissueClass, NEIGHBORS_8};
use crate::perception::CameraModel;
use crate::rng::{stream_rng, SimRng, Stream};

#[derive(Debug, Error, PartialEq)]
pub enum PhantomError {
    #[error("invalid phantom config: {0}")]
    InvalidConfig(String),
    #[error("no grasp established")]
    NoGrasp,
    #[error("pull step of {step:.3} mm exceeds the {limit:.3} mm limit")]
    PullExceedsLimit { step: f64, limit: f64 },
    #[error("grasp point does not project onto gallbladder tissue")]
    GraspOffTissue,
    #[error("energy radius must be positive, got {0}")]
    InvalidEnergyRadius(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomConfig {
    pub grid_width: usize,
    pub grid_height: usize,
    pub mm_per_pixel: f64,
    /// Plane mm, `[x, y]` with y down.
    pub gallbladder_center: [f64; 2],
    /// Semi-axes along x and y (mm).
    pub gallbladder_radii: [f64; 2],
    /// Control polyline of the initial interface (plane mm). Must be a graph over
    /// the chord from its first to its last point.
    pub attachment_arc: Vec<[f64; 2]>,
    /// RMS deviation of the initial attachment from its best-fit line (mm).
    pub initial_waviness_amplitude: f64,
    pub depth_base: f64,
    pub depth_bulge: f64,
    pub rng_seed: u64,
    /// Cumulative pull (mm) at which the waviness vanishes.
    pub pull_to_straight: f64,
    pub max_pull_step: f64,
    /// Bound on the energy-induced perpendicular perturbation (mm).
    pub deform_jitter: f64,
    /// Cautery footprint radius (mm) used by the controller.
    pub energy_radius: f64,
    /// Depth of the liver-bed strip exposed behind detached nodes (mm).
    pub band_depth: f64,
    /// Fraction of the pull carried by tissue at the grasp point.
    pub drag_fraction: f64,
    /// Gaussian radius of the pull drag field (mm).
    pub drag_radius: f64,
    /// Pixel gap the gallbladder retracts by once fully detached.
    pub retract_px: usize,
    /// Depth offset of the background behind the organs (mm).
    pub background_offset: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            grid_width: 200,
            grid_height: 200,
            mm_per_pixel: 0.25,
            gallbladder_center: [21.0, 25.0],
            gallbladder_radii: [14.0, 21.0],
            attachment_arc: vec![[29.0, 3.0], [29.0, 47.0]],
            initial_waviness_amplitude: 3.0,
            depth_base: 100.0,
            depth_bulge: 6.0,
            rng_seed: 0,
            pull_to_straight: 16.0,
            max_pull_step: 5.0,
            deform_jitter: 0.3,
            energy_radius: 6.0,
            band_depth: 0.5,
            drag_fraction: 0.3,
            drag_radius: 10.0,
            retract_px: 4,
            background_offset: 12.0,
        }
    }
}

impl PhantomConfig {
    pub fn extent_mm(&self) -> [f64; 2] {
        [
            (self.grid_width - 1) as f64 * self.mm_per_pixel,
            (self.grid_height - 1) as f64 * self.mm_per_pixel,
        ]
    }

    /// Pinhole camera under which one pixel spans `mm_per_pixel` at `depth_base`.
    pub fn camera(&self) -> CameraModel {
        CameraModel::new(
            self.depth_base / self.mm_per_pixel,
            [
                (self.grid_width - 1) as f64 / 2.0,
                (self.grid_height - 1) as f64 / 2.0,
            ],
        )
    }

    pub fn validate(&self) -> Result<(), PhantomError> {
        let bad = |msg: String| Err(PhantomError::InvalidConfig(msg));
        if self.grid_width < 64 || self.grid_height < 64 {
            return bad(format!(
                "grid must be at least 64x64, got {}x{}",
                self.grid_width, self.grid_height
            ));
        }
        if !(self.mm_per_pixel > 0.0 && self.mm_per_pixel.is_finite()) {
            return bad("mm_per_pixel must be positive".into());
        }
        if self.attachment_arc.len() < 2 {
            return bad("attachment_arc needs at least two control points".into());
        }
        let [ex, ey] = self.extent_mm();
        const MARGIN: f64 = 2.0;
        for p in &self.attachment_arc {
            if p[0] < MARGIN || p[1] < MARGIN || p[0] > ex - MARGIN || p[1] > ey - MARGIN {
                return bad(format!(
                    "control point ({}, {}) is closer than {MARGIN} mm to the grid edge",
                    p[0], p[1]
                ));
            }
        }
        let chord = Chord::new(&self.attachment_arc, self.gallbladder_center);
        if chord.length <= 0.0 {
            return bad("attachment_arc endpoints coincide".into());
        }
        let s: Vec<f64> = self.attachment_arc.iter().map(|p| chord.local(*p).0).collect();
        if s.windows(2).any(|w| w[1] <= w[0]) {
            return bad("attachment_arc must advance monotonically along its chord".into());
        }
        if !(self.gallbladder_radii[0] > 0.0 && self.gallbladder_radii[1] > 0.0) {
            return bad("gallbladder radii must be positive".into());
        }
        if !(self.initial_waviness_amplitude >= 0.0) {
            return bad("initial_waviness_amplitude must be non-negative".into());
        }
        if !(self.depth_base > 0.0 && self.depth_bulge >= 0.0 && self.depth_bulge < self.depth_base)
        {
            return bad("need depth_base > depth_bulge >= 0".into());
        }
        for (name, v) in [
            ("pull_to_straight", self.pull_to_straight),
            ("max_pull_step", self.max_pull_step),
            ("energy_radius", self.energy_radius),
            ("drag_radius", self.drag_radius),
        ] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.deform_jitter >= 0.0 && self.band_depth >= 0.0 && self.drag_fraction >= 0.0) {
            return bad("deform_jitter, band_depth and drag_fraction must be non-negative".into());
        }
        Ok(())
    }
}

/// Local chord frame: `s` along first→last control point, `n` toward the liver.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Chord {
    start: [f64; 2],
    tangent: [f64; 2],
    normal: [f64; 2],
    length: f64,
}

impl Chord {
    fn new(arc: &[[f64; 2]], gallbladder_center: [f64; 2]) -> Self {
        let a = arc[0];
        let b = arc[arc.len() - 1];
        let d = [b[0] - a[0], b[1] - a[1]];
        let length = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let tangent = if length > 0.0 {
            [d[0] / length, d[1] / length]
        } else {
            [1.0, 0.0]
        };
        let mut normal = [-tangent[1], tangent[0]];
        let to_center = [gallbladder_center[0] - a[0], gallbladder_center[1] - a[1]];
        if normal[0] * to_center[0] + normal[1] * to_center[1] > 0.0 {
            normal = [-normal[0], -normal[1]];
        }
        Self {
            start: a,
            tangent,
            normal,
            length,
        }
    }

    fn local(&self, p: [f64; 2]) -> (f64, f64) {
        let d = [p[0] - self.start[0], p[1] - self.start[1]];
        (
            d[0] * self.tangent[0] + d[1] * self.tangent[1],
            d[0] * self.normal[0] + d[1] * self.normal[1],
        )
    }

    fn plane(&self, s: f64, n: f64) -> [f64; 2] {
        [
            self.start[0] + s * self.tangent[0] + n * self.normal[0],
            self.start[1] + s * self.tangent[1] + n * self.normal[1],
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    s: f64,
    base: f64,
    wave: f64,
    jitter: f64,
    attached: bool,
}

impl Node {
    fn offset(&self, straightening: f64) -> f64 {
        self.base + self.wave * straightening + self.jitter
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grasp {
    /// Current 3D position of the grasped tissue point (mm).
    pub grasp_point_3d: [f64; 3],
    pub cumulative_pull: f64,
    anchor: [f64; 2],
    pull_plane: [f64; 2],
}

/// Ground-truth scene. Cheap to clone; every operation returns a new value.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomState {
    config: PhantomConfig,
    chord: Chord,
    node_spacing: f64,
    nodes: Vec<Node>,
    had_attachment: bool,
    liver_bed: BinaryMask,
    pub labels: LabelMask,
    pub depth: DepthMap,
    pub grasp: Option<Grasp>,
    pub deformation_rng: SimRng,
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let k = xs.partition_point(|&v| v <= x) - 1;
    let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] + t * (ys[k + 1] - ys[k])
}

/// RMS perpendicular distance of 2D points to their total-least-squares line.
fn planar_line_deviation(points: &[[f64; 2]]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let tr = (sxx + syy) / n;
    let det = (sxx * syy - sxy * sxy) / (n * n);
    let smallest = tr / 2.0 - ((tr * tr / 4.0 - det).max(0.0)).sqrt();
    smallest.max(0.0).sqrt()
}

pub fn generate_phantom(config: PhantomConfig) -> Result<PhantomState, PhantomError> {
    config.validate()?;
    let chord = Chord::new(&config.attachment_arc, config.gallbladder_center);
    let node_spacing = config.mm_per_pixel / 2.0;
    let count = (chord.length / node_spacing).floor() as usize + 1;
    let (cs, cn): (Vec<f64>, Vec<f64>) = config
        .attachment_arc
        .iter()
        .map(|p| chord.local(*p))
        .unzip();
    let nodes: Vec<Node> = (0..count)
        .map(|i| {
            let s = i as f64 * node_spacing;
            Node {
                s,
                base: interp(&cs, &cn, s),
                wave: 0.0,
                jitter: 0.0,
                attached: true,
            }
        })
        .collect();
    let (w, h) = (config.grid_width, config.grid_height);
    let mut state = PhantomState {
        chord,
        node_spacing,
        nodes,
        had_attachment: false,
        liver_bed: BinaryMask::new(w, h, false),
        labels: LabelMask::new(w, h, TissueClass::Background),
        depth: DepthMap::new(w, h, config.depth_base),
        grasp: None,
        deformation_rng: stream_rng(config.rng_seed, 0, Stream::Deformation),
        config,
    };
    state.rerender();
    state.filter_attachment();

    let amplitude = state.config.initial_waviness_amplitude;
    if amplitude > 0.0 {
        // Unit-RMS cosine over the attached span (orthogonal to constant and
        // linear trends, so the best-fit line stays on the chord), then rescale
        // until the attached nodes show the requested line-fit deviation.
        let span = state.attached_span().ok_or_else(|| {
            PhantomError::InvalidConfig("attachment arc does not touch the gallbladder".into())
        })?;
        let profile: Vec<f64> = state
            .nodes
            .iter()
            .map(|n| {
                let u = ((n.s - span.0) / (span.1 - span.0)).clamp(0.0, 1.0);
                -std::f64::consts::SQRT_2 * (std::f64::consts::TAU * u).cos()
            })
            .collect();
        let mut scale = amplitude;
        for _ in 0..4 {
            for (node, p) in state.nodes.iter_mut().zip(&profile) {
                node.wave = scale * p;
                node.attached = true;
            }
            state.rerender();
            state.filter_attachment();
            let dev = planar_line_deviation(&state.attachment_points());
            if dev <= 0.0 {
                break;
            }
            scale *= amplitude / dev;
        }
    }
    state.had_attachment = state.nodes.iter().any(|n| n.attached);
    if !state.had_attachment {
        return Err(PhantomError::InvalidConfig(
            "attachment arc does not touch the gallbladder".into(),
        ));
    }
    Ok(state)
}

impl PhantomState {
    pub fn config(&self) -> &PhantomConfig {
        &self.config
    }

    /// Pinhole model consistent with the phantom's plane/world mapping.
    pub fn camera(&self) -> CameraModel {
        self.config.camera()
    }

    /// Consistent `(labels, depth)` snapshot.
    pub fn render(&self) -> (LabelMask, DepthMap) {
        (self.labels.clone(), self.depth.clone())
    }

    pub fn liver_bed_count(&self) -> usize {
        self.labels.class_count(TissueClass::LiverBed)
    }

    pub fn attachment_len(&self) -> usize {
        self.nodes.iter().filter(|n| n.attached).count()
    }

    /// Unit plane direction from the gallbladder toward the liver.
    pub fn liver_direction(&self) -> [f64; 2] {
        self.chord.normal
    }

    pub fn is_detached(&self) -> bool {
        self.attachment_len() == 0
    }

    fn straightening(&self) -> f64 {
        let pulled = self.grasp.as_ref().map_or(0.0, |g| g.cumulative_pull);
        (1.0 - pulled / self.config.pull_to_straight).max(0.0)
    }

    fn node_plane(&self, node: &Node) -> [f64; 2] {
        self.chord.plane(node.s, node.offset(self.straightening()))
    }

    /// Plane (mm) positions of the attachment points, in chord order.
    pub fn attachment_points(&self) -> Vec<[f64; 2]> {
        self.nodes
            .iter()
            .filter(|n| n.attached)
            .map(|n| self.node_plane(n))
            .collect()
    }

    /// Attachment points lifted to camera-frame 3D at the interface depth.
    pub fn attachment_world(&self) -> Vec<Vec3> {
        self.attachment_points()
            .into_iter()
            .map(|p| self.plane_to_world(p, self.config.depth_base))
            .collect()
    }

    pub fn plane_to_world(&self, p: [f64; 2], depth: f64) -> Vec3 {
        let mpp = self.config.mm_per_pixel;
        self.camera().back_project_pixel(p[0] / mpp, p[1] / mpp, depth)
    }

    pub fn world_to_plane(&self, p: &Vec3) -> Option<[f64; 2]> {
        let mpp = self.config.mm_per_pixel;
        self.camera().project(p).map(|[u, v]| [u * mpp, v * mpp])
    }

    pub fn plane_to_pixel(&self, p: [f64; 2]) -> Option<(usize, usize)> {
        let mpp = self.config.mm_per_pixel;
        let (x, y) = ((p[0] / mpp).round() as i64, (p[1] / mpp).round() as i64);
        self.labels.contains(x, y).then_some((x as usize, y as usize))
    }

    fn attached_span(&self) -> Option<(f64, f64)> {
        let mut it = self.nodes.iter().filter(|n| n.attached).map(|n| n.s);
        let first = it.next()?;
        let last = it.last().unwrap_or(first);
        (last > first).then_some((first, last))
    }

    /// Interface offset `h(s)` at chord coordinate `s`.
    fn interface_at(&self, s: f64, straightening: f64) -> f64 {
        let k = s / self.node_spacing;
        let last = self.nodes.len() - 1;
        if k <= 0.0 {
            return self.nodes[0].offset(straightening);
        }
        if k >= last as f64 {
            return self.nodes[last].offset(straightening);
        }
        let i = k.floor() as usize;
        let t = k - i as f64;
        let a = self.nodes[i].offset(straightening);
        let b = self.nodes[i + 1].offset(straightening);
        a + t * (b - a)
    }

    fn rerender(&mut self) {
        let cfg = &self.config;
        let (w, h) = (cfg.grid_width, cfg.grid_height);
        let mpp = cfg.mm_per_pixel;
        let straightening = self.straightening();
        let [cx, cy] = cfg.gallbladder_center;
        let [ra, rb] = cfg.gallbladder_radii;
        let drag = self.grasp.as_ref().map(|g| {
            (
                g.anchor,
                [g.pull_plane[0] * cfg.drag_fraction, g.pull_plane[1] * cfg.drag_fraction],
            )
        });
        let retract = if self.had_attachment && self.is_detached() {
            let n = self.chord.normal;
            let k = cfg.retract_px as f64;
            ((-n[0] * k).round() as i64, (-n[1] * k).round() as i64)
        } else {
            (0, 0)
        };

        // Depth below the interface and normalised ellipse radius² of the
        // material point behind a plane point on the gallbladder side.
        let material = |p: [f64; 2]| -> Option<(f64, f64)> {
            let (s, n) = self.chord.local(p);
            let d = self.interface_at(s, straightening) - n;
            if d <= 0.0 {
                return None;
            }
            let mut q = p;
            if let Some((anchor, pull)) = drag {
                let r2 = (p[0] - anchor[0]).powi(2) + (p[1] - anchor[1]).powi(2);
                let weight =
                    (-r2 / (2.0 * cfg.drag_radius * cfg.drag_radius)).exp() * smoothstep(d / 5.0);
                q = [p[0] - pull[0] * weight, p[1] - pull[1] * weight];
            }
            let rho2 = ((q[0] - cx) / ra).powi(2) + ((q[1] - cy) / rb).powi(2);
            Some((d, rho2))
        };
        let gap_scale = ra.min(rb);

        let mut labels = LabelMask::new(w, h, TissueClass::Background);
        let mut depth = DepthMap::new(w, h, cfg.depth_base);
        for y in 0..h {
            for x in 0..w {
                if *self.liver_bed.get(x, y) {
                    labels.set(x, y, TissueClass::LiverBed);
                    continue;
                }
                let (sx, sy) = (x as i64 - retract.0, y as i64 - retract.1);
                let p = [x as f64 * mpp, y as f64 * mpp];
                let Some((d_here, _)) = material(p) else {
                    labels.set(x, y, TissueClass::Liver);
                    continue;
                };
                let src = [sx as f64 * mpp, sy as f64 * mpp];
                let behind = if labels.contains(sx, sy) && !*self.liver_bed.get(sx as usize, sy as usize) {
                    material(src)
                } else {
                    None
                };
                match behind {
                    Some((d, rho2)) if rho2 <= 1.0 => {
                        labels.set(x, y, TissueClass::Gallbladder);
                        let bulge = cfg.depth_bulge * smoothstep(d / 6.0) * (1.0 - rho2);
                        depth.set(x, y, cfg.depth_base - bulge);
                    }
                    other => {
                        // Background falls away smoothly from the nearest organ edge.
                        let ellipse_gap = other.map_or(f64::MAX, |(_, rho2)| (rho2.sqrt() - 1.0) * gap_scale);
                        let gap = d_here.min(ellipse_gap).max(0.0);
                        depth.set(x, y, cfg.depth_base + cfg.background_offset * smoothstep(gap / 4.0));
                    }
                }
            }
        }
        self.labels = labels;
        self.depth = depth;
    }

    fn node_is_adjacent(&self, node: &Node) -> bool {
        let Some((px, py)) = self.plane_to_pixel(self.node_plane(node)) else {
            return false;
        };
        let mut gallbladder = false;
        let mut tissue = false;
        for &(dx, dy) in &NEIGHBORS_8 {
            match self.labels.get_signed(px as i64 + dx, py as i64 + dy) {
                Some(TissueClass::Gallbladder) => gallbladder = true,
                Some(TissueClass::Liver) | Some(TissueClass::LiverBed) => tissue = true,
                _ => {}
            }
        }
        gallbladder && tissue
    }

    /// Drops attached nodes that no longer sit on the rendered interface.
    fn filter_attachment(&mut self) {
        let keep: Vec<bool> = self
            .nodes
            .iter()
            .map(|n| n.attached && self.node_is_adjacent(n))
            .collect();
        for (node, k) in self.nodes.iter_mut().zip(keep) {
            node.attached = k;
        }
    }

    fn refresh(&mut self) {
        let was_detached = self.is_detached();
        self.rerender();
        self.filter_attachment();
        if !was_detached && self.is_detached() {
            // Render the retracted gallbladder.
            self.rerender();
        }
    }

    /// Closes the grasp on the tissue at `point` (camera-frame mm).
    pub fn attach_grasp(&self, point: Vec3) -> Result<PhantomState, PhantomError> {
        let plane = self.world_to_plane(&point).ok_or(PhantomError::GraspOffTissue)?;
        let on_tissue = self
            .plane_to_pixel(plane)
            .is_some_and(|(x, y)| *self.labels.get(x, y) == TissueClass::Gallbladder);
        if !on_tissue {
            return Err(PhantomError::GraspOffTissue);
        }
        let mut next = self.clone();
        next.grasp = Some(Grasp {
            grasp_point_3d: [point.x, point.y, point.z],
            cumulative_pull: 0.0,
            anchor: plane,
            pull_plane: [0.0, 0.0],
        });
        Ok(next)
    }

    pub fn apply_pull(&self, pull_vector: Vec3) -> Result<PhantomState, PhantomError> {
        if self.grasp.is_none() {
            return Err(PhantomError::NoGrasp);
        }
        let step = pull_vector.norm();
        if step > self.config.max_pull_step + 1e-12 {
            return Err(PhantomError::PullExceedsLimit {
                step,
                limit: self.config.max_pull_step,
            });
        }
        if step == 0.0 {
            return Ok(self.clone());
        }
        let mut next = self.clone();
        {
            let g = next.grasp.as_mut().unwrap();
            g.cumulative_pull += step;
            g.pull_plane[0] += pull_vector.x;
            g.pull_plane[1] += pull_vector.y;
            for (c, d) in g.grasp_point_3d.iter_mut().zip(pull_vector.iter()) {
                *c += d;
            }
        }
        next.refresh();
        Ok(next)
    }

    /// Burns at `point`: detaches nearby attachment, exposes liver bed behind it
    /// and perturbs the remaining interface.
    pub fn apply_dissection(&self, point: Vec3, energy_radius: f64) -> Result<PhantomState, PhantomError> {
        if !(energy_radius > 0.0) {
            return Err(PhantomError::InvalidEnergyRadius(energy_radius));
        }
        let depth = self.config.depth_base;
        let removed: Vec<usize> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| {
                n.attached && (self.plane_to_world(self.node_plane(n), depth) - point).norm() < energy_radius
            })
            .map(|(i, _)| i)
            .collect();
        if removed.is_empty() {
            return Ok(self.clone());
        }
        let mut next = self.clone();
        next.expose_liver_bed(&removed);
        for &i in &removed {
            next.nodes[i].attached = false;
        }
        next.perturb_remaining();
        next.refresh();
        Ok(next)
    }

    fn expose_liver_bed(&mut self, removed: &[usize]) {
        let mpp = self.config.mm_per_pixel;
        let band = self.config.band_depth;
        let removed_pts: Vec<[f64; 2]> = removed.iter().map(|&i| self.node_plane(&self.nodes[i])).collect();
        let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
        for p in &removed_pts {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k] - band - mpp);
                hi[k] = hi[k].max(p[k] + band + mpp);
            }
        }
        let near = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
        let kept_pts: Vec<[f64; 2]> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(i, n)| n.attached && !removed.contains(i))
            .map(|(_, n)| self.node_plane(n))
            .filter(|p| p[0] > lo[0] - band && p[0] < hi[0] + band && p[1] > lo[1] - band && p[1] < hi[1] + band)
            .collect();
        let (w, h) = self.labels.dims();
        let x0 = ((lo[0] / mpp).floor().max(0.0)) as usize;
        let y0 = ((lo[1] / mpp).floor().max(0.0)) as usize;
        let x1 = ((hi[0] / mpp).ceil() as usize).min(w - 1);
        let y1 = ((hi[1] / mpp).ceil() as usize).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                if *self.labels.get(x, y) != TissueClass::Gallbladder {
                    continue;
                }
                let p = [x as f64 * mpp, y as f64 * mpp];
                let d_removed = removed_pts.iter().map(|q| near(p, *q)).fold(f64::MAX, f64::min);
                if d_removed > band * band {
                    continue;
                }
                let d_kept = kept_pts.iter().map(|q| near(p, *q)).fold(f64::MAX, f64::min);
                if d_removed < d_kept {
                    self.liver_bed.set(x, y, true);
                }
            }
        }
    }

    /// Replaces the perturbation of every still-attached node with a fresh
    /// piecewise-linear field bounded by `deform_jitter`.
    fn perturb_remaining(&mut self) {
        const KNOT_SPACING_MM: f64 = 4.0;
        let bound = self.config.deform_jitter;
        let knots = (self.chord.length / KNOT_SPACING_MM).ceil() as usize + 1;
        let values: Vec<f64> = (0..knots)
            .map(|_| (self.deformation_rng.random::<f64>() * 2.0 - 1.0) * bound)
            .collect();
        let xs: Vec<f64> = (0..knots).map(|k| k as f64 * KNOT_SPACING_MM).collect();
        for node in self.nodes.iter_mut().filter(|n| n.attached) {
            node.jitter = interp(&xs, &values, node.s);
        }
    }

    pub fn export_pgm(&self) -> Vec<u8> {
        self.labels.to_pgm_bytes()
    }
}

/// Every pixel carries exactly one class by construction; kept for tests.
pub fn class_partition_holds(labels: &LabelMask) -> bool {
    TissueClass::ALL.iter().map(|&c| labels.class_count(c)).sum::<usize>()
        == labels.width() * labels.height()
}

#[allow(dead_code)]
fn _assert_grid_send(_: Grid<u8>) {}
