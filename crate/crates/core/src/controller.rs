//! Tick-based bimanual controller: the FBF aligns, grasps and pulls the
//! gallbladder until the boundary is nearly straight, then the PCH walks the
//! freshly observed boundary, delivering energy at each selected target.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{fbf_goal_from_surface, orient_surface_frame, pch_goal_from_surface, SurfaceFrame};
use crate::geometry::{centroid, Frame, Vec3};
use crate::grid::{BinaryMask, TissueClass};
use crate::log::{EnergyEvent, TickRecord};
use crate::mask::{extract_boundary, largest_component, skeletonize, BoundaryPolyline, MaskError, SkeletonPolyline,
    DEFAULT_MIN_AREA_PX};
use crate::metrics::boundary_deviation;
use crate::perception::{
    back_project_pixels, observe_keypoints, observe_segmentation, recover_pose, CameraModel, InstrumentKind,
    NoiseProfile,
};
use crate::phantom::PhantomState;

/// Height above the first boundary point at which the PCH finishes aligning (mm).
const HOVER_MM: f64 = 3.0;
/// Height above the tissue at which both instruments start (mm).
const HOME_HEIGHT_MM: f64 = 25.0;

#[derive(Debug, Error, PartialEq)]
pub enum ControllerError {
    #[error("skeleton and boundary must both contain 3D points")]
    EmptyInput,
    #[error("invalid controller params: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerParams {
    pub deviation_stop: f64,
    pub max_step: f64,
    pub termination_dist: f64,
    pub position_tolerance: f64,
    /// mm per tick.
    pub instrument_speed: f64,
    pub grasp_offset: f64,
    pub reach_timeout_ticks: u64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            deviation_stop: 0.5,
            max_step: 10.0,
            termination_dist: 1.0,
            position_tolerance: 0.5,
            instrument_speed: 2.0,
            grasp_offset: 5.0,
            reach_timeout_ticks: 500,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let bad = |m: &str| Err(ControllerError::InvalidParams(m.to_string()));
        if !(self.termination_dist > 0.0 && self.termination_dist < self.max_step) {
            return bad("need 0 < termination_dist < max_step");
        }
        if !(self.deviation_stop > 0.0) {
            return bad("deviation_stop must be positive");
        }
        if !(self.instrument_speed > 0.0) {
            return bad("instrument_speed must be positive");
        }
        if !(self.position_tolerance > 0.0) || self.grasp_offset < 0.0 {
            return bad("position_tolerance must be positive and grasp_offset non-negative");
        }
        if self.reach_timeout_ticks == 0 {
            return bad("reach_timeout_ticks must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbortReason {
    PullTimeout,
    ReachTimeout,
    PerceptionLoss,
    GraspFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProcedurePhase {
    AlignFBF,
    ApproachGrasp,
    Grasp,
    Pull,
    AlignPCH,
    SelectTarget,
    MoveToTarget,
    ApplyEnergy,
    Done,
    Aborted(AbortReason),
}

impl ProcedurePhase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Self::Done | Self::Aborted(_))
    }

    /// Whether a tick in `self` may directly follow a tick in `prev`
    /// (`None` for the first tick of a trial).
    pub fn can_follow(self, prev: Option<ProcedurePhase>) -> bool {
        use ProcedurePhase::*;
        let Some(prev) = prev else {
            return self == AlignFBF;
        };
        if prev.is_terminal() {
            return false;
        }
        if matches!(self, Aborted(_)) {
            return true;
        }
        matches!(
            (prev, self),
            (AlignFBF, ApproachGrasp)
                | (ApproachGrasp, ApproachGrasp | Grasp)
                | (Grasp, Grasp | Pull)
                | (Pull, Pull | AlignPCH)
                | (AlignPCH, AlignPCH | SelectTarget)
                | (SelectTarget, MoveToTarget | Done)
                | (MoveToTarget, MoveToTarget | ApplyEnergy)
                | (ApplyEnergy, SelectTarget)
        )
    }
}

pub fn phase_sequence_is_legal(phases: &[ProcedurePhase]) -> bool {
    let mut prev = None;
    for &p in phases {
        if !p.can_follow(prev) {
            return false;
        }
        prev = Some(p);
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstrumentState {
    pub pose: Frame,
    pub jaw_open: bool,
    pub energy_on: bool,
}

/// Midpoint of the skeleton and boundary centroids, moved `offset` along −normal.
pub fn compute_grasp_point(
    skeleton: &SkeletonPolyline,
    boundary: &BoundaryPolyline,
    s: &SurfaceFrame,
    offset: f64,
) -> Result<Vec3, ControllerError> {
    let (Some(a), Some(b)) = (centroid(&skeleton.points3d), centroid(&boundary.points3d)) else {
        return Err(ControllerError::EmptyInput);
    };
    Ok((a + b) / 2.0 - s.normal_axis * offset)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetChoice {
    Point(Vec3),
    Terminate,
}

/// First call (no motion direction): the first boundary point. Afterwards the
/// farthest point ahead of `current` within `max_step`, or `Terminate` when no
/// such point is farther than `termination_dist`.
pub fn select_target(
    boundary: &BoundaryPolyline,
    current: &Vec3,
    motion_dir: Option<&Vec3>,
    params: &ControllerParams,
) -> TargetChoice {
    let Some(dir) = motion_dir else {
        return boundary
            .points3d
            .first()
            .map_or(TargetChoice::Terminate, |p| TargetChoice::Point(*p));
    };
    let best = boundary
        .points3d
        .iter()
        .filter_map(|p| {
            let d = p - current;
            (d.dot(dir) > 0.0 && d.norm() <= params.max_step).then_some((d.norm(), *p))
        })
        .fold(None::<(f64, Vec3)>, |acc, c| match acc {
            Some(a) if a.0 >= c.0 => Some(a),
            _ => Some(c),
        });
    match best {
        Some((dist, p)) if dist > params.termination_dist => TargetChoice::Point(p),
        _ => TargetChoice::Terminate,
    }
}

/// Unit direction in which the ordered boundary runs away from its first
/// point, from the mean of the points within `reach` of it.
pub fn sequence_direction(boundary: &BoundaryPolyline, reach: f64) -> Option<Vec3> {
    let first = *boundary.points3d.first()?;
    let ahead: Vec<Vec3> = boundary
        .points3d
        .iter()
        .skip(1)
        .filter(|p| (*p - first).norm() <= reach)
        .copied()
        .collect();
    let d = centroid(&ahead)? - first;
    (d.norm() > 1e-9).then(|| d.normalize())
}

/// Gallbladder pixels between the skeleton and boundary centroids, limited to
/// the boundary's extent across that direction.
fn surface_strip(gb: &BinaryMask, skeleton: &[(usize, usize)], boundary: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mean = |px: &[(usize, usize)]| {
        let n = px.len() as f64;
        let (sx, sy) = px.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x as f64, b + y as f64));
        [sx / n, sy / n]
    };
    let s = mean(skeleton);
    let b = mean(boundary);
    let axis = [b[0] - s[0], b[1] - s[1]];
    let len = (axis[0] * axis[0] + axis[1] * axis[1]).sqrt();
    if len < 1e-9 {
        return gb.pixels();
    }
    let along = [axis[0] / len, axis[1] / len];
    let across = [-along[1], along[0]];
    let proj = |&(x, y): &(usize, usize), d: [f64; 2]| (x as f64 - s[0]) * d[0] + (y as f64 - s[1]) * d[1];
    let (lo, hi) = boundary.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| {
        let c = proj(p, across);
        (lo.min(c), hi.max(c))
    });
    gb.pixels()
        .into_iter()
        .filter(|p| {
            let a = proj(p, along);
            let c = proj(p, across);
            (0.0..=len).contains(&a) && c >= lo && c <= hi
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullSummary {
    pub ticks: u64,
    pub deviations: Vec<f64>,
    pub fbf_displacement: f64,
}

#[derive(Default)]
struct TickExtras {
    pch_estimate: Option<Vec3>,
    target: Option<Vec3>,
    energy_event: Option<EnergyEvent>,
    boundary: Option<Vec<Vec3>>,
    deviation: Option<f64>,
}

struct Observed {
    gallbladder: BinaryMask,
    boundary: Result<BoundaryPolyline, MaskError>,
}

/// One procedure on one phantom. Owns the scene, both instruments and the log.
#[derive(Debug, Clone)]
pub struct Trial {
    pub phantom: PhantomState,
    pub camera: CameraModel,
    pub noise: NoiseProfile,
    pub params: ControllerParams,
    pub fbf: InstrumentState,
    pub pch: InstrumentState,
    pub records: Vec<TickRecord>,
    /// Ground-truth attachment when the trial started and when dissection started.
    pub initial_attachment: Vec<Vec3>,
    pub dissection_attachment: Vec<Vec3>,
    tick: u64,
    fbf_belief: Vec3,
    pch_belief: Vec3,
    surface: Option<SurfaceFrame>,
    grasp_surface_point: Option<Vec3>,
}

fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn step_toward(from: &Vec3, to: &Vec3, speed: f64) -> Vec3 {
    let d = to - from;
    let n = d.norm();
    if n <= speed {
        d
    } else {
        d * (speed / n)
    }
}

impl Trial {
    pub fn new(phantom: PhantomState, camera: CameraModel, noise: NoiseProfile, params: ControllerParams) -> Self {
        let cfg = phantom.config().clone();
        let canonical = SurfaceFrame::from_axes(Vec3::zeros(), Vec3::x(), Vec3::z());
        let lift = cfg.depth_base - HOME_HEIGHT_MM;
        let fbf_home = phantom.plane_to_world(cfg.gallbladder_center, lift);
        let dir = phantom.liver_direction();
        let a = cfg.attachment_arc[0];
        let pch_home = phantom.plane_to_world([a[0] + 8.0 * dir[0], a[1] + 8.0 * dir[1]], lift);
        let fbf = InstrumentState {
            pose: fbf_goal_from_surface(&canonical, &fbf_home),
            jaw_open: true,
            energy_on: false,
        };
        let pch = InstrumentState {
            pose: pch_goal_from_surface(&canonical, &pch_home),
            jaw_open: false,
            energy_on: false,
        };
        let initial_attachment = phantom.attachment_world();
        Self {
            camera,
            noise,
            params,
            fbf,
            pch,
            records: Vec::new(),
            dissection_attachment: initial_attachment.clone(),
            initial_attachment,
            tick: 0,
            fbf_belief: fbf_home,
            pch_belief: pch_home,
            surface: None,
            grasp_surface_point: None,
            phantom,
        }
    }

    pub fn last_phase(&self) -> Option<ProcedurePhase> {
        self.records.last().map(|r| r.phase)
    }

    fn push(&mut self, phase: ProcedurePhase, extras: TickExtras) {
        if let Some(prev) = self.last_phase() {
            debug_assert!(phase.can_follow(Some(prev)), "{phase:?} after {prev:?}");
        }
        self.records.push(TickRecord {
            tick: self.tick,
            phase,
            fbf_pose: self.fbf.pose,
            pch_pose: self.pch.pose,
            pch_estimate: extras.pch_estimate.map(|v| arr(&v)),
            jaw_open: self.fbf.jaw_open,
            energy_on: self.pch.energy_on,
            target: extras.target.map(|v| arr(&v)),
            energy_event: extras.energy_event,
            boundary_snapshot: extras.boundary.map(|b| b.iter().map(arr).collect()),
            deviation: extras.deviation,
        });
        self.tick += 1;
    }

    fn abort(&mut self, reason: AbortReason) -> AbortReason {
        self.pch.energy_on = false;
        self.push(ProcedurePhase::Aborted(reason), TickExtras::default());
        reason
    }

    /// Updates both instrument beliefs from this tick's keypoints; an instrument
    /// whose pose cannot be fitted keeps its dead-reckoned belief.
    fn perceive_instruments(&mut self) {
        let (w, h) = self.phantom.labels.dims();
        let obs = observe_keypoints(
            &[(InstrumentKind::Fbf, self.fbf.pose), (InstrumentKind::Pch, self.pch.pose)],
            &self.camera,
            &self.noise,
            (w, h),
            self.tick,
        );
        for (kind, belief) in [
            (InstrumentKind::Fbf, &mut self.fbf_belief),
            (InstrumentKind::Pch, &mut self.pch_belief),
        ] {
            if let Some(pose) = obs.instrument(kind).and_then(|k| recover_pose(k, &self.camera)) {
                *belief = pose.origin;
            }
        }
    }

    fn observe_tissue(&self) -> Result<Observed, MaskError> {
        let seg = observe_segmentation(&self.phantom.labels, &self.noise, self.tick);
        let gallbladder = largest_component(&seg.gallbladder, DEFAULT_MIN_AREA_PX)?;
        let boundary = extract_boundary(&gallbladder, &seg.liver, &seg.liver_bed, &self.phantom.depth, &self.camera);
        Ok(Observed { gallbladder, boundary })
    }

    fn move_fbf(&mut self, delta: Vec3) {
        self.fbf.pose.origin += delta;
        self.fbf_belief += delta;
    }

    fn move_pch(&mut self, delta: Vec3) {
        self.pch.pose.origin += delta;
        self.pch_belief += delta;
    }

    /// Skeleton, boundary, and the surface frame fitted between them.
    fn survey(&self) -> Option<(SkeletonPolyline, BoundaryPolyline, SurfaceFrame)> {
        let obs = self.observe_tissue().ok()?;
        let boundary = obs.boundary.ok()?;
        let skeleton = skeletonize(&obs.gallbladder).ok()?.lift(&self.phantom.depth, &self.camera);
        let strip = surface_strip(&obs.gallbladder, &skeleton.pixels, &boundary.pixels);
        let surface_points = back_project_pixels(&strip, &self.phantom.depth, &self.camera);
        let frame = orient_surface_frame(&skeleton.points3d, &boundary.points3d, &surface_points, &self.camera.view())
            .ok()?;
        Some((skeleton, boundary, frame))
    }

    /// Moves an instrument toward `goal` one speed step per tick until its
    /// perceived position is within tolerance.
    fn reach(&mut self, phase: ProcedurePhase, pch: bool, goal: Vec3) -> Result<(), AbortReason> {
        for _ in 0..self.params.reach_timeout_ticks {
            self.perceive_instruments();
            let belief = if pch { self.pch_belief } else { self.fbf_belief };
            if (belief - goal).norm() <= self.params.position_tolerance {
                return Ok(());
            }
            let delta = step_toward(&belief, &goal, self.params.instrument_speed);
            if pch {
                self.move_pch(delta);
            } else {
                self.move_fbf(delta);
            }
            let extras = TickExtras {
                pch_estimate: pch.then_some(belief),
                target: Some(goal),
                ..TickExtras::default()
            };
            self.push(phase, extras);
        }
        Err(self.abort(AbortReason::ReachTimeout))
    }

    /// Align the FBF, approach the stand-off point and close on the tissue beneath it.
    pub fn align_and_grasp(&mut self) -> Result<(), AbortReason> {
        let Some((skeleton, boundary, surface)) = self.survey() else {
            return Err(self.abort(AbortReason::PerceptionLoss));
        };
        let standoff = compute_grasp_point(&skeleton, &boundary, &surface, self.params.grasp_offset)
            .expect("survey yields lifted points");
        let on_surface = standoff + surface.normal_axis * self.params.grasp_offset;
        self.fbf.pose = fbf_goal_from_surface(&surface, &self.fbf.pose.origin);
        self.surface = Some(surface);
        self.grasp_surface_point = Some(on_surface);
        self.push(
            ProcedurePhase::AlignFBF,
            TickExtras {
                target: Some(standoff),
                ..TickExtras::default()
            },
        );
        self.reach(ProcedurePhase::ApproachGrasp, false, standoff)?;
        if self.last_phase() != Some(ProcedurePhase::ApproachGrasp) {
            // Already at the stand-off point: log one stationary approach tick.
            self.push(ProcedurePhase::ApproachGrasp, TickExtras::default());
        }
        self.reach(ProcedurePhase::Grasp, false, on_surface)?;
        self.fbf.jaw_open = false;
        match self.phantom.attach_grasp(self.fbf.pose.origin) {
            Ok(next) => self.phantom = next,
            Err(_) => return Err(self.abort(AbortReason::GraspFailed)),
        }
        self.push(
            ProcedurePhase::Grasp,
            TickExtras {
                target: Some(on_surface),
                ..TickExtras::default()
            },
        );
        Ok(())
    }

    /// Rotate the PCH into its goal orientation and bring it above the first boundary point.
    pub fn align_pch(&mut self) -> Result<(), AbortReason> {
        self.dissection_attachment = self.phantom.attachment_world();
        let hover = match self.survey() {
            Some((_, boundary, surface)) => {
                let first = boundary.points3d[0];
                self.pch.pose = pch_goal_from_surface(&surface, &self.pch.pose.origin);
                self.surface = Some(surface);
                Some(first - surface.normal_axis * HOVER_MM)
            }
            None if self.phantom.is_detached() => None,
            None => return Err(self.abort(AbortReason::PerceptionLoss)),
        };
        self.push(ProcedurePhase::AlignPCH, TickExtras::default());
        if let Some(goal) = hover {
            self.reach(ProcedurePhase::AlignPCH, true, goal)?;
        }
        Ok(())
    }
}

/// Pull along the FBF's −z until the perceived boundary deviation drops below
/// the stop threshold; the FBF then holds its pose.
pub fn pull_until_straight(trial: &mut Trial) -> Result<PullSummary, AbortReason> {
    let start = trial.fbf.pose.origin;
    let mut deviations = Vec::new();
    for ticks in 1..=trial.params.reach_timeout_ticks {
        trial.perceive_instruments();
        let boundary = match trial.observe_tissue().map(|o| o.boundary) {
            Ok(Ok(b)) => b,
            _ => return Err(trial.abort(AbortReason::PerceptionLoss)),
        };
        let Ok(deviation) = boundary_deviation(&boundary.points3d) else {
            return Err(trial.abort(AbortReason::PerceptionLoss));
        };
        deviations.push(deviation);
        let straight = deviation < trial.params.deviation_stop;
        if !straight {
            let delta = -trial.fbf.pose.z_axis() * trial.params.instrument_speed;
            match trial.phantom.apply_pull(delta) {
                Ok(next) => trial.phantom = next,
                Err(_) => return Err(trial.abort(AbortReason::GraspFailed)),
            }
            trial.move_fbf(delta);
        }
        trial.push(
            ProcedurePhase::Pull,
            TickExtras {
                boundary: Some(boundary.points3d),
                deviation: Some(deviation),
                ..TickExtras::default()
            },
        );
        if straight {
            return Ok(PullSummary {
                ticks,
                deviations,
                fbf_displacement: (trial.fbf.pose.origin - start).norm(),
            });
        }
    }
    Err(trial.abort(AbortReason::PullTimeout))
}

/// Online dissection loop: re-observe, pick the next target on the current
/// boundary, move there and burn, until no target remains. Returns the records
/// it appended.
pub fn dissect_round(trial: &mut Trial) -> Result<Vec<TickRecord>, AbortReason> {
    let first_record = trial.records.len();
    let params = trial.params.clone();
    let mut motion_dir: Option<Vec3> = None;
    let mut seed_dir: Option<Vec3> = None;
    let mut previous_target: Option<Vec3> = None;
    let max_rounds = trial.phantom.attachment_len() as u64 + params.reach_timeout_ticks;
    for _ in 0..=max_rounds {
        trial.perceive_instruments();
        let current = trial.pch_belief;
        let observed = trial.observe_tissue().and_then(|o| o.boundary);
        let boundary = match observed {
            Ok(b) => b,
            Err(_) if trial.phantom.is_detached() => {
                trial.push(
                    ProcedurePhase::SelectTarget,
                    TickExtras {
                        pch_estimate: Some(current),
                        ..TickExtras::default()
                    },
                );
                trial.push(ProcedurePhase::Done, TickExtras::default());
                return Ok(trial.records[first_record..].to_vec());
            }
            Err(_) => return Err(trial.abort(AbortReason::PerceptionLoss)),
        };
        if motion_dir.is_none() && previous_target.is_none() {
            seed_dir = sequence_direction(&boundary, params.max_step);
        }
        let choice = select_target(&boundary, &current, motion_dir.as_ref(), &params);
        let target = match choice {
            TargetChoice::Point(p) => Some(p),
            TargetChoice::Terminate => None,
        };
        trial.push(
            ProcedurePhase::SelectTarget,
            TickExtras {
                pch_estimate: Some(current),
                target,
                boundary: Some(boundary.points3d),
                ..TickExtras::default()
            },
        );
        let Some(target) = target else {
            trial.push(ProcedurePhase::Done, TickExtras::default());
            return Ok(trial.records[first_record..].to_vec());
        };

        move_and_burn(trial, &target)?;

        motion_dir = match previous_target {
            Some(prev) if (target - prev).norm() > 1e-9 => Some((target - prev).normalize()),
            Some(_) => motion_dir,
            None => seed_dir.or(motion_dir),
        };
        previous_target = Some(target);
    }
    Err(trial.abort(AbortReason::ReachTimeout))
}

fn move_and_burn(trial: &mut Trial, target: &Vec3) -> Result<(), AbortReason> {
    let params = trial.params.clone();
    let mut moved = false;
    for _ in 0..=params.reach_timeout_ticks {
        trial.perceive_instruments();
        let belief = trial.pch_belief;
        let snapshot = trial
            .observe_tissue()
            .ok()
            .and_then(|o| o.boundary.ok())
            .map(|b| b.points3d);
        if moved && (belief - target).norm() <= params.position_tolerance {
            let tip = trial.pch.pose.origin;
            let radius = trial.phantom.config().energy_radius;
            let before = trial.phantom.attachment_len();
            trial.phantom = trial
                .phantom
                .apply_dissection(tip, radius)
                .expect("configured energy radius is positive");
            trial.pch.energy_on = true;
            trial.push(
                ProcedurePhase::ApplyEnergy,
                TickExtras {
                    pch_estimate: Some(belief),
                    target: Some(*target),
                    energy_event: Some(EnergyEvent {
                        point: arr(&tip),
                        radius,
                        released: before - trial.phantom.attachment_len(),
                    }),
                    boundary: snapshot,
                    ..TickExtras::default()
                },
            );
            trial.pch.energy_on = false;
            return Ok(());
        }
        trial.move_pch(step_toward(&belief, target, params.instrument_speed));
        moved = true;
        trial.push(
            ProcedurePhase::MoveToTarget,
            TickExtras {
                pch_estimate: Some(belief),
                target: Some(*target),
                boundary: snapshot,
                ..TickExtras::default()
            },
        );
    }
    Err(trial.abort(AbortReason::ReachTimeout))
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trial: Trial,
    pub pull: Option<PullSummary>,
    pub final_phase: ProcedurePhase,
}

/// Full procedure: align/grasp, pull, align PCH, dissect.
pub fn run_procedure(
    phantom: PhantomState,
    camera: CameraModel,
    noise: NoiseProfile,
    params: ControllerParams,
) -> TrialOutcome {
    let mut trial = Trial::new(phantom, camera, noise, params);
    let mut pull = None;
    let result = (|| {
        trial.align_and_grasp()?;
        pull = Some(pull_until_straight(&mut trial)?);
        trial.align_pch()?;
        dissect_round(&mut trial)?;
        Ok::<(), AbortReason>(())
    })();
    let final_phase = match result {
        Ok(()) => ProcedurePhase::Done,
        Err(r) => ProcedurePhase::Aborted(r),
    };
    TrialOutcome {
        trial,
        pull,
        final_phase,
    }
}

/// Ground-truth class under a camera-frame point, for grasp checks.
pub fn class_under(phantom: &PhantomState, point: &Vec3) -> Option<TissueClass> {
    let plane = phantom.world_to_plane(point)?;
    let (x, y) = phantom.plane_to_pixel(plane)?;
    Some(*phantom.labels.get(x, y))
}
