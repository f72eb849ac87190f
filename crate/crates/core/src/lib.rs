//! Autonomous gallbladder dissection on a synthetic phantom: perception,
//! mask geometry, surface frames, a phase controller and evaluation metrics.

pub mod controller;
pub mod frames;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod log;
pub mod mask;
pub mod metrics;
pub mod perception;
pub mod phantom;
pub mod rng;

pub use frames::{FrameError, PcaResult, SurfaceFrame};
pub use geometry::{Frame, PointSet3, Vec3};
pub use grid::{BinaryMask, DepthMap, Grid, LabelMask, TissueClass};
pub use mask::{BoundaryPolyline, MaskError, SkeletonPolyline};
pub use perception::{CameraModel, InstrumentKind, KeypointObservation, NoiseProfile, SegObservation};
pub use phantom::{PhantomConfig, PhantomError, PhantomState};
pub use controller::{AbortReason, ControllerParams, ProcedurePhase};
pub use log::{TickRecord, TrialLog};
pub use metrics::TrialMetrics;
pub use harness::{ScenarioConfig, ScenarioSummary};
