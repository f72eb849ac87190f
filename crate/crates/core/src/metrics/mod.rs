//! Evaluation metrics over boundaries and trial logs.

mod spline;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::ProcedurePhase;
use crate::geometry::{centroid, Vec3};
use crate::log::TrialLog;

pub use spline::{spline_rmse, spline_rmse_with, SplineFit, DEFAULT_KNOTS};

/// Seconds per simulation tick, for report formatting only.
pub const TICK_SECONDS: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
}

/// RMS perpendicular distance of `points` to their total-least-squares 3D line.
pub fn boundary_deviation(points: &[Vec3]) -> Result<f64, MetricsError> {
    if points.len() < 2 {
        return Err(MetricsError::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    let c = centroid(points).unwrap();
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - c;
        cov += d * d.transpose();
    }
    cov /= points.len() as f64;
    let eig = SymmetricEigen::new(cov);
    let total = cov.trace();
    let largest = eig.eigenvalues.max();
    Ok((total - largest).max(0.0).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub boundary_rmse: Option<f64>,
    pub outliers_removed: usize,
    pub travel_distance: f64,
    pub duration_ticks: u64,
    pub duration_seconds: f64,
    pub pull_deviation_trace: Vec<f64>,
    pub energy_events: usize,
}

/// Dissection phases, during which PCH motion counts as travel.
fn in_dissection(phase: ProcedurePhase) -> bool {
    matches!(
        phase,
        ProcedurePhase::SelectTarget | ProcedurePhase::MoveToTarget | ProcedurePhase::ApplyEnergy
    )
}

/// Summed PCH displacement between consecutive dissection ticks.
pub fn travel_distance(log: &TrialLog) -> f64 {
    log.records
        .windows(2)
        .filter(|w| w[1].tick == w[0].tick + 1 && in_dissection(w[0].phase) && in_dissection(w[1].phase))
        .map(|w| (w[1].pch_pose.origin - w[0].pch_pose.origin).norm())
        .sum()
}

/// Ticks from the first PCH alignment tick to the final tick.
pub fn duration(log: &TrialLog) -> u64 {
    let start = log
        .records
        .iter()
        .find(|r| r.phase == ProcedurePhase::AlignPCH)
        .map(|r| r.tick);
    match (start, log.records.last()) {
        (Some(s), Some(last)) => last.tick - s,
        _ => 0,
    }
}

/// Boundary snapshots recorded during dissection.
pub fn dissection_snapshots(log: &TrialLog) -> Vec<Vec<Vec3>> {
    log.records
        .iter()
        .filter(|r| in_dissection(r.phase))
        .filter_map(|r| r.boundary_snapshot.as_ref())
        .map(|s| s.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect())
        .collect()
}

pub fn trial_metrics(log: &TrialLog) -> TrialMetrics {
    let fit = spline_rmse(&dissection_snapshots(log)).ok();
    let ticks = duration(log);
    TrialMetrics {
        boundary_rmse: fit.as_ref().map(|f| f.rmse),
        outliers_removed: fit.as_ref().map_or(0, |f| f.outliers_removed),
        travel_distance: travel_distance(log),
        duration_ticks: ticks,
        duration_seconds: ticks as f64 * TICK_SECONDS,
        pull_deviation_trace: log
            .records
            .iter()
            .filter(|r| r.phase == ProcedurePhase::Pull)
            .filter_map(|r| r.deviation)
            .collect(),
        energy_events: log.records.iter().filter(|r| r.energy_event.is_some()).count(),
    }
}
