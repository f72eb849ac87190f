//! Batch runner: scenario configs, seeded trials, JSONL logs, summaries and plots.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::controller::{run_procedure, ControllerParams, ProcedurePhase, TrialOutcome};
use crate::geometry::Vec3;
use crate::log::{LogError, TrialLog, TrialMeta};
use crate::metrics::{dissection_snapshots, spline_rmse, trial_metrics, TrialMetrics};
use crate::perception::{CameraModel, NoiseProfile};
use crate::phantom::{generate_phantom, PhantomConfig};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config parse error: {0}")]
    ConfigParse(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Log(#[from] LogError),
}

/// Noise given either by preset name or as an explicit profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Preset(String),
    Profile(NoiseProfile),
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::Preset("zero".into())
    }
}

impl NoiseSpec {
    pub fn resolve(&self) -> Result<NoiseProfile, HarnessError> {
        let profile = match self {
            Self::Preset(name) => NoiseProfile::preset(name)
                .ok_or_else(|| HarnessError::InvalidConfig(format!("unknown noise preset {name:?}")))?,
            Self::Profile(p) => p.clone(),
        };
        profile
            .validate()
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        Ok(profile)
    }
}

fn default_trials() -> u32 {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub phantom: PhantomConfig,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub controller: ControllerParams,
    /// Defaults to the phantom's own calibrated camera.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraModel>,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            phantom: PhantomConfig::default(),
            noise: NoiseSpec::default(),
            controller: ControllerParams::default(),
            camera: None,
            trials: default_trials(),
            base_seed: 0,
            output_dir: default_output_dir(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::ConfigParse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let invalid = |e: String| HarnessError::InvalidConfig(e);
        if self.trials < 1 {
            return Err(invalid("trials must be at least 1".into()));
        }
        self.phantom.validate().map_err(|e| invalid(e.to_string()))?;
        self.controller.validate().map_err(|e| invalid(e.to_string()))?;
        self.noise.resolve()?;
        self.camera()
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }

    pub fn camera(&self) -> CameraModel {
        self.camera.clone().unwrap_or_else(|| self.phantom.camera())
    }

    /// SHA-256 of the canonical JSON encoding, excluding the output directory.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn trial_seed(&self, index: u32) -> u64 {
        self.base_seed.wrapping_add(u64::from(index))
    }
}

/// Runs trial `index` of the scenario in memory.
pub fn run_trial(config: &ScenarioConfig, index: u32) -> Result<(TrialLog, TrialOutcome), HarnessError> {
    let seed = config.trial_seed(index);
    let phantom_cfg = PhantomConfig {
        rng_seed: config.phantom.rng_seed.wrapping_add(seed),
        ..config.phantom.clone()
    };
    let phantom = generate_phantom(phantom_cfg).map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
    let base_noise = config.noise.resolve()?;
    let noise = NoiseProfile {
        rng_seed: base_noise.rng_seed.wrapping_add(seed),
        ..base_noise
    };
    let outcome = run_procedure(phantom, config.camera(), noise, config.controller.clone());
    let log = TrialLog {
        meta: TrialMeta {
            seed,
            config_hash: config.config_hash(),
        },
        records: outcome.trial.records.clone(),
    };
    Ok((log, outcome))
}

/// All trials of a scenario, in trial order. Trials run on scoped threads.
pub fn run_trials(config: &ScenarioConfig) -> Result<Vec<(TrialLog, TrialOutcome)>, HarnessError> {
    config.validate()?;
    let n = config.trials;
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(n as usize).max(1);
    let mut slots: Vec<Option<Result<(TrialLog, TrialOutcome), HarnessError>>> = (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunks: Vec<_> = slots.chunks_mut(n.div_ceil(workers as u32) as usize).collect();
        let mut start = 0u32;
        for chunk in chunks {
            let first = start;
            start += chunk.len() as u32;
            scope.spawn(move || {
                for (k, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(run_trial(config, first + k as u32));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every slot filled")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub index: u32,
    pub seed: u64,
    pub outcome: ProcedurePhase,
    pub log_file: String,
    pub metrics: TrialMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub metric: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub config_hash: String,
    pub trials: Vec<TrialSummary>,
    pub aborted: usize,
    pub table: Vec<TableRow>,
}

impl ScenarioSummary {
    /// Summary derived purely from logs (the logs are the source of truth).
    pub fn from_logs(config_hash: &str, logs: &[(u32, String, TrialLog)]) -> Self {
        let trials: Vec<TrialSummary> = logs
            .iter()
            .map(|(index, file, log)| TrialSummary {
                index: *index,
                seed: log.meta.seed,
                outcome: log.final_phase().unwrap_or(ProcedurePhase::AlignFBF),
                log_file: file.clone(),
                metrics: trial_metrics(log),
            })
            .collect();
        let row = |metric: &str, f: &dyn Fn(&TrialMetrics) -> Option<f64>| {
            let values: Vec<f64> = trials.iter().filter_map(|t| f(&t.metrics)).collect();
            let stat = Stat::of(&values);
            TableRow {
                metric: metric.to_string(),
                mean: stat.map(|s| s.mean),
                std: stat.map(|s| s.std),
            }
        };
        let table = vec![
            row("RMSE (mm)", &|m| m.boundary_rmse),
            row("Distance (mm)", &|m| Some(m.travel_distance)),
            row("Duration (s)", &|m| Some(m.duration_seconds)),
        ];
        Self {
            config_hash: config_hash.to_string(),
            aborted: trials.iter().filter(|t| matches!(t.outcome, ProcedurePhase::Aborted(_))).count(),
            trials,
            table,
        }
    }

    pub fn row(&self, metric: &str) -> Option<&TableRow> {
        self.table.iter().find(|r| r.metric == metric)
    }

    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<16}{:>12}{:>12}", "metric", "mean", "std");
        for r in &self.table {
            let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
            let _ = writeln!(s, "{:<16}{:>12}{:>12}", r.metric, f(r.mean), f(r.std));
        }
        let _ = writeln!(s, "aborted trials: {}/{}", self.aborted, self.trials.len());
        s
    }
}

pub fn log_file_name(index: u32) -> String {
    format!("trial_{index:03}.jsonl")
}

/// Runs the scenario, writing one JSONL log per trial and `summary.json` to the output directory.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioSummary, HarnessError> {
    let results = run_trials(config)?;
    fs::create_dir_all(&config.output_dir)?;
    let mut logs = Vec::with_capacity(results.len());
    for (i, (log, _)) in results.into_iter().enumerate() {
        let name = log_file_name(i as u32);
        fs::write(config.output_dir.join(&name), log.to_jsonl())?;
        logs.push((i as u32, name, log));
    }
    let summary = ScenarioSummary::from_logs(&config.config_hash(), &logs);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(config.output_dir.join("summary.json"), json + "\n")?;
    Ok(summary)
}

pub fn read_log(path: &Path) -> Result<TrialLog, HarnessError> {
    let file = fs::File::open(path)?;
    Ok(TrialLog::read_jsonl(BufReader::new(file))?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub seed: u64,
    pub config_hash: String,
    pub outcome: Option<ProcedurePhase>,
    pub ticks: usize,
    pub metrics: TrialMetrics,
}

/// Re-derives the metrics of a logged trial.
pub fn replay(log: &TrialLog) -> ReplayReport {
    ReplayReport {
        seed: log.meta.seed,
        config_hash: log.meta.config_hash.clone(),
        outcome: log.final_phase(),
        ticks: log.records.len(),
        metrics: trial_metrics(log),
    }
}

/// Plotted boundary points `(x, y, tick)` in camera-frame mm.
pub fn plot_points(logs: &[TrialLog]) -> Vec<(f64, f64, u64)> {
    logs.iter()
        .flat_map(|log| {
            log.records
                .iter()
                .filter(|r| {
                    matches!(
                        r.phase,
                        ProcedurePhase::SelectTarget | ProcedurePhase::MoveToTarget | ProcedurePhase::ApplyEnergy
                    )
                })
                .filter_map(|r| r.boundary_snapshot.as_ref().map(|s| (r.tick, s)))
                .flat_map(|(tick, s)| s.iter().map(move |p| (p[0], p[1], tick)))
        })
        .collect()
}

const SVG_SIZE: f64 = 480.0;
const SVG_MARGIN: f64 = 40.0;

/// Scatter of dissection-phase boundary points coloured by tick, with the fitted spline.
pub fn render_boundary_svg(logs: &[TrialLog]) -> String {
    let points = plot_points(logs);
    let snapshots: Vec<Vec<Vec3>> = logs.iter().flat_map(dissection_snapshots).collect();
    let curve = spline_rmse(&snapshots).map(|f| f.curve).unwrap_or_default();

    let (mut lo, mut hi) = ([0.0f64, 0.0], [1.0f64, 1.0]);
    if !points.is_empty() {
        lo = [f64::MAX; 2];
        hi = [f64::MIN; 2];
        for &(x, y, _) in &points {
            lo = [lo[0].min(x), lo[1].min(y)];
            hi = [hi[0].max(x), hi[1].max(y)];
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-6);
    let scale = (SVG_SIZE - 2.0 * SVG_MARGIN) / span;
    let to_px = |x: f64, y: f64| (SVG_MARGIN + (x - lo[0]) * scale, SVG_MARGIN + (y - lo[1]) * scale);
    let (t0, t1) = points
        .iter()
        .fold((u64::MAX, 0u64), |(a, b), p| (a.min(p.2), b.max(p.2)));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{0}" viewBox="0 0 {0} {0}">"#,
        SVG_SIZE
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{0}" height="{0}" fill="white"/>"#, SVG_SIZE);
    let inner = SVG_SIZE - 2.0 * SVG_MARGIN;
    let _ = writeln!(
        s,
        r#"<g class="axes" stroke="black" fill="none"><rect x="{m}" y="{m}" width="{inner}" height="{inner}"/></g>"#,
        m = SVG_MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">x (mm) from {:.2} to {:.2}</text>"#,
        SVG_SIZE / 2.0,
        SVG_SIZE - 12.0,
        lo[0],
        lo[0] + span
    );
    let _ = writeln!(
        s,
        r#"<text x="12" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 12 {:.1})">y (mm) from {:.2} to {:.2}</text>"#,
        SVG_SIZE / 2.0,
        SVG_SIZE / 2.0,
        lo[1],
        lo[1] + span
    );
    for &(x, y, tick) in &points {
        let (px, py) = to_px(x, y);
        let t = if t1 > t0 { (tick - t0) as f64 / (t1 - t0) as f64 } else { 0.0 };
        let (r, b) = ((255.0 * t).round() as u8, (255.0 * (1.0 - t)).round() as u8);
        let _ = writeln!(
            s,
            r##"<circle class="pt" cx="{px:.2}" cy="{py:.2}" r="1.5" fill="#{r:02x}40{b:02x}"/>"##
        );
    }
    if curve.len() > 1 {
        let path: Vec<String> = curve
            .iter()
            .map(|p| {
                let (px, py) = to_px(p.x, p.y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="spline" fill="none" stroke="blue" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn plot_boundary_distribution(logs: &[TrialLog], out: &Path) -> Result<(), HarnessError> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(out, render_boundary_svg(logs))?;
    Ok(())
}
