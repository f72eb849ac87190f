//! Per-tick trial records and their JSONL encoding.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::ProcedurePhase;
use crate::geometry::Frame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyEvent {
    /// True PCH tip position at which energy was delivered (mm).
    pub point: [f64; 3],
    pub radius: f64,
    /// Attachment points the burn released.
    pub released: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub phase: ProcedurePhase,
    /// True instrument poses at the end of the tick.
    pub fbf_pose: Frame,
    pub pch_pose: Frame,
    /// PCH tip position as perceived at the start of the tick.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pch_estimate: Option<[f64; 3]>,
    pub jaw_open: bool,
    pub energy_on: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_event: Option<EnergyEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_snapshot: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMeta {
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub meta: TrialMeta,
    pub records: Vec<TickRecord>,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("log is empty")]
    Empty,
}

impl TrialLog {
    pub fn final_phase(&self) -> Option<ProcedurePhase> {
        self.records.last().map(|r| r.phase)
    }

    pub fn ticks_strictly_increase(&self) -> bool {
        self.records.windows(2).all(|w| w[1].tick > w[0].tick)
    }

    /// Metadata line followed by one line per tick.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        serde_json::to_writer(&mut out, &self.meta)?;
        out.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("in-memory write");
        buf
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, LogError> {
        let mut lines = input.lines().enumerate().filter(|(_, l)| {
            l.as_ref().map_or(true, |s| !s.trim().is_empty())
        });
        let (_, first) = lines.next().ok_or(LogError::Empty)?;
        let meta = serde_json::from_str(&first?).map_err(|source| LogError::Parse { line: 1, source })?;
        let mut records = Vec::new();
        for (i, line) in lines {
            let r = serde_json::from_str(&line?).map_err(|source| LogError::Parse { line: i + 1, source })?;
            records.push(r);
        }
        Ok(Self { meta, records })
    }
}
