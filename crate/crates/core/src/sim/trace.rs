use crate::allocator::{Candidate, VehicleId, VehicleKind, VehicleSet};
use crate::geometry::TrajectoryId;
use crate::planner::ControlMode;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

/// Per-vehicle state in a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSnapshot {
    pub id: VehicleId,
    pub kind: VehicleKind,
    pub traj: TrajectoryId,
    pub set: VehicleSet,
    pub s: f64,
    pub v: f64,
    pub a: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// One trace record; serialised as a JSON object tagged by `type`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceEvent {
    Spawn {
        t: f64,
        id: VehicleId,
        kind: VehicleKind,
        traj: TrajectoryId,
        s: f64,
        v: f64,
    },
    Decision {
        cycle: u64,
        t: f64,
        candidates: Vec<Candidate>,
        granted: Option<VehicleId>,
        conflict: Option<VehicleId>,
    },
    Mode {
        t: f64,
        id: VehicleId,
        from: Option<ControlMode>,
        to: ControlMode,
    },
    Control {
        t: f64,
        id: VehicleId,
        mode: ControlMode,
        s_ref: f64,
        v_ref: f64,
        accel: f64,
        fallback: bool,
        soft: bool,
        steer: f64,
    },
    Promote {
        t: f64,
        id: VehicleId,
    },
    Depart {
        t: f64,
        id: VehicleId,
    },
    Abnormal {
        t: f64,
        id: VehicleId,
        held_s: f64,
    },
    Snapshot {
        t: f64,
        vehicles: Vec<VehicleSnapshot>,
    },
}

impl TraceEvent {
    pub fn t(&self) -> f64 {
        match self {
            TraceEvent::Spawn { t, .. }
            | TraceEvent::Decision { t, .. }
            | TraceEvent::Mode { t, .. }
            | TraceEvent::Control { t, .. }
            | TraceEvent::Promote { t, .. }
            | TraceEvent::Depart { t, .. }
            | TraceEvent::Abnormal { t, .. }
            | TraceEvent::Snapshot { t, .. } => *t,
        }
    }
}

pub fn write_jsonl<W: Write>(events: &[TraceEvent], mut w: W) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_jsonl(text: &str) -> Result<Vec<TraceEvent>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Grant bar: from the grant time until the vehicle leaves the control range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrantInterval {
    pub vehicle: VehicleId,
    pub grant_start: f64,
    pub grant_end: Option<f64>,
}

pub fn grant_timeline(events: &[TraceEvent]) -> Vec<GrantInterval> {
    let mut out: Vec<GrantInterval> = Vec::new();
    for e in events {
        match e {
            TraceEvent::Decision { t, granted: Some(id), .. } => out.push(GrantInterval {
                vehicle: *id,
                grant_start: *t,
                grant_end: None,
            }),
            TraceEvent::Depart { t, id } => {
                if let Some(g) = out.iter_mut().find(|g| g.vehicle == *id && g.grant_end.is_none()) {
                    g.grant_end = Some(*t);
                }
            }
            _ => {}
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeSegment {
    pub vehicle: VehicleId,
    pub mode: ControlMode,
    pub t_start: f64,
    pub t_end: f64,
}

/// Mode segments per vehicle; a segment still open at the vehicle's
/// departure (or at the end of the trace) is closed there.
pub fn mode_timeline(events: &[TraceEvent]) -> Vec<ModeSegment> {
    let end = events.iter().map(TraceEvent::t).fold(0.0, f64::max);
    let mut open: Vec<ModeSegment> = Vec::new();
    let mut out = Vec::new();
    for e in events {
        match e {
            TraceEvent::Mode { t, id, to, .. } => {
                if let Some(i) = open.iter().position(|s| s.vehicle == *id) {
                    let mut seg = open.swap_remove(i);
                    seg.t_end = *t;
                    out.push(seg);
                }
                open.push(ModeSegment {
                    vehicle: *id,
                    mode: *to,
                    t_start: *t,
                    t_end: *t,
                });
            }
            TraceEvent::Depart { t, id } => {
                if let Some(i) = open.iter().position(|s| s.vehicle == *id) {
                    let mut seg = open.swap_remove(i);
                    seg.t_end = *t;
                    out.push(seg);
                }
            }
            _ => {}
        }
    }
    for mut seg in open {
        seg.t_end = end;
        out.push(seg);
    }
    out.sort_by(|a, b| a.vehicle.cmp(&b.vehicle).then(a.t_start.total_cmp(&b.t_start)));
    out
}

/// Mode sequence of one vehicle, ignoring segments of at most `min_len_s`
/// and merging the neighbours they separated.
pub fn mode_sequence(segments: &[ModeSegment], vehicle: VehicleId, min_len_s: f64) -> Vec<ControlMode> {
    let mut seq: Vec<ControlMode> = Vec::new();
    for s in segments.iter().filter(|s| s.vehicle == vehicle) {
        if s.t_end - s.t_start <= min_len_s {
            continue;
        }
        if seq.last() != Some(&s.mode) {
            seq.push(s.mode);
        }
    }
    seq
}
