//! Intersection control unit: FCFS priorities, the S1/S2/S3 vehicle sets, the
//! per-lane priority queues and the heuristic-priority-queue grant step.

mod gate;
mod hpq;

pub use gate::{abnormal_threshold, detect_abnormal, earliest_entry_time, NonpositiveSpeed, SafetyGate};
pub use hpq::{fcfs_strict_step, hpq_step, Candidate, GrantDecision};

use crate::geometry::{ConflictGraph, TrajectoryId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleKind {
    Cav,
    Chv,
}

impl VehicleKind {
    /// Type flag `C(V)`: 1 for a human-driven vehicle, 0 for an automated one.
    pub fn flag(self) -> u8 {
        match self {
            VehicleKind::Cav => 0,
            VehicleKind::Chv => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VehicleSet {
    S1,
    S2,
    S3,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehicleRecord {
    pub id: VehicleId,
    pub kind: VehicleKind,
    pub traj: TrajectoryId,
    /// Priority `P`; meaningful while in S3, frozen at its grant value after.
    pub priority: u32,
    pub t_enter: f64,
    pub set: VehicleSet,
    pub granted_at: Option<f64>,
    pub lane: u8,
    /// Set once the vehicle has been judged abnormal.
    pub abnormal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AllocatorParams {
    /// Following headway `h`.
    pub headway_s: f64,
    /// Conflict headway `H` when the partner is a CAV.
    pub conflict_headway_cav_s: f64,
    /// Conflict headway `H` when the partner is a CHV.
    pub conflict_headway_chv_s: f64,
    /// Abnormal-judgment slack `sigma`.
    pub sigma_s: f64,
    pub cycle_s: f64,
    /// Scale the cycle with demand instead of using `cycle_s`.
    pub adaptive_cycle: bool,
    pub abnormal_handling: bool,
}

impl Default for AllocatorParams {
    fn default() -> Self {
        Self {
            headway_s: 1.5,
            conflict_headway_cav_s: 1.5,
            conflict_headway_chv_s: 2.0,
            sigma_s: 5.0,
            cycle_s: 0.5,
            adaptive_cycle: false,
            abnormal_handling: true,
        }
    }
}

impl AllocatorParams {
    pub fn conflict_headway(&self, partner: VehicleKind) -> f64 {
        match partner {
            VehicleKind::Cav => self.conflict_headway_cav_s,
            VehicleKind::Chv => self.conflict_headway_chv_s,
        }
    }

    /// ICU cycle for a given total flow. The adaptive schedule runs linearly
    /// from 1.0 s at 400 pcu/h down to 0.2 s at 1600 pcu/h.
    pub fn cycle_for_flow(&self, flow_pcuh: f64) -> f64 {
        if !self.adaptive_cycle {
            return self.cycle_s;
        }
        let t = ((flow_pcuh - 400.0) / 1200.0).clamp(0.0, 1.0);
        1.0 - 0.8 * t
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AllocatorError {
    #[error("vehicle {0} is already registered")]
    DuplicateId(VehicleId),
    #[error("vehicle {0} is not waiting in S3")]
    NotInS3(VehicleId),
    #[error("vehicle {0} is not occupying the right of way")]
    NotInS2(VehicleId),
    #[error("vehicle {0} is unknown")]
    UnknownVehicle(VehicleId),
}

/// Explicit allocator state (`QueueState` plus the three vehicle sets).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AllocatorState {
    records: BTreeMap<VehicleId, VehicleRecord>,
    /// Per-lane S3 queues. Lane order is arrival order, which is also
    /// ascending priority because demotions act on whole lanes.
    queues: [VecDeque<VehicleId>; 4],
    s2: Vec<VehicleId>,
    s3_len: usize,
}

impl AllocatorState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register an arrival in S3 with the next FCFS priority.
    pub fn register(
        &mut self,
        id: VehicleId,
        kind: VehicleKind,
        traj: TrajectoryId,
        t_enter: f64,
    ) -> Result<&VehicleRecord, AllocatorError> {
        if self.records.contains_key(&id) {
            return Err(AllocatorError::DuplicateId(id));
        }
        let lane = traj.approach();
        let priority = self.s3_len as u32 + 1;
        self.queues[usize::from(lane - 1)].push_back(id);
        self.s3_len += 1;
        let rec = VehicleRecord {
            id,
            kind,
            traj,
            priority,
            t_enter,
            set: VehicleSet::S3,
            granted_at: None,
            lane,
            abnormal: false,
        };
        Ok(self.records.entry(id).or_insert(rec))
    }

    pub fn get(&self, id: VehicleId) -> Option<&VehicleRecord> {
        self.records.get(&id)
    }

    pub fn records(&self) -> impl Iterator<Item = &VehicleRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn queue(&self, lane: u8) -> &VecDeque<VehicleId> {
        &self.queues[usize::from(lane - 1)]
    }

    /// Queue heads `Qp`, ordered by ascending priority.
    pub fn heads(&self) -> Vec<&VehicleRecord> {
        let mut heads: Vec<_> = self
            .queues
            .iter()
            .filter_map(|q| q.front())
            .map(|id| &self.records[id])
            .collect();
        heads.sort_by_key(|r| (r.priority, r.lane));
        heads
    }

    /// Vehicles holding the right of way, in grant order.
    pub fn s2(&self) -> impl Iterator<Item = &VehicleRecord> {
        self.s2.iter().map(|id| &self.records[id])
    }

    pub fn s2_len(&self) -> usize {
        self.s2.len()
    }

    /// Vehicles still waiting, in id order.
    pub fn s3(&self) -> impl Iterator<Item = &VehicleRecord> {
        self.records.values().filter(|r| r.set == VehicleSet::S3)
    }

    pub fn s3_len(&self) -> usize {
        self.s3_len
    }

    pub fn count(&self, set: VehicleSet) -> usize {
        match set {
            VehicleSet::S2 => self.s2.len(),
            VehicleSet::S3 => self.s3_len,
            VehicleSet::S1 => self.records.len() - self.s2.len() - self.s3_len,
        }
    }

    pub fn has_right_of_way(&self, id: VehicleId) -> bool {
        self.records
            .get(&id)
            .is_some_and(|r| r.set != VehicleSet::S3)
    }

    /// Move a granted vehicle from S3 to S2 and close the priority gap it
    /// leaves behind.
    pub fn apply_grant(&mut self, id: VehicleId, t: f64) -> Result<(), AllocatorError> {
        let rec = self.records.get(&id).ok_or(AllocatorError::UnknownVehicle(id))?;
        if rec.set != VehicleSet::S3 {
            return Err(AllocatorError::NotInS3(id));
        }
        let lane = usize::from(rec.lane - 1);
        let granted_p = rec.priority;
        let pos = self.queues[lane]
            .iter()
            .position(|&q| q == id)
            .expect("S3 vehicle is queued");
        self.queues[lane].remove(pos);
        self.s3_len -= 1;
        for q in &self.queues {
            for other in q {
                let r = self.records.get_mut(other).expect("queued vehicle is recorded");
                if r.priority > granted_p {
                    r.priority -= 1;
                }
            }
        }
        let rec = self.records.get_mut(&id).expect("checked above");
        rec.set = VehicleSet::S2;
        rec.granted_at = Some(t);
        self.s2.push(id);
        Ok(())
    }

    /// Release the conflict area held by a vehicle that has cleared it.
    pub fn promote_to_s1(&mut self, id: VehicleId) -> Result<(), AllocatorError> {
        let rec = self.records.get_mut(&id).ok_or(AllocatorError::UnknownVehicle(id))?;
        if rec.set != VehicleSet::S2 {
            return Err(AllocatorError::NotInS2(id));
        }
        rec.set = VehicleSet::S1;
        self.s2.retain(|&v| v != id);
        Ok(())
    }

    /// Drop a vehicle that has left the control range.
    pub fn depart(&mut self, id: VehicleId) -> Result<VehicleRecord, AllocatorError> {
        let rec = self.records.remove(&id).ok_or(AllocatorError::UnknownVehicle(id))?;
        match rec.set {
            VehicleSet::S2 => self.s2.retain(|&v| v != id),
            VehicleSet::S3 => {
                let q = &mut self.queues[usize::from(rec.lane - 1)];
                q.retain(|&v| v != id);
                self.s3_len -= 1;
                for r in self.records.values_mut() {
                    if r.set == VehicleSet::S3 && r.priority > rec.priority {
                        r.priority -= 1;
                    }
                }
            }
            VehicleSet::S1 => {}
        }
        Ok(rec)
    }

    /// Flag an abnormal vehicle and move every vehicle still queued in its
    /// lane to the lowest priorities, keeping their relative order. The
    /// flagged vehicle keeps its place in S2 so that its conflicts keep
    /// blocking crossing traffic while it is physically in the way.
    pub fn handle_abnormal(&mut self, id: VehicleId) -> Result<(), AllocatorError> {
        let rec = self.records.get_mut(&id).ok_or(AllocatorError::UnknownVehicle(id))?;
        rec.abnormal = true;
        let lane = rec.lane;
        let mut order: Vec<(u32, u8, VehicleId)> = self
            .s3()
            .map(|r| (r.priority, r.lane, r.id))
            .collect();
        order.sort_unstable();
        let (same, others): (Vec<_>, Vec<_>) = order.into_iter().partition(|&(_, l, _)| l == lane);
        for (p, (_, _, v)) in (1u32..).zip(others.into_iter().chain(same)) {
            self.records.get_mut(&v).expect("queued").priority = p;
        }
        Ok(())
    }

    /// Conflicts of a candidate trajectory with S2: the count `N1` and the
    /// last conflicting vehicle scanned.
    pub fn s2_conflicts(&self, traj: TrajectoryId, graph: &ConflictGraph) -> (usize, Option<VehicleId>) {
        let mut n = 0;
        let mut last = None;
        for r in self.s2() {
            if graph.conflicts(traj, r.traj) {
                n += 1;
                last = Some(r.id);
            }
        }
        (n, last)
    }

    /// Conflicts of a candidate with higher-priority S3 vehicles: `N2`.
    pub fn s3_conflicts(&self, traj: TrajectoryId, priority: u32, graph: &ConflictGraph) -> usize {
        self.s3()
            .filter(|r| r.priority < priority && graph.conflicts(traj, r.traj))
            .count()
    }

    /// Check the structural invariants; used by tests and debug assertions.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut ps: Vec<u32> = self.s3().map(|r| r.priority).collect();
        ps.sort_unstable();
        if ps.iter().copied().ne(1..=ps.len() as u32) {
            return Err(format!("S3 priorities not compact: {ps:?}"));
        }
        if ps.len() != self.s3_len {
            return Err("S3 length drifted".into());
        }
        for (i, q) in self.queues.iter().enumerate() {
            let mut prev: Option<&VehicleRecord> = None;
            for id in q {
                let r = &self.records[id];
                if r.set != VehicleSet::S3 || usize::from(r.lane) != i + 1 {
                    return Err(format!("vehicle {id} misfiled in queue {}", i + 1));
                }
                if let Some(p) = prev {
                    if p.priority > r.priority || p.t_enter > r.t_enter {
                        return Err(format!("queue {} out of order at {id}", i + 1));
                    }
                }
                prev = Some(r);
            }
        }
        for id in &self.s2 {
            if self.records[id].set != VehicleSet::S2 {
                return Err(format!("vehicle {id} in S2 list with wrong set"));
            }
        }
        Ok(())
    }
}
