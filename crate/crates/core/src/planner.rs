//! CAV decision layer: control-mode switching and per-mode references.
//!
//! All positions are front-bumper arc lengths. Distances are measured in the
//! ego's trajectory frame; a conflict partner is first mapped into that frame
//! with [`virtual_map`], which keeps its remaining distance to the conflict
//! point unchanged.

use crate::allocator::{VehicleId, VehicleKind};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    CarFollowing,
    Cruise,
    Waiting,
    ConflictSolving,
}

impl ControlMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ControlMode::CarFollowing => "car_following",
            ControlMode::Cruise => "cruise",
            ControlMode::Waiting => "waiting",
            ControlMode::ConflictSolving => "conflict_solving",
        }
    }
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerParams {
    /// Minimum standstill gap `d_min`.
    pub min_gap_m: f64,
    /// Following headway `h`.
    pub headway_s: f64,
    /// Waiting-mode stand-off `l_tar` before the stop line.
    pub stop_offset_m: f64,
    /// Stop-line proximity `epsilon` that triggers the waiting mode.
    pub stop_proximity_m: f64,
    /// Cruise target speed `v_tar`; `None` means the speed limit.
    pub target_speed_mps: Option<f64>,
    /// Vehicle length `l_V`.
    pub vehicle_length_m: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            min_gap_m: 2.0,
            headway_s: 1.5,
            stop_offset_m: 2.0,
            stop_proximity_m: 50.0,
            target_speed_mps: None,
            vehicle_length_m: 4.5,
        }
    }
}

/// Same-lane (or mapped exit-lane) vehicle ahead of the ego.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Leader {
    pub id: VehicleId,
    /// Front position in the ego frame.
    pub s: f64,
    pub v: f64,
    pub a: f64,
}

/// Already-granted vehicle `I_c` whose path conflicts with the ego's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConflictPartner {
    pub id: VehicleId,
    pub kind: VehicleKind,
    /// Conflict point on the ego trajectory, `s_p`.
    pub s_p: f64,
    /// Conflict point on the partner trajectory.
    pub s_p_other: f64,
    /// Partner front position in its own frame.
    pub s_other: f64,
    pub v: f64,
    pub a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlannerInputs {
    /// Right-of-way flag `B`.
    pub granted: bool,
    pub conflict: Option<ConflictPartner>,
    pub leader: Option<Leader>,
    pub s: f64,
    pub v: f64,
    pub stop_line_s: f64,
    pub v_tar: f64,
    /// Conflict headway `H` for the current partner.
    pub conflict_headway_s: f64,
}

/// Tracking target for the longitudinal controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reference {
    pub s_ref: f64,
    pub v_ref: f64,
    /// Headway term of the error dynamics (zero in cruise and waiting).
    pub headway: f64,
    /// Acceleration of the tracked vehicle.
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PlannerError {
    #[error("mode {0} needs a neighbour that is not present")]
    MissingNeighbor(ControlMode),
}

/// Partner position mapped into the ego frame: `s_p - (s~_p - s~_f)`.
pub fn virtual_map(s_p: f64, s_p_other: f64, s_other: f64) -> f64 {
    s_p - (s_p_other - s_other)
}

impl ConflictPartner {
    pub fn virtual_s(&self) -> f64 {
        virtual_map(self.s_p, self.s_p_other, self.s_other)
    }
}

/// `ind(min(d1, d2))`: 0 when `d1 <= d2`, else 1.
fn ind_min(d1: f64, d2: f64) -> usize {
    usize::from(d1 > d2)
}

/// Mode switching for one CAV.
pub fn switch_mode(inp: &PlannerInputs, params: &PlannerParams) -> ControlMode {
    if !inp.granted {
        return if inp.leader.is_some() {
            ControlMode::CarFollowing
        } else if inp.stop_line_s - inp.s < params.stop_proximity_m {
            ControlMode::Waiting
        } else {
            ControlMode::Cruise
        };
    }
    match (inp.leader, inp.conflict) {
        (Some(_), None) => ControlMode::CarFollowing,
        (None, Some(_)) => ControlMode::ConflictSolving,
        (Some(l), Some(c)) => {
            let d_f = l.s - inp.s;
            let d_c = c.virtual_s() - inp.s;
            if ind_min(d_f, d_c) == 0 {
                ControlMode::CarFollowing
            } else {
                ControlMode::ConflictSolving
            }
        }
        (None, None) => ControlMode::Cruise,
    }
}

/// Reference position and speed for a mode.
pub fn reference_for(
    mode: ControlMode,
    inp: &PlannerInputs,
    params: &PlannerParams,
) -> Result<Reference, PlannerError> {
    let standoff = params.min_gap_m + params.vehicle_length_m;
    Ok(match mode {
        ControlMode::CarFollowing => {
            let l = inp.leader.ok_or(PlannerError::MissingNeighbor(mode))?;
            Reference {
                s_ref: l.s - standoff - params.headway_s * inp.v,
                v_ref: l.v,
                headway: params.headway_s,
                omega: l.a,
            }
        }
        ControlMode::Cruise => Reference {
            s_ref: inp.s,
            v_ref: inp.v_tar,
            headway: 0.0,
            omega: 0.0,
        },
        ControlMode::Waiting => Reference {
            s_ref: inp.stop_line_s - params.stop_offset_m,
            v_ref: 0.0,
            headway: 0.0,
            omega: 0.0,
        },
        ControlMode::ConflictSolving => {
            let c = inp.conflict.ok_or(PlannerError::MissingNeighbor(mode))?;
            Reference {
                s_ref: c.virtual_s() - standoff - inp.conflict_headway_s * inp.v,
                v_ref: c.v,
                headway: inp.conflict_headway_s,
                omega: c.a,
            }
        }
    })
}
