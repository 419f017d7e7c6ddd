//! Connected human-driven vehicles: ideal compliance with ICU instructions.

use crate::planner::Leader;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Instruction {
    StopAtLine,
    Proceed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverParams {
    pub min_gap_m: f64,
    pub headway_s: f64,
    pub vehicle_length_m: f64,
    pub stop_offset_m: f64,
    pub target_speed_mps: f64,
    pub accel_max_mps2: f64,
    /// Comfortable deceleration `a_d`.
    pub comfort_decel_mps2: f64,
    pub emergency_decel_mps2: f64,
}

/// Gain on the spacing error of the car-following law.
const SPACING_GAIN: f64 = 0.5;
/// Gain of the free-road speed law, per second.
const SPEED_GAIN: f64 = 1.0;
/// Stop braking starts once the required deceleration exceeds this share of `a_d`.
const BRAKE_ONSET: f64 = 0.95;

/// Constant deceleration that brings `v` to rest within `d`.
pub fn stop_decel(v: f64, d: f64) -> f64 {
    v * v / (2.0 * d.max(0.01))
}

/// Braking needed to stop within `d`, if any: active once the constant
/// deceleration profile needs more than the onset share of `a_d`.
pub fn stop_brake(d: f64, v: f64, p: &DriverParams) -> Option<f64> {
    if d <= 0.0 {
        return Some(-p.emergency_decel_mps2);
    }
    let b = stop_decel(v, d);
    (b > BRAKE_ONSET * p.comfort_decel_mps2).then(|| -b.min(p.emergency_decel_mps2))
}

/// [`stop_brake`] toward the stand-off point `stop_line_s - l_tar`.
pub fn stop_line_brake(s: f64, v: f64, stop_line_s: f64, p: &DriverParams) -> Option<f64> {
    stop_brake(stop_line_s - p.stop_offset_m - s, v, p)
}

/// Acceleration of one CHV for the current tick.
pub fn chv_driver(
    instruction: Instruction,
    s: f64,
    v: f64,
    stop_line_s: f64,
    leader: Option<Leader>,
    p: &DriverParams,
) -> f64 {
    let mut a = (SPEED_GAIN * (p.target_speed_mps - v)).clamp(-p.comfort_decel_mps2, p.accel_max_mps2);
    if let Some(l) = leader {
        let gap = l.s - p.vehicle_length_m - s;
        let e = gap - (p.min_gap_m + p.headway_s * v);
        a = a.min((l.v - v + SPACING_GAIN * e) / p.headway_s);
    }
    if instruction == Instruction::StopAtLine {
        if let Some(b) = stop_line_brake(s, v, stop_line_s, p) {
            a = a.min(b);
        }
    }
    a.clamp(-p.emergency_decel_mps2, p.accel_max_mps2)
}
