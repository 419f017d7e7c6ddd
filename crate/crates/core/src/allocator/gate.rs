use thiserror::Error;

/// Inputs of the safe-passage headway condition at a conflict point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyGate {
    /// Entry time of the predecessor.
    pub t_f: f64,
    /// Minimum time headway `h`.
    pub h: f64,
    /// Predecessor's stop-line-to-conflict-point distance.
    pub s_f: f64,
    pub v_f: f64,
    /// Ego's stop-line-to-conflict-point distance.
    pub s_b: f64,
    pub v_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("speeds must be positive, got v_f = {v_f}, v_b = {v_b}")]
pub struct NonpositiveSpeed {
    pub v_f: f64,
    pub v_b: f64,
}

/// Earliest ego entry time `T_f + h + s_f / v_f - s_b / v_b`. Callers clamp
/// the result at the current time.
pub fn earliest_entry_time(g: &SafetyGate) -> Result<f64, NonpositiveSpeed> {
    if !(g.v_f > 0.0 && g.v_b > 0.0) {
        return Err(NonpositiveSpeed { v_f: g.v_f, v_b: g.v_b });
    }
    Ok(g.t_f + g.h + g.s_f / g.v_f - g.s_b / g.v_b)
}

/// Passing-time limit `A_l / (v_limit / 2) + sigma`.
pub fn abnormal_threshold(entry_length: f64, v_limit: f64, sigma: f64) -> f64 {
    entry_length / (v_limit / 2.0) + sigma
}

/// Whether a vehicle that has held the right of way for `t_e` seconds is abnormal.
pub fn detect_abnormal(t_e: f64, entry_length: f64, v_limit: f64, sigma: f64) -> bool {
    t_e > abnormal_threshold(entry_length, v_limit, sigma)
}
