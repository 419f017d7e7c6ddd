use crate::geometry::{wrap_angle, Point, TrajectoryPath};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StanleyParams {
    /// Cross-track gain `k_f`.
    pub gain: f64,
    pub max_steer_rad: f64,
    /// Speed floor that keeps the arctangent term finite at standstill.
    pub speed_floor_mps: f64,
}

impl Default for StanleyParams {
    fn default() -> Self {
        Self {
            gain: 2.5,
            max_steer_rad: 0.6,
            speed_floor_mps: 0.5,
        }
    }
}

/// Front-axle pose and speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LateralState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StanleyOutput {
    pub delta: f64,
    pub saturated: bool,
    /// Signed cross-track error, positive when the path lies to the left.
    pub e_sc: f64,
    pub path_heading: f64,
    /// Arc length of the nearest path point.
    pub s: f64,
}

/// `delta = (theta_P - theta_V) + atan(k_f e_sc / v)`, clamped to the steering limit.
pub fn stanley_law(heading_error: f64, e_sc: f64, v: f64, p: &StanleyParams) -> (f64, bool) {
    let v = v.max(p.speed_floor_mps);
    let raw = wrap_angle(heading_error) + (p.gain * e_sc / v).atan();
    let delta = raw.clamp(-p.max_steer_rad, p.max_steer_rad);
    (delta, delta != raw)
}

pub fn stanley_steer(state: &LateralState, path: &TrajectoryPath, p: &StanleyParams) -> StanleyOutput {
    let (s, e_sc, path_heading) = path.project(Point::new(state.x, state.y));
    let (delta, saturated) = stanley_law(path_heading - state.heading, e_sc, state.v, p);
    StanleyOutput {
        delta,
        saturated,
        e_sc,
        path_heading,
        s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn aligned_on_path_is_zero() {
        assert_eq!(stanley_law(0.0, 0.0, 10.0, &StanleyParams::default()).0, 0.0);
    }

    #[test]
    fn cross_track_term() {
        let p = StanleyParams {
            gain: 2.0,
            ..Default::default()
        };
        let (d, sat) = stanley_law(0.0, 0.5, 10.0, &p);
        assert_relative_eq!(d, 0.1f64.atan(), epsilon = 1e-15);
        assert!(!sat);
    }

    #[test]
    fn heading_term_turns_back_toward_path() {
        // Vehicle heading 0.2 rad counter-clockwise of the path.
        let (d, _) = stanley_law(-0.2, 0.0, 10.0, &StanleyParams::default());
        assert_relative_eq!(d, -0.2);
    }

    #[test]
    fn saturates() {
        let (d, sat) = stanley_law(0.0, 10.0, 0.0, &StanleyParams::default());
        assert_relative_eq!(d, 0.6);
        assert!(sat);
    }
}
