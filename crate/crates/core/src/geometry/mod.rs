//! Intersection layout, movement trajectories and the trajectory conflict graph.
//!
//! The canonical layout is a two-way, single-lane, four-leg intersection with
//! right-hand traffic. The global frame has its origin at the intersection
//! centre, X pointing east and Y pointing north. Each approach owns a lane
//! frame whose A-axis runs along the entry-lane centreline in the direction of
//! travel and whose B-axis is the A-axis rotated 90 degrees counter-clockwise.
//! The lane-frame origin sits at the start of the entry area, `l` metres before
//! the stop line.
//!
//! Approaches are numbered 1..=4; approach `i + 1` is approach `i` rotated by
//! -90 degrees. With the default orientation approach 1 enters from the west
//! driving east, approach 2 from the north, approach 3 from the east and
//! approach 4 from the south.

mod conflict;
mod path;

pub use conflict::{ConflictGraph, ConflictKind, ConflictPoint, CrossingEdge, MergePair};
pub use path::{wrap_angle, LanePoint, Movement, Pose, TrajectoryId, TrajectoryPath};

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

/// Maximum distance from a trajectory centreline for a point to count as on it.
pub const ON_PATH_TOLERANCE_M: f64 = 0.05;
/// Number of movement trajectories of a four-leg single-lane intersection.
pub const TRAJECTORY_COUNT: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("entry area of {length} m is shorter than the {required} m needed to stop from the speed limit")]
    EntryAreaTooShort { length: f64, required: f64 },
    #[error("turn radii {left} m + {right} m must equal twice the lane width {lane_width} m")]
    GeometryInconsistent { left: f64, right: f64, lane_width: f64 },
    #[error("`{field}` must be strictly positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("deceleration must be non-zero")]
    ZeroDeceleration,
    #[error("point is {distance} m away from trajectory {trajectory}")]
    OffPath { trajectory: u8, distance: f64 },
    #[error("arc length {s} m outside [0, {total}] m")]
    OutOfRange { s: f64, total: f64 },
    #[error("unknown trajectory id {0}")]
    UnknownTrajectory(u8),
}

/// Raw layout parameters, as read from a scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryParams {
    /// Length of the entry area `l`, measured back from the stop line.
    pub entry_length_m: f64,
    pub lane_width_m: f64,
    /// Radius `L` of the control range around the intersection centre.
    pub control_radius_m: f64,
    pub left_radius_m: f64,
    pub right_radius_m: f64,
    pub v_limit_mps: f64,
    /// Comfortable deceleration magnitude `a_d`.
    pub comfort_decel_mps2: f64,
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self {
            entry_length_m: 70.0,
            lane_width_m: 3.5,
            control_radius_m: 100.0,
            left_radius_m: 5.25,
            right_radius_m: 1.75,
            v_limit_mps: 13.8,
            comfort_decel_mps2: 2.0,
        }
    }
}

/// Minimum entry-area length that lets a vehicle brake from `v_limit` to a
/// standstill at deceleration `a_d`: `|v_limit^2 / (2 a_d)|`.
pub fn entry_area_min_length(v_limit: f64, a_d: f64) -> Result<f64, GeometryError> {
    if a_d == 0.0 {
        return Err(GeometryError::ZeroDeceleration);
    }
    Ok((v_limit * v_limit / (2.0 * a_d)).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// One entry approach and its lane frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Approach {
    /// 1-based approach index.
    pub index: u8,
    /// Direction of travel on the entry lane, radians counter-clockwise from east.
    pub heading: f64,
    /// Lane-frame origin in the global frame.
    pub origin: Point,
}

impl Approach {
    fn axes(&self) -> (Point, Point) {
        let (sin, cos) = self.heading.sin_cos();
        (Point::new(cos, sin), Point::new(-sin, cos))
    }

    pub fn to_global(&self, p: LanePoint) -> Point {
        let (u, n) = self.axes();
        Point::new(
            self.origin.x + p.alpha * u.x + p.beta * n.x,
            self.origin.y + p.alpha * u.y + p.beta * n.y,
        )
    }

    pub fn to_lane(&self, p: Point) -> LanePoint {
        let (u, n) = self.axes();
        let dx = p.x - self.origin.x;
        let dy = p.y - self.origin.y;
        LanePoint::new(dx * u.x + dy * u.y, dx * n.x + dy * n.y)
    }
}

/// Validated intersection layout.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionModel {
    params: GeometryParams,
    approaches: [Approach; 4],
}

impl IntersectionModel {
    pub fn new(params: GeometryParams) -> Result<Self, GeometryError> {
        let positive = [
            ("entry_length_m", params.entry_length_m),
            ("lane_width_m", params.lane_width_m),
            ("control_radius_m", params.control_radius_m),
            ("left_radius_m", params.left_radius_m),
            ("right_radius_m", params.right_radius_m),
            ("v_limit_mps", params.v_limit_mps),
            ("comfort_decel_mps2", params.comfort_decel_mps2),
        ];
        for (field, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(GeometryError::NonPositive { field, value });
            }
        }
        let sum = params.left_radius_m + params.right_radius_m;
        let two_w = 2.0 * params.lane_width_m;
        if (sum - two_w).abs() > 1e-9 * two_w {
            return Err(GeometryError::GeometryInconsistent {
                left: params.left_radius_m,
                right: params.right_radius_m,
                lane_width: params.lane_width_m,
            });
        }
        let required = entry_area_min_length(params.v_limit_mps, params.comfort_decel_mps2)?;
        if params.entry_length_m < required {
            return Err(GeometryError::EntryAreaTooShort {
                length: params.entry_length_m,
                required,
            });
        }

        // Turns start at the stop line, which is half the turning-radius sum
        // (one lane width) away from the centre.
        let origin_distance = params.entry_length_m + sum / 2.0;
        let half_lane = params.lane_width_m / 2.0;
        let approaches = std::array::from_fn(|k| {
            let heading = -(k as f64) * FRAC_PI_2;
            let (sin, cos) = heading.sin_cos();
            // Back along the lane, then to the right of the road axis.
            let origin = Point::new(
                -origin_distance * cos + half_lane * sin,
                -origin_distance * sin - half_lane * cos,
            );
            Approach {
                index: k as u8 + 1,
                heading,
                origin,
            }
        });
        Ok(Self { params, approaches })
    }

    pub fn params(&self) -> &GeometryParams {
        &self.params
    }

    /// Approach by 1-based index.
    pub fn approach(&self, index: u8) -> &Approach {
        &self.approaches[usize::from(index - 1)]
    }

    pub fn approaches(&self) -> &[Approach; 4] {
        &self.approaches
    }

    /// Entry-area length `l`; also the lane-frame arc length of the stop line.
    pub fn stop_line_s(&self) -> f64 {
        self.params.entry_length_m
    }

    /// Distance from the intersection centre to the lane-frame origin.
    pub fn origin_distance(&self) -> f64 {
        self.params.entry_length_m + self.params.lane_width_m
    }

    /// Stretch of approach between the control-range boundary and the entry
    /// area, expressed as a non-negative length. Vehicles registered at the
    /// boundary start at lane-frame arc length `-lead_in()`.
    pub fn lead_in(&self) -> f64 {
        (self.params.control_radius_m - self.origin_distance()).max(0.0)
    }

    pub fn trajectory(&self, id: TrajectoryId) -> TrajectoryPath {
        TrajectoryPath::new(self, id)
    }

    pub fn trajectories(&self) -> Vec<TrajectoryPath> {
        TrajectoryId::all().map(|id| self.trajectory(id)).collect()
    }

    /// Approach whose entry lane contains `p` (within half a lane width of the
    /// centreline, before the stop line), if any.
    pub fn locate_entry(&self, p: Point) -> Option<(u8, f64)> {
        self.approaches.iter().find_map(|a| {
            let lp = a.to_lane(p);
            let on_lane = lp.beta.abs() <= self.params.lane_width_m / 2.0;
            let before_line = lp.alpha <= self.stop_line_s() + 1e-9;
            let inside = lp.alpha >= -self.lead_in() - 1e-9;
            (on_lane && before_line && inside).then_some((a.index, lp.alpha))
        })
    }

    pub fn compute_conflict_graph(&self) -> ConflictGraph {
        ConflictGraph::compute(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn builds_default_layout() {
        let model = IntersectionModel::new(GeometryParams::default()).unwrap();
        assert_relative_eq!(model.origin_distance(), 73.5);
        assert_relative_eq!(model.lead_in(), 26.5);
        let a1 = model.approach(1);
        assert_relative_eq!(a1.origin.x, -73.5);
        assert_relative_eq!(a1.origin.y, -1.75);
        let a3 = model.approach(3);
        assert_relative_eq!(a3.origin.x, 73.5, epsilon = 1e-12);
        assert_relative_eq!(a3.origin.y, 1.75, epsilon = 1e-12);
    }

    #[test]
    fn entry_area_too_short() {
        let params = GeometryParams {
            entry_length_m: 40.0,
            ..Default::default()
        };
        match IntersectionModel::new(params) {
            Err(GeometryError::EntryAreaTooShort { required, .. }) => {
                assert_relative_eq!(required, 47.61, epsilon = 1e-9)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn symmetric_radii_are_valid() {
        let params = GeometryParams {
            left_radius_m: 3.5,
            right_radius_m: 3.5,
            ..Default::default()
        };
        assert!(IntersectionModel::new(params).is_ok());
    }

    #[test]
    fn inconsistent_radii_rejected() {
        let params = GeometryParams {
            left_radius_m: 5.0,
            ..Default::default()
        };
        assert!(matches!(
            IntersectionModel::new(params),
            Err(GeometryError::GeometryInconsistent { .. })
        ));
    }

    #[test]
    fn non_positive_field_named() {
        let params = GeometryParams {
            lane_width_m: 0.0,
            ..Default::default()
        };
        assert_eq!(
            IntersectionModel::new(params),
            Err(GeometryError::NonPositive {
                field: "lane_width_m",
                value: 0.0
            })
        );
    }

    #[test]
    fn entry_length_arithmetic() {
        assert_relative_eq!(entry_area_min_length(13.8, 2.0).unwrap(), 47.61, epsilon = 1e-12);
        assert_eq!(entry_area_min_length(0.0, 2.0).unwrap(), 0.0);
        assert_relative_eq!(entry_area_min_length(10.0, 2.5).unwrap(), 20.0);
        assert_relative_eq!(entry_area_min_length(10.0, -2.5).unwrap(), 20.0);
        assert_eq!(entry_area_min_length(10.0, 0.0), Err(GeometryError::ZeroDeceleration));
    }

    #[test]
    fn lane_frame_round_trip() {
        let model = IntersectionModel::new(GeometryParams::default()).unwrap();
        for a in model.approaches() {
            let lp = LanePoint::new(12.5, -0.7);
            let back = a.to_lane(a.to_global(lp));
            assert_relative_eq!(back.alpha, lp.alpha, epsilon = 1e-12);
            assert_relative_eq!(back.beta, lp.beta, epsilon = 1e-12);
        }
    }

    #[test]
    fn locates_table_positions() {
        let model = IntersectionModel::new(GeometryParams::default()).unwrap();
        let (a, s) = model.locate_entry(Point::new(-70.0, -1.75)).unwrap();
        assert_eq!(a, 1);
        assert_relative_eq!(s, 3.5, epsilon = 1e-9);
        let (a, s) = model.locate_entry(Point::new(1.75, -80.0)).unwrap();
        assert_eq!(a, 4);
        assert_relative_eq!(s, -6.5, epsilon = 1e-9);
        let (a, _) = model.locate_entry(Point::new(-1.75, 85.0)).unwrap();
        assert_eq!(a, 2);
        let (a, _) = model.locate_entry(Point::new(90.0, 1.75)).unwrap();
        assert_eq!(a, 3);
        assert!(model.locate_entry(Point::new(0.0, 0.0)).is_none());
    }
}
