use super::{GeometryError, IntersectionModel, Point, ON_PATH_TOLERANCE_M, TRAJECTORY_COUNT};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Movement {
    Right,
    Straight,
    Left,
}

impl Movement {
    fn offset(self) -> u8 {
        match self {
            Movement::Right => 0,
            Movement::Straight => 1,
            Movement::Left => 2,
        }
    }

    /// Quarter turns of the exit heading relative to the entry heading,
    /// counted clockwise.
    fn exit_quarter_turns(self) -> u8 {
        match self {
            Movement::Right => 1,
            Movement::Straight => 0,
            Movement::Left => 3,
        }
    }
}

impl fmt::Display for Movement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Movement::Right => "right",
            Movement::Straight => "straight",
            Movement::Left => "left",
        })
    }
}

/// Trajectory number 0..=11: `3 * (approach - 1) + {right: 0, straight: 1, left: 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrajectoryId(u8);

impl TrajectoryId {
    pub fn new(id: u8) -> Result<Self, GeometryError> {
        if usize::from(id) < TRAJECTORY_COUNT {
            Ok(Self(id))
        } else {
            Err(GeometryError::UnknownTrajectory(id))
        }
    }

    pub fn from_parts(approach: u8, movement: Movement) -> Self {
        debug_assert!((1..=4).contains(&approach));
        Self(3 * (approach - 1) + movement.offset())
    }

    pub fn all() -> impl Iterator<Item = TrajectoryId> {
        (0..TRAJECTORY_COUNT as u8).map(TrajectoryId)
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    pub fn raw(self) -> u8 {
        self.0
    }

    pub fn approach(self) -> u8 {
        self.0 / 3 + 1
    }

    pub fn movement(self) -> Movement {
        match self.0 % 3 {
            0 => Movement::Right,
            1 => Movement::Straight,
            _ => Movement::Left,
        }
    }

    /// Exit leg, identified by the 0-based index of the approach whose travel
    /// direction matches the exit heading.
    pub fn exit(self) -> u8 {
        (self.approach() - 1 + self.movement().exit_quarter_turns()) % 4
    }
}

impl fmt::Display for TrajectoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Point in an approach's lane frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanePoint {
    pub alpha: f64,
    pub beta: f64,
}

impl LanePoint {
    pub const fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }
}

/// Global position and heading (radians, counter-clockwise from east).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Piece of a trajectory in its lane frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Piece {
    Line {
        start: LanePoint,
        /// Lane-frame direction, radians.
        direction: f64,
        length: f64,
        s0: f64,
    },
    Arc {
        center: LanePoint,
        radius: f64,
        /// Angle of the start point seen from the centre.
        start_angle: f64,
        /// Signed sweep, positive counter-clockwise.
        sweep: f64,
        s0: f64,
    },
}

impl Piece {
    pub(crate) fn length(&self) -> f64 {
        match *self {
            Piece::Line { length, .. } => length,
            Piece::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    pub(crate) fn s0(&self) -> f64 {
        match *self {
            Piece::Line { s0, .. } | Piece::Arc { s0, .. } => s0,
        }
    }
}

/// One of the twelve movement paths: an entry straight of length `l`, a
/// quarter-circle turn (absent for straight movements) and an exit straight.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPath {
    id: TrajectoryId,
    approach: super::Approach,
    entry_length: f64,
    radius: f64,
    total_length: f64,
    pieces: Vec<Piece>,
}

impl TrajectoryPath {
    pub(crate) fn new(model: &IntersectionModel, id: TrajectoryId) -> Self {
        let p = model.params();
        let l = p.entry_length_m;
        let approach = *model.approach(id.approach());
        let (radius, pieces) = match id.movement() {
            Movement::Straight => {
                let length = 2.0 * p.control_radius_m;
                let line = Piece::Line {
                    start: LanePoint::new(0.0, 0.0),
                    direction: 0.0,
                    length,
                    s0: 0.0,
                };
                (0.0, vec![line])
            }
            Movement::Left => {
                let r = p.left_radius_m;
                (r, turn_pieces(l, r, 1.0))
            }
            Movement::Right => {
                let r = p.right_radius_m;
                (r, turn_pieces(l, r, -1.0))
            }
        };
        let total_length = pieces.iter().map(Piece::length).sum();
        Self {
            id,
            approach,
            entry_length: l,
            radius,
            total_length,
            pieces,
        }
    }

    pub fn id(&self) -> TrajectoryId {
        self.id
    }

    pub fn movement(&self) -> Movement {
        self.id.movement()
    }

    pub fn approach(&self) -> &super::Approach {
        &self.approach
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub(crate) fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Arc length at which the path joins its exit lane: the end of the turn,
    /// or for a straight movement the far edge of the intersection box.
    pub fn exit_join_s(&self) -> f64 {
        match self.movement() {
            Movement::Straight => self.entry_length + 2.0 * self.box_half_width(),
            _ => self.entry_length + FRAC_PI_2 * self.radius,
        }
    }

    fn box_half_width(&self) -> f64 {
        self.approach.to_lane(Point::new(0.0, 0.0)).alpha - self.entry_length
    }

    /// Lane-frame arc length and heading (degrees) of a point on the path.
    ///
    /// Evaluates the case formulas piece by piece: `s = alpha` on the entry
    /// straight, `s = l + R atan((alpha - l) / (R - beta))` on a left arc, and
    /// `s = l + pi R / 2 + beta - R` on the left exit straight, with the mirrored
    /// expressions for right turns.
    pub fn arc_length_heading(&self, p: LanePoint) -> Result<(f64, f64), GeometryError> {
        let l = self.entry_length;
        let mut best: Option<(f64, f64, f64)> = None;
        let mut consider = |dist: f64, s: f64, theta: f64| {
            if best.is_none_or(|(d, _, _)| dist < d) {
                best = Some((dist, s, theta));
            }
        };
        match self.movement() {
            Movement::Straight => {
                let a = p.alpha.clamp(0.0, self.total_length);
                consider((p.alpha - a).hypot(p.beta), a, 0.0);
            }
            Movement::Left => {
                let r = self.radius;
                let a = p.alpha.clamp(0.0, l);
                consider((p.alpha - a).hypot(p.beta), a, 0.0);
                let phi = (p.alpha - l).atan2(r - p.beta).clamp(0.0, FRAC_PI_2);
                let on = LanePoint::new(l + r * phi.sin(), r - r * phi.cos());
                let dist = (p.alpha - on.alpha).hypot(p.beta - on.beta);
                consider(dist, l + r * phi, phi.to_degrees());
                let b = p.beta.clamp(r, r + l);
                let dist = (p.alpha - (l + r)).hypot(p.beta - b);
                consider(dist, l + 0.5 * PI * r + b - r, 90.0);
            }
            Movement::Right => {
                let r = self.radius;
                let a = p.alpha.clamp(0.0, l);
                consider((p.alpha - a).hypot(p.beta), a, 0.0);
                let phi = (p.alpha - l).atan2(r + p.beta).clamp(0.0, FRAC_PI_2);
                let on = LanePoint::new(l + r * phi.sin(), -r + r * phi.cos());
                let dist = (p.alpha - on.alpha).hypot(p.beta - on.beta);
                consider(dist, l + r * phi, -phi.to_degrees());
                let b = p.beta.clamp(-l - r, -r);
                let dist = (p.alpha - (l + r)).hypot(p.beta - b);
                consider(dist, l + 0.5 * PI * r - b - r, -90.0);
            }
        }
        let (dist, s, theta) = best.expect("at least one piece");
        if dist > ON_PATH_TOLERANCE_M {
            return Err(GeometryError::OffPath {
                trajectory: self.id.raw(),
                distance: dist,
            });
        }
        Ok((s, theta))
    }

    /// Lane-frame point and heading (radians) at arc length `s`. Values of `s`
    /// below zero extrapolate backwards along the entry straight and values
    /// past the end extrapolate along the exit straight.
    pub fn lane_point_at(&self, s: f64) -> (LanePoint, f64) {
        let last = self.pieces.len() - 1;
        let piece = self
            .pieces
            .iter()
            .position(|pc| s < pc.s0() + pc.length())
            .map_or(&self.pieces[last], |i| &self.pieces[i]);
        match *piece {
            Piece::Line {
                start,
                direction,
                s0,
                ..
            } => {
                let d = s - s0;
                let (sin, cos) = direction.sin_cos();
                (
                    LanePoint::new(start.alpha + d * cos, start.beta + d * sin),
                    direction,
                )
            }
            Piece::Arc {
                center,
                radius,
                start_angle,
                sweep,
                s0,
            } => {
                if s < s0 {
                    // Only reached when the arc is the first piece, which never happens.
                    unreachable!("arcs are preceded by the entry straight");
                }
                let angle = start_angle + sweep.signum() * (s - s0) / radius;
                let pt = LanePoint::new(
                    center.alpha + radius * angle.cos(),
                    center.beta + radius * angle.sin(),
                );
                (pt, angle + sweep.signum() * FRAC_PI_2)
            }
        }
    }

    /// Global pose at arc length `s`, restricted to the path's domain.
    pub fn position_heading_at(&self, s: f64) -> Result<Pose, GeometryError> {
        if !(0.0..=self.total_length).contains(&s) {
            return Err(GeometryError::OutOfRange {
                s,
                total: self.total_length,
            });
        }
        Ok(self.pose_extended(s))
    }

    /// Global pose at any arc length, extrapolating outside the path's domain.
    pub fn pose_extended(&self, s: f64) -> Pose {
        let (lp, theta) = self.lane_point_at(s);
        let g = self.approach.to_global(lp);
        Pose {
            x: g.x,
            y: g.y,
            heading: wrap_angle(self.approach.heading + theta),
        }
    }

    /// Arc length and heading (degrees) of a global point on the path.
    pub fn global_arc_length(&self, p: Point) -> Result<(f64, f64), GeometryError> {
        self.arc_length_heading(self.approach.to_lane(p))
    }

    /// Nearest point on the path to `p`: arc length, signed lateral offset
    /// (positive when the path lies to the left of travel direction at that
    /// point, i.e. `p` is to its right) and the global path tangent.
    pub fn project(&self, p: Point) -> (f64, f64, f64) {
        let lp = self.approach.to_lane(p);
        let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
        for piece in &self.pieces {
            let (s, dist_signed, theta) = match *piece {
                Piece::Line {
                    start,
                    direction,
                    length,
                    s0,
                } => {
                    let (sin, cos) = direction.sin_cos();
                    let da = lp.alpha - start.alpha;
                    let db = lp.beta - start.beta;
                    let t = (da * cos + db * sin).clamp(0.0, length);
                    let lateral = -da * sin + db * cos;
                    let along = da * cos + db * sin - t;
                    let signed = if along.abs() < 1e-12 {
                        -lateral
                    } else {
                        -lateral.signum() * along.hypot(lateral)
                    };
                    (s0 + t, signed, direction)
                }
                Piece::Arc {
                    center,
                    radius,
                    start_angle,
                    sweep,
                    s0,
                } => {
                    let ang = (lp.beta - center.beta).atan2(lp.alpha - center.alpha);
                    let mut d = wrap_angle(ang - start_angle) * sweep.signum();
                    d = d.clamp(0.0, sweep.abs());
                    let angle = start_angle + sweep.signum() * d;
                    let on = LanePoint::new(
                        center.alpha + radius * angle.cos(),
                        center.beta + radius * angle.sin(),
                    );
                    let dist = (lp.alpha - on.alpha).hypot(lp.beta - on.beta);
                    let radial = (lp.alpha - center.alpha).hypot(lp.beta - center.beta);
                    // Left turns have the centre on the left: points outside
                    // the circle are to the right of travel.
                    let outside = radial > radius;
                    let path_left = if sweep > 0.0 { outside } else { !outside };
                    let signed = if path_left { dist } else { -dist };
                    (s0 + radius * d, signed, angle + sweep.signum() * FRAC_PI_2)
                }
            };
            if dist_signed.abs() < best.0 {
                best = (dist_signed.abs(), s, dist_signed, theta);
            }
        }
        (best.1, best.2, wrap_angle(self.approach.heading + best.3))
    }
}

fn turn_pieces(l: f64, r: f64, side: f64) -> Vec<Piece> {
    let entry = Piece::Line {
        start: LanePoint::new(0.0, 0.0),
        direction: 0.0,
        length: l,
        s0: 0.0,
    };
    let arc = Piece::Arc {
        center: LanePoint::new(l, side * r),
        radius: r,
        start_angle: -side * FRAC_PI_2,
        sweep: side * FRAC_PI_2,
        s0: l,
    };
    let exit = Piece::Line {
        start: LanePoint::new(l + r, side * r),
        direction: side * FRAC_PI_2,
        length: l,
        s0: l + FRAC_PI_2 * r,
    };
    vec![entry, arc, exit]
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a % (2.0 * PI);
    if x <= -PI {
        x += 2.0 * PI;
    } else if x > PI {
        x -= 2.0 * PI;
    }
    x
}
