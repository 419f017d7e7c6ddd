use super::path::{wrap_angle, Piece};
use super::{IntersectionModel, Point, TrajectoryId, TrajectoryPath, TRAJECTORY_COUNT};
use serde::Serialize;

const HIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictKind {
    Crossing,
    Merging,
}

/// Conflict between an ego trajectory and a partner, seen from the ego.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConflictPoint {
    pub kind: ConflictKind,
    /// Arc length of the point on the ego trajectory.
    pub s_ego: f64,
    /// Arc length of the point on the partner trajectory.
    pub s_other: f64,
    pub point: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingEdge {
    pub a: TrajectoryId,
    pub b: TrajectoryId,
    pub s_a: f64,
    pub s_b: f64,
    pub point: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MergePair {
    pub a: TrajectoryId,
    pub b: TrajectoryId,
    pub s_a: f64,
    pub s_b: f64,
    pub point: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConflictGraph {
    crossing: Vec<CrossingEdge>,
    points: Vec<CrossingEdge>,
    merging: Vec<MergePair>,
    table: [[Option<ConflictPoint>; TRAJECTORY_COUNT]; TRAJECTORY_COUNT],
}

impl ConflictGraph {
    pub fn compute(model: &IntersectionModel) -> Self {
        let paths = model.trajectories();
        let mut crossing = Vec::new();
        let mut points = Vec::new();
        let mut merging = Vec::new();
        let mut table = [[None; TRAJECTORY_COUNT]; TRAJECTORY_COUNT];
        for (i, pa) in paths.iter().enumerate() {
            for pb in &paths[i + 1..] {
                let (a, b) = (pa.id(), pb.id());
                if a.approach() == b.approach() {
                    continue;
                }
                // Conflict points as seen from a and from b.
                let (kind, from_a, from_b) = if a.exit() == b.exit() {
                    let s_a = pa.exit_join_s();
                    let s_b = pb.exit_join_s();
                    let point = pa.pose_extended(s_a).point();
                    merging.push(MergePair { a, b, s_a, s_b, point });
                    (ConflictKind::Merging, (s_a, s_b, point), (s_a, s_b, point))
                } else {
                    let hits = crossings(pa, pb);
                    let Some(&first_a) = hits.iter().min_by(|x, y| x.0.total_cmp(&y.0)) else { continue };
                    let first_b = *hits.iter().min_by(|x, y| x.1.total_cmp(&y.1)).expect("non-empty");
                    crossing.push(CrossingEdge { a, b, s_a: first_a.0, s_b: first_a.1, point: first_a.2 });
                    points.extend(hits.iter().map(|&(s_a, s_b, point)| CrossingEdge { a, b, s_a, s_b, point }));
                    (ConflictKind::Crossing, first_a, first_b)
                };
                table[a.index()][b.index()] = Some(ConflictPoint {
                    kind,
                    s_ego: from_a.0,
                    s_other: from_a.1,
                    point: from_a.2,
                });
                table[b.index()][a.index()] = Some(ConflictPoint {
                    kind,
                    s_ego: from_b.1,
                    s_other: from_b.0,
                    point: from_b.2,
                });
            }
        }
        Self {
            crossing,
            points,
            merging,
            table,
        }
    }

    /// One edge per crossing pair, at the first intersection along `a`.
    pub fn crossing_edges(&self) -> &[CrossingEdge] {
        &self.crossing
    }

    /// Every centreline intersection; pairs whose paths cross twice appear twice.
    pub fn crossing_points(&self) -> &[CrossingEdge] {
        &self.points
    }

    pub fn merging_pairs(&self) -> &[MergePair] {
        &self.merging
    }

    /// Conflict of `ego` against `other`, if any, with arc positions from the
    /// ego's point of view. For paths that cross twice this is the
    /// intersection the ego reaches first.
    pub fn conflict(&self, ego: TrajectoryId, other: TrajectoryId) -> Option<ConflictPoint> {
        self.table[ego.index()][other.index()]
    }

    /// Whether the trajectories conflict by crossing or merging.
    pub fn conflicts(&self, a: TrajectoryId, b: TrajectoryId) -> bool {
        self.table[a.index()][b.index()].is_some()
    }

    /// Largest conflict-point arc length on `traj`, over all crossing points
    /// and merges.
    pub fn last_conflict_s(&self, traj: TrajectoryId) -> Option<f64> {
        let merges = self.merging.iter().filter_map(|m| {
            (m.a == traj).then_some(m.s_a).or((m.b == traj).then_some(m.s_b))
        });
        let crossings = self.points.iter().filter_map(|e| {
            (e.a == traj).then_some(e.s_a).or((e.b == traj).then_some(e.s_b))
        });
        merges.chain(crossings).reduce(f64::max)
    }

    /// Crossing edges as sorted `(min, max)` id pairs.
    pub fn crossing_pairs(&self) -> Vec<(u8, u8)> {
        let mut v: Vec<_> = self
            .crossing
            .iter()
            .map(|e| (e.a.raw().min(e.b.raw()), e.a.raw().max(e.b.raw())))
            .collect();
        v.sort_unstable();
        v
    }
}

/// Piece of a path mapped into the global frame.
#[derive(Debug, Clone, Copy)]
enum Global {
    Line {
        p0: Point,
        dir: Point,
        len: f64,
        s0: f64,
    },
    Arc {
        c: Point,
        r: f64,
        a0: f64,
        sweep: f64,
        s0: f64,
    },
}

fn globalise(path: &TrajectoryPath) -> Vec<Global> {
    let ap = path.approach();
    path.pieces()
        .iter()
        .map(|pc| match *pc {
            Piece::Line {
                start,
                direction,
                length,
                s0,
            } => {
                let (sin, cos) = (ap.heading + direction).sin_cos();
                Global::Line {
                    p0: ap.to_global(start),
                    dir: Point::new(cos, sin),
                    len: length,
                    s0,
                }
            }
            Piece::Arc {
                center,
                radius,
                start_angle,
                sweep,
                s0,
            } => Global::Arc {
                c: ap.to_global(center),
                r: radius,
                a0: start_angle + ap.heading,
                sweep,
                s0,
            },
        })
        .collect()
}

fn on_segment(t: f64, len: f64) -> bool {
    (-HIT_TOL..=len + HIT_TOL).contains(&t)
}

fn arc_param(c: Point, r: f64, a0: f64, sweep: f64, p: Point) -> Option<f64> {
    let ang = (p.y - c.y).atan2(p.x - c.x);
    let d = wrap_angle(ang - a0) * sweep.signum();
    // Sweeps are at most a quarter turn, so wrapping cannot alias.
    (d >= -HIT_TOL && d <= sweep.abs() + HIT_TOL).then(|| r * d.clamp(0.0, sweep.abs()))
}

fn line_circle(p0: Point, dir: Point, c: Point, r: f64) -> Vec<f64> {
    let w = Point::new(p0.x - c.x, p0.y - c.y);
    let b = dir.x * w.x + dir.y * w.y;
    let cc = w.x * w.x + w.y * w.y - r * r;
    let disc = b * b - cc;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    vec![-b - sq, -b + sq]
}

fn circle_circle(c1: Point, r1: f64, c2: Point, r2: f64) -> Vec<Point> {
    let d = c1.distance(c2);
    if d < 1e-12 || d > r1 + r2 || d < (r1 - r2).abs() {
        return Vec::new();
    }
    let a = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d);
    let h = (r1 * r1 - a * a).max(0.0).sqrt();
    let ex = Point::new((c2.x - c1.x) / d, (c2.y - c1.y) / d);
    let m = Point::new(c1.x + a * ex.x, c1.y + a * ex.y);
    vec![
        Point::new(m.x - h * ex.y, m.y + h * ex.x),
        Point::new(m.x + h * ex.y, m.y - h * ex.x),
    ]
}

/// All intersections of two global pieces as `(s_a, s_b, point)`.
fn intersect(a: Global, b: Global) -> Vec<(f64, f64, Point)> {
    match (a, b) {
        (
            Global::Line {
                p0,
                dir,
                len,
                s0,
            },
            Global::Line {
                p0: q0,
                dir: e,
                len: len_b,
                s0: s0_b,
            },
        ) => {
            let det = dir.x * (-e.y) - dir.y * (-e.x);
            if det.abs() < 1e-12 {
                return Vec::new();
            }
            let rx = q0.x - p0.x;
            let ry = q0.y - p0.y;
            let t = (rx * (-e.y) - ry * (-e.x)) / det;
            let u = (dir.x * ry - dir.y * rx) / det;
            if on_segment(t, len) && on_segment(u, len_b) {
                let pt = Point::new(p0.x + t * dir.x, p0.y + t * dir.y);
                vec![(s0 + t.clamp(0.0, len), s0_b + u.clamp(0.0, len_b), pt)]
            } else {
                Vec::new()
            }
        }
        (
            Global::Line { p0, dir, len, s0 },
            Global::Arc {
                c,
                r,
                a0,
                sweep,
                s0: s0_b,
            },
        ) => line_circle(p0, dir, c, r)
            .into_iter()
            .filter(|&t| on_segment(t, len))
            .filter_map(|t| {
                let pt = Point::new(p0.x + t * dir.x, p0.y + t * dir.y);
                arc_param(c, r, a0, sweep, pt).map(|u| (s0 + t.clamp(0.0, len), s0_b + u, pt))
            })
            .collect(),
        (Global::Arc { .. }, Global::Line { .. }) => intersect(b, a)
            .into_iter()
            .map(|(sb, sa, p)| (sa, sb, p))
            .collect(),
        (
            Global::Arc {
                c,
                r,
                a0,
                sweep,
                s0,
            },
            Global::Arc {
                c: c2,
                r: r2,
                a0: a2,
                sweep: sw2,
                s0: s0_b,
            },
        ) => circle_circle(c, r, c2, r2)
            .into_iter()
            .filter_map(|pt| {
                let u = arc_param(c, r, a0, sweep, pt)?;
                let w = arc_param(c2, r2, a2, sw2, pt)?;
                Some((s0 + u, s0_b + w, pt))
            })
            .collect(),
    }
}

/// Distinct centreline intersections of two paths as `(s_a, s_b, point)`.
fn crossings(a: &TrajectoryPath, b: &TrajectoryPath) -> Vec<(f64, f64, Point)> {
    let ga = globalise(a);
    let gb = globalise(b);
    let mut hits: Vec<(f64, f64, Point)> = Vec::new();
    for hit in ga.iter().flat_map(|&pa| gb.iter().flat_map(move |&pb| intersect(pa, pb))) {
        // Hits at a joint between pieces are reported by both pieces.
        if !hits.iter().any(|h| h.2.distance(hit.2) < 1e-6) {
            hits.push(hit);
        }
    }
    hits.sort_by(|x, y| x.0.total_cmp(&y.0));
    hits
}
