use crate::allocator::VehicleId;
use crate::geometry::{ConflictGraph, IntersectionModel, Pose, TrajectoryId, TrajectoryPath, TRAJECTORY_COUNT};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameVehicle {
    pub id: VehicleId,
    pub traj: TrajectoryId,
    /// Front-bumper arc length.
    pub s: f64,
    pub granted: bool,
}

/// Positions of every vehicle at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub vehicles: Vec<FrameVehicle>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Fronts reached a crossing point less than `h` apart.
    Headway { t: f64, first: VehicleId, second: VehicleId, gap_s: f64 },
    /// Bumper gap in a shared lane below `d_min / 2`.
    LaneGap { t: f64, leader: VehicleId, follower: VehicleId, gap_m: f64 },
    /// Front bumper beyond the stop line without the right of way.
    StopLine { t: f64, id: VehicleId },
    /// Footprints overlap.
    Collision { t: f64, a: VehicleId, b: VehicleId },
}

impl Violation {
    pub fn is_collision(&self) -> bool {
        matches!(self, Violation::Collision { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyParams {
    pub headway_s: f64,
    pub min_gap_m: f64,
    pub vehicle_length_m: f64,
    pub vehicle_width_m: f64,
}

#[derive(Debug, Clone, Copy)]
struct EdgeRef {
    edge: usize,
    side: usize,
    s: f64,
}

/// Online checker; feed it frames in time order.
#[derive(Debug, Clone)]
pub struct SafetyMonitor {
    params: SafetyParams,
    stop_line_s: f64,
    paths: Vec<TrajectoryPath>,
    edges: Vec<Vec<EdgeRef>>,
    last_arrival: Vec<[Option<(f64, VehicleId)>; 2]>,
    prev: BTreeMap<VehicleId, (f64, f64)>,
    active_gaps: BTreeSet<(VehicleId, VehicleId)>,
    active_overlaps: BTreeSet<(VehicleId, VehicleId)>,
    stop_flagged: BTreeSet<VehicleId>,
    violations: Vec<Violation>,
}

impl SafetyMonitor {
    pub fn new(model: &IntersectionModel, graph: &ConflictGraph, params: SafetyParams) -> Self {
        let mut edges = vec![Vec::new(); TRAJECTORY_COUNT];
        for (i, e) in graph.crossing_points().iter().enumerate() {
            edges[e.a.index()].push(EdgeRef { edge: i, side: 0, s: e.s_a });
            edges[e.b.index()].push(EdgeRef { edge: i, side: 1, s: e.s_b });
        }
        Self {
            params,
            stop_line_s: model.stop_line_s(),
            paths: model.trajectories(),
            edges,
            last_arrival: vec![[None; 2]; graph.crossing_points().len()],
            prev: BTreeMap::new(),
            active_gaps: BTreeSet::new(),
            active_overlaps: BTreeSet::new(),
            stop_flagged: BTreeSet::new(),
            violations: Vec::new(),
        }
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn collisions(&self) -> usize {
        self.violations.iter().filter(|v| v.is_collision()).count()
    }

    /// Check one frame; returns the violations it raised.
    pub fn observe(&mut self, frame: &Frame) -> &[Violation] {
        let start = self.violations.len();
        self.check_headways(frame);
        self.check_stop_line(frame);
        self.check_lane_gaps(frame);
        self.check_overlaps(frame);
        &self.violations[start..]
    }

    fn check_headways(&mut self, frame: &Frame) {
        let mut seen = BTreeMap::new();
        for v in &frame.vehicles {
            seen.insert(v.id, (frame.t, v.s));
            let Some(&(t0, s0)) = self.prev.get(&v.id) else { continue };
            for e in &self.edges[v.traj.index()] {
                if !(s0 < e.s && v.s >= e.s) {
                    continue;
                }
                let frac = if v.s > s0 { (e.s - s0) / (v.s - s0) } else { 1.0 };
                let t_arr = t0 + frac * (frame.t - t0);
                if let Some((t_other, other)) = self.last_arrival[e.edge][1 - e.side] {
                    let gap = t_arr - t_other;
                    if gap < self.params.headway_s {
                        self.violations.push(Violation::Headway {
                            t: t_arr,
                            first: other,
                            second: v.id,
                            gap_s: gap,
                        });
                    }
                }
                self.last_arrival[e.edge][e.side] = Some((t_arr, v.id));
            }
        }
        self.prev = seen;
    }

    fn check_stop_line(&mut self, frame: &Frame) {
        for v in &frame.vehicles {
            if !v.granted && v.s > self.stop_line_s + 1e-9 && self.stop_flagged.insert(v.id) {
                self.violations.push(Violation::StopLine { t: frame.t, id: v.id });
            }
        }
    }

    fn check_lane_gaps(&mut self, frame: &Frame) {
        let l_v = self.params.vehicle_length_m;
        // Entry lanes 0..4 and exit lanes 4..8, in lane coordinates.
        let mut lanes: Vec<Vec<(f64, VehicleId)>> = vec![Vec::new(); 8];
        for v in &frame.vehicles {
            let path = &self.paths[v.traj.index()];
            if v.s - l_v < self.stop_line_s {
                lanes[usize::from(v.traj.approach() - 1)].push((v.s, v.id));
            }
            let join = path.exit_join_s();
            if v.s >= join {
                lanes[4 + usize::from(v.traj.exit())].push((v.s - join, v.id));
            }
        }
        let mut active = BTreeSet::new();
        for lane in &mut lanes {
            lane.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for w in lane.windows(2) {
                let gap = w[0].0 - l_v - w[1].0;
                if gap < self.params.min_gap_m / 2.0 {
                    let key = (w[0].1, w[1].1);
                    if active.insert(key) && !self.active_gaps.contains(&key) {
                        self.violations.push(Violation::LaneGap {
                            t: frame.t,
                            leader: key.0,
                            follower: key.1,
                            gap_m: gap,
                        });
                    }
                }
            }
        }
        self.active_gaps = active;
    }

    fn check_overlaps(&mut self, frame: &Frame) {
        let half = [self.params.vehicle_length_m / 2.0, self.params.vehicle_width_m / 2.0];
        let reach = 2.0 * half[0].hypot(half[1]);
        let mut boxes: Vec<(Pose, VehicleId)> = frame
            .vehicles
            .iter()
            .map(|v| (footprint(&self.paths[v.traj.index()], v.s, self.params.vehicle_length_m), v.id))
            .collect();
        boxes.sort_by(|a, b| a.0.x.total_cmp(&b.0.x).then(a.1.cmp(&b.1)));
        let mut active = BTreeSet::new();
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                let (a, b) = (&boxes[i], &boxes[j]);
                if b.0.x - a.0.x > reach {
                    break;
                }
                if (b.0.y - a.0.y).abs() > reach || !boxes_overlap(&a.0, &b.0, half) {
                    continue;
                }
                let key = if a.1 < b.1 { (a.1, b.1) } else { (b.1, a.1) };
                if active.insert(key) && !self.active_overlaps.contains(&key) {
                    self.violations.push(Violation::Collision { t: frame.t, a: key.0, b: key.1 });
                }
            }
        }
        self.active_overlaps = active;
    }
}

/// Centre and heading of a body whose front and rear bumper centres both lie
/// on the path, `l` apart in arc length.
pub fn footprint(path: &TrajectoryPath, s: f64, l: f64) -> Pose {
    let front = path.pose_extended(s);
    let rear = path.pose_extended(s - l);
    Pose {
        x: (front.x + rear.x) / 2.0,
        y: (front.y + rear.y) / 2.0,
        heading: (front.y - rear.y).atan2(front.x - rear.x),
    }
}

/// Separating-axis test for two congruent oriented rectangles.
pub fn boxes_overlap(a: &Pose, b: &Pose, half: [f64; 2]) -> bool {
    let axes = |p: &Pose| {
        let (s, c) = p.heading.sin_cos();
        [[c, s], [-s, c]]
    };
    let (ax, bx) = (axes(a), axes(b));
    let d = [b.x - a.x, b.y - a.y];
    let dot = |u: [f64; 2], v: [f64; 2]| u[0] * v[0] + u[1] * v[1];
    for axis in ax.iter().chain(bx.iter()) {
        let ra = half[0] * dot(ax[0], *axis).abs() + half[1] * dot(ax[1], *axis).abs();
        let rb = half[0] * dot(bx[0], *axis).abs() + half[1] * dot(bx[1], *axis).abs();
        if dot(d, *axis).abs() > ra + rb {
            return false;
        }
    }
    true
}

/// Offline check of a recorded frame sequence.
pub fn safety_oracle(
    frames: &[Frame],
    model: &IntersectionModel,
    graph: &ConflictGraph,
    params: SafetyParams,
) -> Vec<Violation> {
    let mut m = SafetyMonitor::new(model, graph, params);
    for f in frames {
        m.observe(f);
    }
    m.violations
}
