//! Fixed-step closed-loop simulation.
//!
//! Each tick spawns due arrivals, runs the ICU policy on cycle boundaries,
//! computes CAV commands on control boundaries (CHVs every tick), integrates
//! the longitudinal kinematics, promotes and removes vehicles, and feeds the
//! safety monitor.

mod driver;
mod metrics;
mod policy;
mod safety;
mod trace;
mod traffic;

pub use driver::{chv_driver, stop_brake, stop_decel, stop_line_brake, DriverParams, Instruction};
pub use metrics::{
    compute_metrics, count_halts, summarize_speed_trace, HaltCounter, MetricsReport, MetricsRow, VehicleSummary,
    HALT_SPEED_MPS, METRICS_HEADER,
};
pub use policy::{fixed_signal_step, policy_step, signal_state, HeadState, SignalState};
pub use safety::{boxes_overlap, footprint, safety_oracle, Frame, FrameVehicle, SafetyMonitor, SafetyParams, Violation};
pub use trace::{
    grant_timeline, mode_sequence, mode_timeline, read_jsonl, write_jsonl, GrantInterval, ModeSegment, TraceEvent,
    VehicleSnapshot,
};
pub use traffic::{spawn_traffic, Arrival, TrafficDemand};

use crate::allocator::{detect_abnormal, AllocatorState, VehicleId, VehicleKind, VehicleSet};
use crate::config::{ConfigError, ScenarioConfig, TraceLevel};
use crate::control::{mpc_command, stanley_steer, LateralState, MpcSetup};
use crate::geometry::{ConflictGraph, IntersectionModel, TrajectoryId, TrajectoryPath, TRAJECTORY_COUNT};
use crate::planner::{reference_for, switch_mode, ConflictPartner, ControlMode, Leader, PlannerInputs, PlannerParams};
use std::collections::{BTreeMap, VecDeque};
use thiserror::Error;

/// Margin kept inside the MPC position-error bound when the initial error is capped.
const ERROR_CAP_MARGIN_M: f64 = 10.0;
/// Waiting-mode overshoot allowance short of the stop line.
const STOP_MARGIN_M: f64 = 0.25;
/// Clearance kept between a held CAV's front and the partner's path.
const CONFLICT_GATE_MARGIN_M: f64 = 0.6;
const HEADWAY_GATE_MARGIN_S: f64 = 0.1;

fn crossing_index(graph: &ConflictGraph) -> (Vec<Vec<f64>>, Vec<Vec<Vec<(f64, usize)>>>) {
    let mut s: Vec<Vec<f64>> = vec![Vec::new(); TRAJECTORY_COUNT];
    for e in graph.crossing_points() {
        s[e.a.index()].push(e.s_a);
        s[e.b.index()].push(e.s_b);
    }
    for v in &mut s {
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    }
    let find = |traj: usize, x: f64| s[traj].iter().position(|&y| (y - x).abs() < 1e-9).expect("indexed");
    let mut pairs = vec![vec![Vec::new(); TRAJECTORY_COUNT]; TRAJECTORY_COUNT];
    for e in graph.crossing_points() {
        let (a, b) = (e.a.index(), e.b.index());
        pairs[a][b].push((e.s_a, find(b, e.s_b)));
        pairs[b][a].push((e.s_b, find(a, e.s_a)));
    }
    (s, pairs)
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("collision between vehicles {a} and {b} at t = {t:.2} s")]
    CollisionDetected { t: f64, a: VehicleId, b: VehicleId },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Kinematic and bookkeeping state of one vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct SimVehicle {
    pub id: VehicleId,
    pub kind: VehicleKind,
    pub traj: TrajectoryId,
    pub s: f64,
    pub v: f64,
    pub a: f64,
    pub spawn_t: f64,
    pub spawn_s: f64,
    pub granted: bool,
    pub promoted: bool,
    pub mode: Option<ControlMode>,
    /// Conflict partner `I_c` assigned at grant time.
    pub partner: Option<VehicleId>,
    /// When the partner's front reached the shared conflict point.
    partner_passed_t: Option<f64>,
    pub abnormal: bool,
    stop_cross_t: Option<f64>,
    /// When the front passed each of the trajectory's crossing points.
    crossed_t: Vec<Option<f64>>,
    halts: HaltCounter,
}

/// Result of [`Simulation::run`].
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub report: MetricsReport,
    pub vehicles: Vec<VehicleSummary>,
    pub trace: Vec<TraceEvent>,
    pub violations: Vec<Violation>,
    pub collision: Option<(f64, VehicleId, VehicleId)>,
    pub end_t: f64,
    /// Share of CAVs among spawned vehicles.
    pub cav_share: f64,
    /// Every tick's frame, when recording was enabled.
    pub frames: Vec<Frame>,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    model: IntersectionModel,
    graph: ConflictGraph,
    paths: Vec<TrajectoryPath>,
    last_conflict_s: [f64; TRAJECTORY_COUNT],
    /// Distinct crossing-point positions along each trajectory, ascending.
    crossing_s: Vec<Vec<f64>>,
    /// `[ego][other]`: ego-frame position of each shared crossing point and
    /// its index in `crossing_s[other]`.
    crossing_pairs: Vec<Vec<Vec<(f64, usize)>>>,
    depart_s: [f64; TRAJECTORY_COUNT],
    alloc: AllocatorState,
    vehicles: BTreeMap<VehicleId, SimVehicle>,
    arrivals: VecDeque<Arrival>,
    pending: [VecDeque<Arrival>; 4],
    next_id: u32,
    tick: u64,
    cycle: u64,
    ticks_per_control: u64,
    ticks_per_cycle: u64,
    ticks_per_snapshot: u64,
    planner: PlannerParams,
    driver: DriverParams,
    v_tar: f64,
    monitor: SafetyMonitor,
    trace: Vec<TraceEvent>,
    summaries: Vec<VehicleSummary>,
    collision: Option<(f64, VehicleId, VehicleId)>,
    spawned: usize,
    spawned_cav: usize,
    record_frames: bool,
    frames: Vec<Frame>,
}

fn ticks(period: f64, dt: f64) -> u64 {
    ((period / dt).round() as u64).max(1)
}

impl Simulation {
    /// World for a scenario; random demand is drawn from `run.seed`.
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, SimError> {
        let arrivals = match &cfg.demand {
            Some(d) => spawn_traffic(&TrafficDemand {
                flow_pcuh: d.flow_pcuh,
                penetration: d.penetration,
                mix: match &d.movement_mix {
                    Some(m) => std::array::from_fn(|i| m[i]),
                    None => TrafficDemand::default_mix(),
                },
                duration_s: cfg.run.duration_s,
                seed: cfg.run.seed,
            }),
            None => Vec::new(),
        };
        Self::with_arrivals(cfg, arrivals)
    }

    /// World with an explicit arrival schedule in addition to any
    /// `[[vehicles]]` of the scenario.
    pub fn with_arrivals(cfg: &ScenarioConfig, arrivals: Vec<Arrival>) -> Result<Self, SimError> {
        cfg.validate()?;
        let model = cfg.model()?;
        let graph = model.compute_conflict_graph();
        let paths = model.trajectories();
        let l = model.stop_line_s();
        let last_conflict_s = std::array::from_fn(|i| graph.last_conflict_s(paths[i].id()).unwrap_or(l));
        let depart_s = std::array::from_fn(|i| paths[i].exit_join_s() + l);
        let (crossing_s, crossing_pairs) = crossing_index(&graph);
        let planner = PlannerParams {
            vehicle_length_m: cfg.vehicle.length_m,
            ..cfg.planner
        };
        let v_tar = planner.target_speed_mps.unwrap_or(cfg.geometry.v_limit_mps);
        let driver = DriverParams {
            min_gap_m: planner.min_gap_m,
            headway_s: planner.headway_s,
            vehicle_length_m: cfg.vehicle.length_m,
            stop_offset_m: planner.stop_offset_m,
            target_speed_mps: v_tar,
            accel_max_mps2: cfg.vehicle.chv_accel_max_mps2,
            comfort_decel_mps2: cfg.geometry.comfort_decel_mps2,
            emergency_decel_mps2: cfg.vehicle.emergency_decel_mps2,
        };
        let monitor = SafetyMonitor::new(
            &model,
            &graph,
            SafetyParams {
                headway_s: cfg.allocator.headway_s,
                min_gap_m: planner.min_gap_m,
                vehicle_length_m: cfg.vehicle.length_m,
                vehicle_width_m: cfg.vehicle.width_m,
            },
        );
        let dt = cfg.run.dt_s;
        let flow = cfg.demand.as_ref().map_or(0.0, |d| d.flow_pcuh);
        let mut sim = Self {
            model,
            graph,
            paths,
            last_conflict_s,
            crossing_s,
            crossing_pairs,
            depart_s,
            alloc: AllocatorState::new(),
            vehicles: BTreeMap::new(),
            arrivals: arrivals.into(),
            pending: Default::default(),
            next_id: 1,
            tick: 0,
            cycle: 0,
            ticks_per_control: ticks(cfg.control.mpc.period_s, dt),
            ticks_per_cycle: ticks(cfg.allocator.cycle_for_flow(flow), dt),
            ticks_per_snapshot: ticks(cfg.run.snapshot_every_s, dt),
            planner,
            driver,
            v_tar,
            monitor,
            trace: Vec::new(),
            summaries: Vec::new(),
            collision: None,
            spawned: 0,
            spawned_cav: 0,
            record_frames: false,
            frames: Vec::new(),
            cfg: cfg.clone(),
        };
        let placed = sim.cfg.placed_vehicles(&sim.model)?;
        for p in placed {
            sim.insert_vehicle(VehicleId(p.id), p.kind, p.traj, p.s, p.v);
        }
        sim.next_id = sim.vehicles.keys().map(|id| id.0 + 1).max().unwrap_or(1);
        Ok(sim)
    }

    /// Keep every tick's frame for an offline safety check.
    pub fn record_frames(&mut self, on: bool) {
        self.record_frames = on;
    }

    pub fn t(&self) -> f64 {
        self.tick as f64 * self.cfg.run.dt_s
    }

    pub fn vehicles(&self) -> impl Iterator<Item = &SimVehicle> {
        self.vehicles.values()
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<&SimVehicle> {
        self.vehicles.get(&id)
    }

    pub fn allocator(&self) -> &AllocatorState {
        &self.alloc
    }

    pub fn model(&self) -> &IntersectionModel {
        &self.model
    }

    pub fn graph(&self) -> &ConflictGraph {
        &self.graph
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn violations(&self) -> &[Violation] {
        self.monitor.violations()
    }

    fn level(&self) -> TraceLevel {
        self.cfg.run.trace
    }

    fn push(&mut self, e: TraceEvent) {
        if self.level() != TraceLevel::Off {
            self.trace.push(e);
        }
    }

    fn insert_vehicle(&mut self, id: VehicleId, kind: VehicleKind, traj: TrajectoryId, s: f64, v: f64) {
        let t = self.t();
        self.alloc.register(id, kind, traj, t).expect("fresh vehicle id");
        self.vehicles.insert(
            id,
            SimVehicle {
                id,
                kind,
                traj,
                s,
                v,
                a: 0.0,
                spawn_t: t,
                spawn_s: s,
                granted: false,
                promoted: false,
                mode: None,
                partner: None,
                partner_passed_t: None,
                abnormal: false,
                stop_cross_t: None,
                crossed_t: vec![None; self.crossing_s[traj.index()].len()],
                halts: {
                    let mut h = HaltCounter::default();
                    h.observe(v);
                    h
                },
            },
        );
        self.spawned += 1;
        if kind == VehicleKind::Cav {
            self.spawned_cav += 1;
        }
        self.push(TraceEvent::Spawn { t, id, kind, traj, s, v });
    }

    fn spawn_due(&mut self) {
        let t = self.t();
        while self.arrivals.front().is_some_and(|a| a.t <= t) {
            let a = self.arrivals.pop_front().expect("checked");
            self.pending[usize::from(a.traj.approach() - 1)].push_back(a);
        }
        let spawn_s = -self.model.lead_in();
        let l_v = self.cfg.vehicle.length_m;
        let d_min = self.planner.min_gap_m;
        for lane in 1..=4u8 {
            let Some(a) = self.pending[usize::from(lane - 1)].front().copied() else { continue };
            let rear = self
                .vehicles
                .values()
                .filter(|v| v.traj.approach() == lane)
                .map(|v| v.s)
                .reduce(f64::min);
            let speed = self.cfg.demand.as_ref().map_or(0.0, |d| d.spawn_speed_mps);
            let v0 = match rear {
                Some(r) if r - spawn_s < d_min + l_v => continue,
                Some(r) => speed.min(((r - l_v - spawn_s) - d_min).max(0.0) / self.planner.headway_s),
                None => speed,
            };
            self.pending[usize::from(lane - 1)].pop_front();
            let id = VehicleId(self.next_id);
            self.next_id += 1;
            self.insert_vehicle(id, a.kind, a.traj, spawn_s, v0);
        }
    }

    fn icu_cycle(&mut self) {
        let t = self.t();
        let p = *self.model.params();
        let sigma = self.cfg.allocator.sigma_s;
        let held: Vec<(VehicleId, f64)> = self
            .alloc
            .s2()
            .filter_map(|r| {
                let v = &self.vehicles[&r.id];
                let tc = v.stop_cross_t?;
                (!v.abnormal && detect_abnormal(t - tc, p.entry_length_m, p.v_limit_mps, sigma)).then_some((r.id, t - tc))
            })
            .collect();
        for (id, held_s) in held {
            self.vehicles.get_mut(&id).expect("live").abnormal = true;
            if self.cfg.allocator.abnormal_handling {
                self.alloc.handle_abnormal(id).expect("registered");
            }
            self.push(TraceEvent::Abnormal { t, id, held_s });
        }

        let l = self.model.stop_line_s();
        let vehicles = &self.vehicles;
        let decisions = policy_step(
            self.cfg.run.algorithm,
            &self.alloc,
            &self.graph,
            t,
            &self.cfg.signal,
            |id| {
                let v = &vehicles[&id];
                HeadState {
                    distance_to_line_m: l - v.s,
                    v: v.v,
                }
            },
        );
        for d in decisions {
            if let Some(id) = d.granted {
                self.alloc.apply_grant(id, t).expect("queue head");
                let v = self.vehicles.get_mut(&id).expect("live");
                v.granted = true;
                v.partner = if v.kind == VehicleKind::Cav { d.conflict } else { None };
            }
            if !d.candidates.is_empty() {
                self.push(TraceEvent::Decision {
                    cycle: self.cycle,
                    t,
                    candidates: d.candidates,
                    granted: d.granted,
                    conflict: d.conflict,
                });
            }
        }
        self.cycle += 1;
    }

    /// Maps vehicle `other` into the frame of `ego` if it leads `ego` in a
    /// shared lane.
    fn lead_position(&self, ego: &SimVehicle, other: &SimVehicle) -> Option<f64> {
        let l = self.model.stop_line_s();
        let l_v = self.cfg.vehicle.length_m;
        let same_approach = ego.traj.approach() == other.traj.approach();
        let s = if same_approach {
            if !ego.granted {
                (other.s - l_v < l).then_some(other.s)?
            } else if ego.traj == other.traj {
                other.s
            } else {
                let diverged = l + 2.0 * self.cfg.geometry.lane_width_m;
                (other.s - l_v < diverged).then_some(other.s)?
            }
        } else if ego.granted && ego.traj.exit() == other.traj.exit() {
            let join_other = self.paths[other.traj.index()].exit_join_s();
            if other.s < join_other {
                return None;
            }
            self.paths[ego.traj.index()].exit_join_s() + (other.s - join_other)
        } else {
            return None;
        };
        (s > ego.s).then_some(s)
    }

    /// Nearest leader in a shared lane. The conflict partner is handled by the
    /// conflict law until it is released, so it is never a leader as well.
    fn leader_for(&self, ego: &SimVehicle) -> Option<Leader> {
        self.vehicles
            .values()
            .filter(|o| o.id != ego.id && Some(o.id) != ego.partner)
            .filter_map(|o| self.lead_position(ego, o).map(|s| (s, o)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id)))
            .map(|(s, o)| Leader { id: o.id, s, v: o.v, a: o.a })
    }

    fn partner_for(&self, ego: &SimVehicle) -> Option<ConflictPartner> {
        let p = self.vehicles.get(&ego.partner?)?;
        let c = self.graph.conflict(ego.traj, p.traj)?;
        Some(ConflictPartner {
            id: p.id,
            kind: p.kind,
            s_p: c.s_ego,
            s_p_other: c.s_other,
            s_other: p.s,
            v: p.v,
            a: p.a,
        })
    }

    /// Release `I_c` once the partner has cleared the conflict point by a
    /// footprint and its front passed the point at least `H` ago, or once it
    /// has left S2.
    fn refresh_partners(&mut self) {
        let t = self.t();
        let clear = self.cfg.vehicle.length_m + self.cfg.vehicle.width_m;
        let mut updates = Vec::new();
        for v in self.vehicles.values() {
            let Some(pid) = v.partner else { continue };
            let conflict = self.vehicles.get(&pid).and_then(|p| {
                (!p.promoted).then_some(p).zip(self.graph.conflict(v.traj, p.traj))
            });
            let Some((p, c)) = conflict else {
                updates.push((v.id, None, None));
                continue;
            };
            let passed = v.partner_passed_t.or((p.s >= c.s_other).then_some(t));
            let h = self.cfg.allocator.conflict_headway(p.kind);
            let released = passed.is_some_and(|tp| t - tp >= h) && p.s >= c.s_other + clear;
            if released {
                updates.push((v.id, None, None));
            } else if passed != v.partner_passed_t {
                updates.push((v.id, Some(pid), passed));
            }
        }
        for (id, partner, passed) in updates {
            let v = self.vehicles.get_mut(&id).expect("live");
            v.partner = partner;
            v.partner_passed_t = passed;
        }
    }

    /// Braking that keeps a CAV able to stop short of the point it shares with
    /// its unreleased partner.
    fn conflict_brake(&self, v: &SimVehicle) -> Option<f64> {
        let p = self.vehicles.get(&v.partner?)?;
        let c = self.graph.conflict(v.traj, p.traj)?;
        let gate = c.s_ego - self.cfg.vehicle.width_m / 2.0 - CONFLICT_GATE_MARGIN_M;
        if v.s > gate {
            return None;
        }
        stop_brake(gate - v.s, v.v, &self.driver)
    }

    /// Braking that keeps a granted vehicle from reaching a crossing point
    /// less than `h` after another vehicle's front passed it.
    fn headway_brake(&self, v: &SimVehicle) -> Option<f64> {
        let t = self.t();
        let h = self.cfg.allocator.headway_s + HEADWAY_GATE_MARGIN_S;
        let mut brake: Option<f64> = None;
        for o in self.vehicles.values() {
            if o.id == v.id {
                continue;
            }
            for &(s_p, k) in &self.crossing_pairs[v.traj.index()][o.traj.index()] {
                let Some(tp) = o.crossed_t[k] else { continue };
                let wait = tp + h - t;
                let gate = s_p - CONFLICT_GATE_MARGIN_M;
                if wait <= 0.0 || v.s >= gate || v.s + v.v * wait < gate {
                    continue;
                }
                if let Some(b) = stop_brake(gate - v.s, v.v, &self.driver) {
                    brake = Some(brake.map_or(b, |x| x.min(b)));
                }
            }
        }
        brake
    }

    fn cav_command(&self, v: &SimVehicle, full: bool) -> (ControlMode, TraceEvent, f64) {
        let l = self.model.stop_line_s();
        let conflict = self.partner_for(v);
        let inp = PlannerInputs {
            granted: v.granted,
            conflict,
            leader: self.leader_for(v),
            s: v.s,
            v: v.v,
            stop_line_s: l,
            v_tar: self.v_tar,
            conflict_headway_s: self
                .cfg
                .allocator
                .conflict_headway(conflict.map_or(VehicleKind::Cav, |c| c.kind)),
        };
        let mode = switch_mode(&inp, &self.planner);
        let r = reference_for(mode, &inp, &self.planner).expect("mode has its neighbour");
        let mpc = &self.cfg.control.mpc;
        let mut setup = MpcSetup::new(mpc, r.headway).expect("validated with the scenario");
        if mode == ControlMode::Waiting {
            setup.x_min[0] = setup.x_min[0].max(-(self.planner.stop_offset_m - STOP_MARGIN_M));
        }
        let e_s = (r.s_ref - v.s).clamp(
            mpc.state_min[0] + ERROR_CAP_MARGIN_M,
            mpc.state_max[0] - ERROR_CAP_MARGIN_M,
        );
        let cmd = mpc_command([e_s, r.v_ref - v.v], &setup, &[r.omega], v.a);
        let mut accel = cmd.accel;
        let guard = if v.granted {
            match (self.conflict_brake(v), self.headway_brake(v)) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            }
        } else {
            stop_line_brake(v.s, v.v, l, &self.driver)
        };
        if let Some(b) = guard {
            accel = accel.min(b);
        }
        accel = accel.clamp(mpc.accel_min_mps2, mpc.accel_max_mps2);
        let steer = if full {
            let pose = self.paths[v.traj.index()].pose_extended(v.s);
            let state = LateralState {
                x: pose.x,
                y: pose.y,
                heading: pose.heading,
                v: v.v,
            };
            stanley_steer(&state, &self.paths[v.traj.index()], &self.cfg.control.stanley).delta
        } else {
            0.0
        };
        let event = TraceEvent::Control {
            t: self.t(),
            id: v.id,
            mode,
            s_ref: r.s_ref,
            v_ref: r.v_ref,
            accel,
            fallback: cmd.fallback,
            soft: cmd.soft,
            steer,
        };
        (mode, event, accel)
    }

    fn chv_command(&self, v: &SimVehicle) -> f64 {
        let instruction = if v.granted {
            Instruction::Proceed
        } else {
            Instruction::StopAtLine
        };
        let a = chv_driver(instruction, v.s, v.v, self.model.stop_line_s(), self.leader_for(v), &self.driver);
        match v.granted.then(|| self.headway_brake(v)).flatten() {
            Some(b) => a.min(b),
            None => a,
        }
    }

    fn control(&mut self) {
        self.refresh_partners();
        let control_tick = self.tick.is_multiple_of(self.ticks_per_control);
        let full = self.level() == TraceLevel::Full;
        let mut updates = Vec::with_capacity(self.vehicles.len());
        for v in self.vehicles.values() {
            match v.kind {
                VehicleKind::Cav if control_tick => {
                    let (mode, event, a) = self.cav_command(v, full);
                    updates.push((v.id, a, Some((mode, event))));
                }
                VehicleKind::Cav => {}
                VehicleKind::Chv => updates.push((v.id, self.chv_command(v), None)),
            }
        }
        let t = self.t();
        for (id, a, mode) in updates {
            let v = self.vehicles.get_mut(&id).expect("live");
            v.a = a;
            let Some((mode, event)) = mode else { continue };
            let from = v.mode;
            v.mode = Some(mode);
            if from != Some(mode) {
                self.push(TraceEvent::Mode { t, id, from, to: mode });
            }
            if full {
                self.push(event);
            }
        }
    }

    fn integrate(&mut self) {
        let dt = self.cfg.run.dt_s;
        let t_next = (self.tick + 1) as f64 * dt;
        let v_max = self.cfg.geometry.v_limit_mps;
        let l = self.model.stop_line_s();
        for v in self.vehicles.values_mut() {
            let s0 = v.s;
            v.v = (v.v + v.a * dt).clamp(0.0, v_max);
            v.s += v.v * dt;
            v.halts.observe(v.v);
            if s0 < l && v.s >= l {
                v.stop_cross_t = Some(t_next);
            }
            for (k, &sp) in self.crossing_s[v.traj.index()].iter().enumerate() {
                if s0 < sp && v.s >= sp {
                    v.crossed_t[k] = Some(t_next - dt * (v.s - sp) / (v.s - s0));
                }
            }
        }
    }

    fn promote_and_depart(&mut self) {
        let t = (self.tick + 1) as f64 * self.cfg.run.dt_s;
        let l_v = self.cfg.vehicle.length_m;
        let mut promote = Vec::new();
        let mut depart = Vec::new();
        for v in self.vehicles.values() {
            if v.s >= self.depart_s[v.traj.index()] {
                depart.push(v.id);
            } else if v.granted
                && !v.promoted
                && v.s - l_v > self.last_conflict_s[v.traj.index()]
            {
                promote.push(v.id);
            }
        }
        for id in promote {
            self.alloc.promote_to_s1(id).expect("granted vehicle");
            self.vehicles.get_mut(&id).expect("live").promoted = true;
            self.push(TraceEvent::Promote { t, id });
        }
        for id in depart {
            let v = self.vehicles.remove(&id).expect("live");
            self.alloc.depart(id).expect("registered");
            self.summaries.push(VehicleSummary {
                id,
                kind: v.kind,
                traj: v.traj,
                spawn_t: v.spawn_t,
                exit_t: Some(t),
                distance_m: v.s - v.spawn_s,
                halts: v.halts.count(),
            });
            self.push(TraceEvent::Depart { t, id });
        }
    }

    fn frame(&self) -> Frame {
        Frame {
            t: (self.tick + 1) as f64 * self.cfg.run.dt_s,
            vehicles: self
                .vehicles
                .values()
                .map(|v| FrameVehicle {
                    id: v.id,
                    traj: v.traj,
                    s: v.s,
                    granted: v.granted,
                })
                .collect(),
        }
    }

    fn snapshot(&self, t: f64) -> TraceEvent {
        let vehicles = self
            .vehicles
            .values()
            .map(|v| {
                let pose = self.paths[v.traj.index()].pose_extended(v.s);
                VehicleSnapshot {
                    id: v.id,
                    kind: v.kind,
                    traj: v.traj,
                    set: self.alloc.get(v.id).map_or(VehicleSet::S1, |r| r.set),
                    s: v.s,
                    v: v.v,
                    a: v.a,
                    x: pose.x,
                    y: pose.y,
                    heading: pose.heading,
                }
            })
            .collect();
        TraceEvent::Snapshot { t, vehicles }
    }

    /// Advance one tick.
    pub fn step(&mut self) -> Result<(), SimError> {
        self.spawn_due();
        if self.tick.is_multiple_of(self.ticks_per_cycle) {
            self.icu_cycle();
        }
        self.control();
        self.integrate();
        self.promote_and_depart();
        let frame = self.frame();
        let collision = self.monitor.observe(&frame).iter().find_map(|v| match *v {
            Violation::Collision { t, a, b } => Some((t, a, b)),
            _ => None,
        });
        if self.record_frames {
            self.frames.push(frame);
        }
        self.tick += 1;
        let t = self.t();
        if self.level() == TraceLevel::Full && self.tick.is_multiple_of(self.ticks_per_snapshot) {
            let snap = self.snapshot(t);
            self.trace.push(snap);
        }
        debug_assert!(self.alloc.check_invariants().is_ok());
        if let Some((t, a, b)) = collision {
            self.collision = Some((t, a, b));
            if self.level() != TraceLevel::Off {
                let snap = self.snapshot(t);
                self.trace.push(snap);
            }
            return Err(SimError::CollisionDetected { t, a, b });
        }
        Ok(())
    }

    /// Nothing left to spawn or simulate.
    pub fn is_idle(&self) -> bool {
        self.vehicles.is_empty() && self.arrivals.is_empty() && self.pending.iter().all(VecDeque::is_empty)
    }

    /// Run until the world empties after the arrival window, the drain time
    /// runs out, a collision halts the run or departures stall (a deadlock).
    pub fn run(mut self) -> SimOutcome {
        let duration = self.cfg.run.duration_s;
        let limit = duration + self.cfg.run.drain_s;
        let mut last_progress = 0.0;
        let mut departed = self.summaries.len();
        let mut deadlock = false;
        loop {
            let t = self.t();
            if (t >= duration || self.cfg.demand.is_none()) && self.is_idle() {
                break;
            }
            if t >= limit - 1e-9 {
                break;
            }
            if self.vehicles.is_empty() || self.summaries.len() != departed {
                departed = self.summaries.len();
                last_progress = t;
            } else if t - last_progress >= self.cfg.run.stall_s {
                deadlock = true;
                break;
            }
            if self.step().is_err() {
                break;
            }
        }
        self.finish(deadlock)
    }

    fn finish(mut self, deadlock: bool) -> SimOutcome {
        for v in self.vehicles.values() {
            self.summaries.push(VehicleSummary {
                id: v.id,
                kind: v.kind,
                traj: v.traj,
                spawn_t: v.spawn_t,
                exit_t: None,
                distance_m: v.s - v.spawn_s,
                halts: v.halts.count(),
            });
        }
        self.summaries.sort_by_key(|s| s.id);
        let window = if self.cfg.demand.is_some() {
            self.cfg.run.duration_s
        } else {
            f64::INFINITY
        };
        let mut report = compute_metrics(&self.summaries, window);
        report.collisions = self.monitor.collisions();
        report.deadlock = deadlock;
        SimOutcome {
            report,
            vehicles: self.summaries,
            trace: self.trace,
            violations: self.monitor.violations().to_vec(),
            collision: self.collision,
            end_t: self.tick as f64 * self.cfg.run.dt_s,
            cav_share: if self.spawned == 0 {
                0.0
            } else {
                self.spawned_cav as f64 / self.spawned as f64
            },
            frames: self.frames,
        }
    }
}
