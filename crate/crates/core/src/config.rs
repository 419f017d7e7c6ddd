//! Scenario files: TOML with unit-suffixed keys.
//!
//! A scenario carries either a `[demand]` block (random traffic) or a list of
//! `[[vehicles]]` (explicit initial conditions), never both.

use crate::allocator::{AllocatorParams, VehicleKind};
use crate::control::{MpcParams, StanleyParams};
use crate::geometry::{GeometryError, GeometryParams, IntersectionModel, Movement, Point, TrajectoryId};
use crate::planner::PlannerParams;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Hpq,
    FcfsStrict,
    FixedSignal,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Hpq => "hpq",
            Algorithm::FcfsStrict => "fcfs_strict",
            Algorithm::FixedSignal => "fixed_signal",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hpq" => Ok(Algorithm::Hpq),
            "fcfs_strict" => Ok(Algorithm::FcfsStrict),
            "fixed_signal" => Ok(Algorithm::FixedSignal),
            other => Err(format!("unknown algorithm `{other}` (hpq, fcfs_strict, fixed_signal)")),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TraceLevel {
    Off,
    #[default]
    Events,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    pub mpc: MpcParams,
    pub stanley: StanleyParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    pub length_m: f64,
    pub width_m: f64,
    pub chv_accel_max_mps2: f64,
    pub emergency_decel_mps2: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            length_m: 4.5,
            width_m: 1.8,
            chv_accel_max_mps2: 2.6,
            emergency_decel_mps2: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandConfig {
    pub flow_pcuh: f64,
    pub penetration: f64,
    /// Probabilities over the 12 trajectories; defaults to 25/50/25
    /// right/straight/left on every approach.
    #[serde(default)]
    pub movement_mix: Option<Vec<f64>>,
    #[serde(default = "default_spawn_speed")]
    pub spawn_speed_mps: f64,
}

fn default_spawn_speed() -> f64 {
    9.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitVehicle {
    pub id: u32,
    pub kind: VehicleKind,
    /// Registration order among the explicit vehicles; 1 registers first.
    pub priority: u32,
    pub movement: Movement,
    /// Initial front-bumper position in the global frame.
    pub position_m: [f64; 2],
    pub speed_mps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalConfig {
    pub green_s: f64,
    pub all_red_s: f64,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self {
            green_s: 30.0,
            all_red_s: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub duration_s: f64,
    pub dt_s: f64,
    pub seed: u64,
    pub algorithm: Algorithm,
    /// Extra time allowed for the system to empty after arrivals stop.
    pub drain_s: f64,
    /// A run with vehicles present but no departure for this long is deadlocked.
    pub stall_s: f64,
    pub trace: TraceLevel,
    /// Simulated seconds between vehicle snapshots in a full trace.
    pub snapshot_every_s: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            duration_s: 900.0,
            dt_s: 0.02,
            seed: 1,
            algorithm: Algorithm::Hpq,
            drain_s: 120.0,
            stall_s: 60.0,
            trace: TraceLevel::Events,
            snapshot_every_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub flows_pcuh: Vec<f64>,
    pub penetrations: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    /// Number of seeds per cell, counting up from `run.seed`.
    pub seeds: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub scenario: String,
    #[serde(default)]
    pub geometry: GeometryParams,
    #[serde(default)]
    pub allocator: AllocatorParams,
    #[serde(default)]
    pub planner: PlannerParams,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub signal: SignalConfig,
    #[serde(default)]
    pub demand: Option<DemandConfig>,
    #[serde(default)]
    pub vehicles: Vec<ExplicitVehicle>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn default_name() -> String {
    "scenario".to_string()
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: default_name(),
            geometry: GeometryParams::default(),
            allocator: AllocatorParams::default(),
            planner: PlannerParams::default(),
            control: ControlConfig::default(),
            vehicle: VehicleParams::default(),
            signal: SignalConfig::default(),
            demand: None,
            vehicles: Vec::new(),
            run: RunConfig::default(),
            sweep: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config at `{path}`: {message}")]
    ConfigInvalid { path: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::ConfigInvalid {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Explicit vehicle resolved onto a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedVehicle {
    pub id: u32,
    pub kind: VehicleKind,
    pub priority: u32,
    pub traj: TrajectoryId,
    pub s: f64,
    pub v: f64,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| invalid("<document>", e.to_string()))?;
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(&path, e.into_inner().message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serialises")
    }

    pub fn model(&self) -> Result<IntersectionModel, ConfigError> {
        IntersectionModel::new(self.geometry).map_err(|e| geometry_error(&e))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let model = self.model()?;
        match (&self.demand, self.vehicles.is_empty()) {
            (Some(_), false) => return Err(invalid("demand", "use either [demand] or [[vehicles]], not both")),
            (None, true) => return Err(invalid("demand", "scenario needs [demand] or [[vehicles]]")),
            _ => {}
        }
        if let Some(d) = &self.demand {
            if !(d.flow_pcuh >= 0.0) || !d.flow_pcuh.is_finite() {
                return Err(invalid("demand.flow_pcuh", "must be a non-negative number"));
            }
            if !(0.0..=1.0).contains(&d.penetration) {
                return Err(invalid("demand.penetration", "must lie in [0, 1]"));
            }
            if !(d.spawn_speed_mps >= 0.0) {
                return Err(invalid("demand.spawn_speed_mps", "must be non-negative"));
            }
            if let Some(mix) = &d.movement_mix {
                if mix.len() != 12 {
                    return Err(invalid("demand.movement_mix", "needs 12 probabilities"));
                }
                if mix.iter().any(|p| !(*p >= 0.0)) || (mix.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(invalid("demand.movement_mix", "probabilities must be non-negative and sum to 1"));
                }
            }
        }
        self.placed_vehicles(&model)?;
        let r = &self.run;
        if !(r.dt_s > 0.0) {
            return Err(invalid("run.dt_s", "must be positive"));
        }
        if !(r.duration_s >= 0.0) {
            return Err(invalid("run.duration_s", "must be non-negative"));
        }
        if !(r.drain_s >= 0.0) {
            return Err(invalid("run.drain_s", "must be non-negative"));
        }
        if !(r.stall_s > 0.0) {
            return Err(invalid("run.stall_s", "must be positive"));
        }
        let steps = self.control.mpc.period_s / r.dt_s;
        if !(self.control.mpc.period_s > 0.0) || (steps - steps.round()).abs() > 1e-9 || steps.round() < 1.0 {
            return Err(invalid("control.mpc.period_s", "must be a positive multiple of run.dt_s"));
        }
        crate::control::MpcSetup::new(&self.control.mpc, 0.0)
            .map_err(|e| invalid("control.mpc", e.to_string()))?;
        let a = &self.allocator;
        if !(a.cycle_s > 0.0) {
            return Err(invalid("allocator.cycle_s", "must be positive"));
        }
        for (name, v) in [
            ("allocator.headway_s", a.headway_s),
            ("allocator.conflict_headway_cav_s", a.conflict_headway_cav_s),
            ("allocator.conflict_headway_chv_s", a.conflict_headway_chv_s),
            ("allocator.sigma_s", a.sigma_s),
            ("planner.min_gap_m", self.planner.min_gap_m),
            ("planner.headway_s", self.planner.headway_s),
            ("planner.stop_proximity_m", self.planner.stop_proximity_m),
            ("vehicle.length_m", self.vehicle.length_m),
            ("vehicle.width_m", self.vehicle.width_m),
            ("signal.green_s", self.signal.green_s),
        ] {
            if !(v > 0.0) {
                return Err(invalid(name, "must be positive"));
            }
        }
        if !(self.planner.stop_offset_m > 0.0) {
            return Err(invalid("planner.stop_offset_m", "must be positive"));
        }
        if let Some(s) = &self.sweep {
            for (i, p) in s.penetrations.iter().enumerate() {
                if !(0.0..=1.0).contains(p) {
                    return Err(invalid(&format!("sweep.penetrations[{i}]"), "must lie in [0, 1]"));
                }
            }
            for (i, f) in s.flows_pcuh.iter().enumerate() {
                if !(*f >= 0.0) {
                    return Err(invalid(&format!("sweep.flows_pcuh[{i}]"), "must be non-negative"));
                }
            }
        }
        Ok(())
    }

    /// Explicit vehicles mapped onto trajectories, in registration order.
    pub fn placed_vehicles(&self, model: &IntersectionModel) -> Result<Vec<PlacedVehicle>, ConfigError> {
        let mut out = Vec::with_capacity(self.vehicles.len());
        for (i, v) in self.vehicles.iter().enumerate() {
            let path = format!("vehicles[{i}]");
            let p = Point::new(v.position_m[0], v.position_m[1]);
            let (approach, s) = model
                .locate_entry(p)
                .ok_or_else(|| invalid(&format!("{path}.position_m"), "not on an entry lane inside the control range"))?;
            if !(v.speed_mps >= 0.0) {
                return Err(invalid(&format!("{path}.speed_mps"), "must be non-negative"));
            }
            out.push(PlacedVehicle {
                id: v.id,
                kind: v.kind,
                priority: v.priority,
                traj: TrajectoryId::from_parts(approach, v.movement),
                s,
                v: v.speed_mps,
            });
        }
        out.sort_by_key(|v| (v.priority, v.traj.approach()));
        for (i, a) in out.iter().enumerate() {
            for b in &out[i + 1..] {
                if a.id == b.id {
                    return Err(invalid("vehicles", format!("duplicate id {}", a.id)));
                }
                if a.priority == b.priority {
                    return Err(invalid("vehicles", format!("duplicate priority {}", a.priority)));
                }
                if a.traj.approach() == b.traj.approach() && (a.s - b.s).abs() < self.vehicle.length_m {
                    return Err(invalid("vehicles", format!("vehicles {} and {} overlap", a.id, b.id)));
                }
            }
        }
        Ok(out)
    }
}

fn geometry_error(e: &GeometryError) -> ConfigError {
    let field = match e {
        GeometryError::NonPositive { field, .. } => format!("geometry.{field}"),
        GeometryError::EntryAreaTooShort { .. } => "geometry.entry_length_m".into(),
        GeometryError::GeometryInconsistent { .. } => "geometry.left_radius_m".into(),
        _ => "geometry".into(),
    };
    invalid(&field, e.to_string())
}
