use crate::allocator::{VehicleId, VehicleKind};
use crate::geometry::TrajectoryId;
use serde::{Deserialize, Serialize};

/// Speed below which a vehicle counts as halted.
pub const HALT_SPEED_MPS: f64 = 1.4;

/// Counts contiguous sub-threshold intervals in a speed stream.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HaltCounter {
    below: bool,
    count: usize,
}

impl HaltCounter {
    pub fn observe(&mut self, v: f64) {
        let below = v < HALT_SPEED_MPS;
        if below && !self.below {
            self.count += 1;
        }
        self.below = below;
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

pub fn count_halts(speeds: &[f64]) -> usize {
    let mut c = HaltCounter::default();
    for &v in speeds {
        c.observe(v);
    }
    c.count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSummary {
    pub id: VehicleId,
    pub kind: VehicleKind,
    pub traj: TrajectoryId,
    pub spawn_t: f64,
    pub exit_t: Option<f64>,
    pub distance_m: f64,
    pub halts: usize,
}

impl VehicleSummary {
    pub fn travel_time(&self) -> Option<f64> {
        self.exit_t.map(|e| e - self.spawn_t)
    }

    /// Mean speed over the vehicle's time in the control range.
    pub fn avg_speed(&self) -> Option<f64> {
        self.travel_time().filter(|t| *t > 0.0).map(|t| self.distance_m / t)
    }
}

/// Summary of a uniformly sampled speed trace starting at `spawn_t`; the
/// vehicle exits one step after its last sample.
pub fn summarize_speed_trace(
    id: VehicleId,
    kind: VehicleKind,
    traj: TrajectoryId,
    spawn_t: f64,
    dt: f64,
    speeds: &[f64],
) -> VehicleSummary {
    VehicleSummary {
        id,
        kind,
        traj,
        spawn_t,
        exit_t: Some(spawn_t + dt * speeds.len() as f64),
        distance_m: speeds.iter().map(|v| v * dt).sum(),
        halts: count_halts(speeds),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub avg_halts: f64,
    pub avg_travel_time_s: f64,
    pub avg_speed_mps: f64,
    /// Window vehicles that left the control range.
    pub completed: usize,
    /// Window vehicles still inside when the run ended.
    pub still_inside: usize,
    pub collisions: usize,
    pub deadlock: bool,
}

/// Averages over vehicles that entered before `window_end` and left the
/// control range; those still inside are only counted.
pub fn compute_metrics(vehicles: &[VehicleSummary], window_end: f64) -> MetricsReport {
    let mut halts = 0.0;
    let mut tt = 0.0;
    let mut speed = 0.0;
    let mut completed = 0;
    let mut inside = 0;
    for v in vehicles.iter().filter(|v| v.spawn_t < window_end) {
        match (v.travel_time(), v.avg_speed()) {
            (Some(t), Some(s)) => {
                completed += 1;
                halts += v.halts as f64;
                tt += t;
                speed += s;
            }
            _ => inside += 1,
        }
    }
    let n = completed.max(1) as f64;
    MetricsReport {
        avg_halts: halts / n,
        avg_travel_time_s: tt / n,
        avg_speed_mps: speed / n,
        completed,
        still_inside: inside,
        collisions: 0,
        deadlock: false,
    }
}

/// One line of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scenario: String,
    /// Seed, or `mean` on aggregate rows.
    pub seed: String,
    pub flow_pcuh: f64,
    pub penetration: f64,
    pub algorithm: String,
    pub avg_halts: f64,
    pub avg_travel_time_s: f64,
    pub avg_speed_mps: f64,
    pub collisions: usize,
    pub deadlock: bool,
}

pub const METRICS_HEADER: &str =
    "scenario,seed,flow_pcuh,penetration,algorithm,avg_halts,avg_travel_time_s,avg_speed_mps,collisions,deadlock";

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn summary(speeds: &[f64], dt: f64) -> VehicleSummary {
        summarize_speed_trace(VehicleId(1), VehicleKind::Cav, TrajectoryId::new(1).unwrap(), 0.0, dt, speeds)
    }

    #[test]
    fn unimpeded_vehicle() {
        let v = summary(&vec![10.0; 200], 0.1);
        let r = compute_metrics(&[v], 100.0);
        assert_relative_eq!(r.avg_travel_time_s, 20.0, epsilon = 1e-9);
        assert_relative_eq!(r.avg_speed_mps, 10.0, epsilon = 1e-9);
        assert_eq!(r.avg_halts, 0.0);
    }

    #[test]
    fn one_stop_is_one_halt() {
        let mut s = vec![8.0; 50];
        s.extend(vec![0.0; 50]);
        s.extend(vec![8.0; 50]);
        assert_eq!(count_halts(&s), 1);
    }

    #[test]
    fn two_dips_are_two_halts() {
        let s = [5.0, 1.0, 0.5, 1.2, 3.0, 6.0, 1.3, 0.0, 4.0];
        assert_eq!(count_halts(&s), 2);
        // Exactly at the threshold is not halted.
        assert_eq!(count_halts(&[5.0, 1.4, 5.0]), 0);
    }

    #[test]
    fn unfinished_and_late_vehicles_excluded() {
        let done = summary(&[10.0; 10], 1.0);
        let mut inside = done.clone();
        inside.exit_t = None;
        let mut late = done.clone();
        late.spawn_t = 500.0;
        let r = compute_metrics(&[done, inside, late], 100.0);
        assert_eq!(r.completed, 1);
        assert_eq!(r.still_inside, 1);
    }

    #[test]
    fn header_matches_row_fields() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(MetricsRow {
            scenario: "s".into(),
            seed: "1".into(),
            flow_pcuh: 1000.0,
            penetration: 0.5,
            algorithm: "hpq".into(),
            avg_halts: 0.0,
            avg_travel_time_s: 0.0,
            avg_speed_mps: 0.0,
            collisions: 0,
            deadlock: false,
        })
        .unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), METRICS_HEADER);
    }
}
