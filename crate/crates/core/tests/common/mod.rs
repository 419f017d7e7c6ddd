#![allow(dead_code)]

use crossway::config::{Algorithm, DemandConfig, RunConfig, ScenarioConfig, TraceLevel};
use crossway::geometry::{IntersectionModel, Point, TrajectoryPath};
use std::collections::BTreeSet;
use std::path::PathBuf;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

pub fn demand_config(flow: f64, seed: u64, algorithm: Algorithm, duration_s: f64) -> ScenarioConfig {
    ScenarioConfig {
        scenario: "mixed_flow".into(),
        demand: Some(DemandConfig {
            flow_pcuh: flow,
            penetration: 0.5,
            movement_mix: None,
            spawn_speed_mps: 9.0,
        }),
        run: RunConfig {
            duration_s,
            seed,
            algorithm,
            trace: TraceLevel::Off,
            ..RunConfig::default()
        },
        ..ScenarioConfig::default()
    }
}

/// Brute-force conflict oracle on sampled centreline polylines.
pub struct PolylineOracle {
    /// Unordered pairs with at least one transversal crossing.
    pub crossing_pairs: BTreeSet<(u8, u8)>,
    /// Every crossing as (a, b, point), a < b.
    pub crossing_points: Vec<(u8, u8, Point)>,
    /// Unordered pairs whose paths end in the same exit lane.
    pub merging_pairs: BTreeSet<(u8, u8)>,
}

const SAMPLE_STEP_M: f64 = 0.01;
/// Clearance kept from shared entry and exit lanes so collinear overlap is
/// not mistaken for a crossing.
const LANE_TRIM_M: f64 = 0.05;

fn polyline(path: &TrajectoryPath, from: f64, to: f64) -> Vec<Point> {
    let n = ((to - from) / SAMPLE_STEP_M).ceil() as usize;
    (0..=n)
        .map(|k| {
            let s = (from + k as f64 * (to - from) / n as f64).min(to);
            path.position_heading_at(s).expect("in range").point()
        })
        .collect()
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn segment_hit(p1: Point, p2: Point, q1: Point, q2: Point) -> Option<Point> {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0) && d1 != d2 {
        let t = d1 / (d1 - d2);
        Some(Point::new(p1.x + t * (p2.x - p1.x), p1.y + t * (p2.y - p1.y)))
    } else {
        None
    }
}

impl PolylineOracle {
    pub fn compute(model: &IntersectionModel) -> Self {
        let paths = model.trajectories();
        let l = model.stop_line_s();
        let ends: Vec<_> = paths
            .iter()
            .map(|p| p.position_heading_at(p.total_length()).expect("end"))
            .collect();
        // Same exit lane: parallel final headings and zero lateral offset
        // between the two end points.
        let mut merging_pairs = BTreeSet::new();
        for a in 0..12 {
            for b in a + 1..12 {
                let (ea, eb) = (ends[a], ends[b]);
                let (sin, cos) = eb.heading.sin_cos();
                let lateral = -(ea.x - eb.x) * sin + (ea.y - eb.y) * cos;
                let parallel = (ea.heading - eb.heading).sin().abs() < 1e-9 && (ea.heading - eb.heading).cos() > 0.0;
                if parallel && lateral.abs() < 1e-6 {
                    merging_pairs.insert((a as u8, b as u8));
                }
            }
        }
        // Interior of the box only: from just past the stop line to just before
        // the exit lane, which is shared only by merging partners.
        let lines: Vec<Vec<Point>> = paths
            .iter()
            .map(|p| polyline(p, l + LANE_TRIM_M, p.exit_join_s() - LANE_TRIM_M))
            .collect();
        let mut crossing_pairs = BTreeSet::new();
        let mut crossing_points = Vec::new();
        for a in 0..12 {
            for b in a + 1..12 {
                let mut hits: Vec<Point> = Vec::new();
                for w in lines[a].windows(2) {
                    for v in lines[b].windows(2) {
                        if let Some(p) = segment_hit(w[0], w[1], v[0], v[1]) {
                            if hits.iter().all(|h| h.distance(p) > 10.0 * SAMPLE_STEP_M) {
                                hits.push(p);
                            }
                        }
                    }
                }
                if !hits.is_empty() {
                    crossing_pairs.insert((a as u8, b as u8));
                }
                crossing_points.extend(hits.into_iter().map(|p| (a as u8, b as u8, p)));
            }
        }
        Self {
            crossing_pairs,
            crossing_points,
            merging_pairs,
        }
    }
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Exhaustive search over a discretised input set, with the error dynamics
/// and cost written out independently of the library.
pub struct MpcGridOracle {
    np: usize,
    nc: usize,
    phi: f64,
    h: f64,
    theta: [[f64; 2]; 2],
    w: f64,
    x0: [f64; 2],
    omega: Vec<f64>,
    prev: f64,
    tau_box: (f64, f64),
    dtau_box: (f64, f64),
    x_min: [f64; 2],
    x_max: [f64; 2],
}

impl MpcGridOracle {
    pub fn new(setup: &crossway::control::MpcSetup, x0: [f64; 2], omega: &[f64], prev: f64) -> Self {
        Self {
            np: setup.np,
            nc: setup.nc,
            phi: setup.period,
            h: setup.headway,
            theta: setup.theta,
            w: setup.phi_w,
            x0,
            omega: omega.to_vec(),
            prev: prev.clamp(setup.tau_min, setup.tau_max),
            tau_box: (setup.tau_min, setup.tau_max),
            dtau_box: (setup.dtau_min, setup.dtau_max),
            x_min: setup.x_min,
            x_max: setup.x_max,
        }
    }

    fn states(&self, tau: &[f64]) -> Vec<[f64; 2]> {
        let (phi, h) = (self.phi, self.h);
        let mut x = self.x0;
        (0..self.np)
            .map(|k| {
                let u = tau[k.min(self.nc - 1)];
                let w = self.omega.get(k).copied().unwrap_or(*self.omega.last().unwrap_or(&0.0));
                // Gap error grows with the speed error and the headway-scaled input.
                x = [
                    x[0] + phi * x[1] - (h * phi + phi * phi / 2.0) * u + phi * phi / 2.0 * w,
                    x[1] - phi * u + phi * w,
                ];
                x
            })
            .collect()
    }

    pub fn cost(&self, tau: &[f64]) -> f64 {
        let t = &self.theta;
        let states: f64 = self
            .states(tau)
            .iter()
            .map(|x| t[0][0] * x[0] * x[0] + 2.0 * t[0][1] * x[0] * x[1] + t[1][1] * x[1] * x[1])
            .sum();
        states + self.w * tau.iter().map(|u| u * u).sum::<f64>()
    }

    /// Input and increment boxes exactly; the state box within `tol`.
    pub fn feasible(&self, tau: &[f64], tol: f64) -> bool {
        let mut last = self.prev;
        for &u in tau {
            if u < self.tau_box.0 || u > self.tau_box.1 || u - last < self.dtau_box.0 || u - last > self.dtau_box.1 {
                return false;
            }
            last = u;
        }
        self.states(tau)
            .iter()
            .all(|x| (0..2).all(|d| x[d] >= self.x_min[d] - tol && x[d] <= self.x_max[d] + tol))
    }

    fn scan(&self, centre: Option<&[f64]>, half: f64, step: f64) -> Option<(f64, Vec<f64>)> {
        let axis = |i: usize| -> Vec<f64> {
            let (lo, hi) = match centre {
                Some(c) => ((c[i] - half).max(self.tau_box.0), (c[i] + half).min(self.tau_box.1)),
                None => self.tau_box,
            };
            let n = ((hi - lo) / step).round().max(1.0) as usize;
            (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
        };
        let axes: Vec<Vec<f64>> = (0..self.nc).map(axis).collect();
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut idx = vec![0usize; self.nc];
        loop {
            let tau: Vec<f64> = idx.iter().enumerate().map(|(i, &k)| axes[i][k]).collect();
            if self.feasible(&tau, 0.0) {
                let c = self.cost(&tau);
                if best.as_ref().is_none_or(|(b, _)| c < *b) {
                    best = Some((c, tau));
                }
            }
            let mut d = 0;
            loop {
                if d == self.nc {
                    return best;
                }
                idx[d] += 1;
                if idx[d] < axes[d].len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }

    /// Grid minimum over feasible inputs: a coarse pass over the whole box,
    /// then two finer passes around the incumbent.
    pub fn search(&self) -> Option<(f64, Vec<f64>)> {
        let mut best = self.scan(None, 0.0, 0.02)?;
        for (half, step) in [(0.05, 0.001), (0.002, 0.00005)] {
            if let Some(b) = self.scan(Some(&best.1), half, step) {
                if b.0 <= best.0 {
                    best = b;
                }
            }
        }
        Some(best)
    }
}
