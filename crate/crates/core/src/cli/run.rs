use super::{create_dir, csv_err, io_err, CliError};
use crate::allocator::VehicleKind;
use crate::config::ScenarioConfig;
use crate::sim::{write_jsonl, MetricsRow, SimOutcome, Simulation, Violation};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

/// One line of `vehicles.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRow {
    pub id: u32,
    pub kind: VehicleKind,
    pub trajectory: u8,
    pub spawn_t_s: f64,
    pub exit_t_s: Option<f64>,
    pub travel_time_s: Option<f64>,
    pub distance_m: f64,
    pub avg_speed_mps: Option<f64>,
    pub halts: usize,
}

pub fn vehicle_rows(out: &SimOutcome) -> Vec<VehicleRow> {
    out.vehicles
        .iter()
        .map(|v| VehicleRow {
            id: v.id.0,
            kind: v.kind,
            trajectory: v.traj.index() as u8,
            spawn_t_s: v.spawn_t,
            exit_t_s: v.exit_t,
            travel_time_s: v.travel_time(),
            distance_m: v.distance_m,
            avg_speed_mps: v.avg_speed(),
            halts: v.halts,
        })
        .collect()
}

pub fn metrics_row(cfg: &ScenarioConfig, out: &SimOutcome) -> MetricsRow {
    let r = &out.report;
    MetricsRow {
        scenario: cfg.scenario.clone(),
        seed: cfg.run.seed.to_string(),
        flow_pcuh: cfg.demand.as_ref().map_or(0.0, |d| d.flow_pcuh),
        penetration: cfg.demand.as_ref().map_or(out.cav_share, |d| d.penetration),
        algorithm: cfg.run.algorithm.as_str().to_string(),
        avg_halts: r.avg_halts,
        avg_travel_time_s: r.avg_travel_time_s,
        avg_speed_mps: r.avg_speed_mps,
        collisions: r.collisions,
        deadlock: r.deadlock,
    }
}

/// What a single run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub row: MetricsRow,
    pub completed: usize,
    pub still_inside: usize,
    pub violations: Vec<Violation>,
    pub end_t: f64,
    pub summary: String,
}

impl RunReport {
    /// No collision and no deadlock.
    pub fn clean(&self) -> bool {
        self.row.collisions == 0 && !self.row.deadlock
    }
}

fn summary_text(cfg: &ScenarioConfig, out: &SimOutcome) -> String {
    let r = &out.report;
    let mut s = String::new();
    let _ = writeln!(s, "scenario        {}", cfg.scenario);
    let _ = writeln!(s, "algorithm       {}", cfg.run.algorithm);
    let _ = writeln!(s, "seed            {}", cfg.run.seed);
    match &cfg.demand {
        Some(d) => {
            let _ = writeln!(s, "demand          {} pcu/h, penetration {}", d.flow_pcuh, d.penetration);
        }
        None => {
            let _ = writeln!(s, "vehicles        {} explicit", cfg.vehicles.len());
        }
    }
    let _ = writeln!(s, "duration        {} s (ended at {:.2} s)", cfg.run.duration_s, out.end_t);
    let _ = writeln!(s, "completed       {}", r.completed);
    let _ = writeln!(s, "still inside    {}", r.still_inside);
    let _ = writeln!(s, "avg halts       {:.3}", r.avg_halts);
    let _ = writeln!(s, "avg travel time {:.3} s", r.avg_travel_time_s);
    let _ = writeln!(s, "avg speed       {:.3} m/s", r.avg_speed_mps);
    let _ = writeln!(s, "collisions      {}", r.collisions);
    let _ = writeln!(s, "violations      {}", out.violations.len());
    for v in out.violations.iter().take(20) {
        let _ = writeln!(s, "  {v:?}");
    }
    let _ = writeln!(s, "deadlock        {}", r.deadlock);
    let status = if r.collisions == 0 && !r.deadlock { "ok" } else { "FAILED" };
    let _ = writeln!(s, "status          {status}");
    s
}

/// Simulates `cfg` and writes `metrics.csv`, `vehicles.csv`, `trace.jsonl`
/// and `summary.txt` into `out_dir`.
pub fn run_to_dir(cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunReport, CliError> {
    let out = Simulation::new(cfg)?.run();
    create_dir(out_dir)?;
    let row = metrics_row(cfg, &out);

    let path = out_dir.join("metrics.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.serialize(&row).map_err(csv_err(&path))?;
    w.flush().map_err(io_err(&path))?;

    let path = out_dir.join("vehicles.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    for v in vehicle_rows(&out) {
        w.serialize(v).map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;

    let path = out_dir.join("trace.jsonl");
    let f = File::create(&path).map_err(io_err(&path))?;
    write_jsonl(&out.trace, BufWriter::new(f)).map_err(io_err(&path))?;

    let summary = summary_text(cfg, &out);
    let path = out_dir.join("summary.txt");
    std::fs::write(&path, &summary).map_err(io_err(&path))?;

    Ok(RunReport {
        row,
        completed: out.report.completed,
        still_inside: out.report.still_inside,
        violations: out.violations,
        end_t: out.end_t,
        summary,
    })
}
