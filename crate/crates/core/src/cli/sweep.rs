use super::run::metrics_row;
use super::{create_dir, csv_err, io_err, CliError};
use crate::config::{Algorithm, DemandConfig, ScenarioConfig, TraceLevel};
use crate::sim::{MetricsRow, Simulation, METRICS_HEADER};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

/// One simulation of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepJob {
    pub flow_pcuh: f64,
    pub penetration: f64,
    pub algorithm: Algorithm,
    pub seed: u64,
}

/// Grid of the `[sweep]` block in flow, penetration, algorithm, seed order.
/// Seeds count up from `run.seed`; without a block the grid is empty.
pub fn sweep_jobs(cfg: &ScenarioConfig) -> Vec<SweepJob> {
    let Some(g) = &cfg.sweep else { return Vec::new() };
    let mut jobs = Vec::new();
    for &flow_pcuh in &g.flows_pcuh {
        for &penetration in &g.penetrations {
            for &algorithm in &g.algorithms {
                for k in 0..g.seeds {
                    jobs.push(SweepJob {
                        flow_pcuh,
                        penetration,
                        algorithm,
                        seed: cfg.run.seed + k,
                    });
                }
            }
        }
    }
    jobs
}

fn job_config(base: &ScenarioConfig, job: &SweepJob) -> ScenarioConfig {
    let mut cfg = base.clone();
    let template = base.demand.clone().unwrap_or(DemandConfig {
        flow_pcuh: job.flow_pcuh,
        penetration: job.penetration,
        movement_mix: None,
        spawn_speed_mps: 9.0,
    });
    cfg.demand = Some(DemandConfig {
        flow_pcuh: job.flow_pcuh,
        penetration: job.penetration,
        ..template
    });
    cfg.vehicles.clear();
    cfg.sweep = None;
    cfg.run.algorithm = job.algorithm;
    cfg.run.seed = job.seed;
    cfg.run.trace = TraceLevel::Off;
    cfg
}

/// Per-cell statistics over the runs that finished without collision or deadlock.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub scenario: String,
    pub flow_pcuh: f64,
    pub penetration: f64,
    pub algorithm: String,
    pub runs: usize,
    pub failed: usize,
    pub mean_halts: f64,
    pub std_halts: f64,
    pub mean_travel_time_s: f64,
    pub std_travel_time_s: f64,
    pub mean_speed_mps: f64,
    pub std_speed_mps: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub scenario: String,
    pub jobs: Vec<SweepJob>,
    /// Per-run rows in job order; `None` where the run could not start.
    pub rows: Vec<Option<MetricsRow>>,
    pub errors: Vec<(SweepJob, String)>,
    pub aggregates: Vec<AggregateRow>,
}

impl SweepResult {
    pub fn failed_runs(&self) -> usize {
        self.rows.iter().filter(|r| r.as_ref().is_none_or(failed)).count()
    }

    pub fn clean(&self) -> bool {
        self.failed_runs() == 0
    }

    /// Aggregate rows in metrics-CSV shape: seed `mean`, means over clean
    /// runs, collisions summed and deadlock set if any run deadlocked.
    pub fn mean_rows(&self) -> Vec<MetricsRow> {
        self.aggregates
            .iter()
            .map(|a| {
                let cell: Vec<&MetricsRow> = self.cell_rows(a).collect();
                MetricsRow {
                    scenario: a.scenario.clone(),
                    seed: "mean".to_string(),
                    flow_pcuh: a.flow_pcuh,
                    penetration: a.penetration,
                    algorithm: a.algorithm.clone(),
                    avg_halts: a.mean_halts,
                    avg_travel_time_s: a.mean_travel_time_s,
                    avg_speed_mps: a.mean_speed_mps,
                    collisions: cell.iter().map(|r| r.collisions).sum(),
                    deadlock: cell.iter().any(|r| r.deadlock),
                }
            })
            .collect()
    }

    fn cell_rows<'a>(&'a self, a: &'a AggregateRow) -> impl Iterator<Item = &'a MetricsRow> + 'a {
        self.rows.iter().flatten().filter(move |r| {
            r.flow_pcuh == a.flow_pcuh && r.penetration == a.penetration && r.algorithm == a.algorithm
        })
    }
}

fn failed(r: &MetricsRow) -> bool {
    r.collisions > 0 || r.deadlock
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn aggregate(scenario: &str, jobs: &[SweepJob], rows: &[Option<MetricsRow>]) -> Vec<AggregateRow> {
    let mut cells: Vec<(f64, f64, Algorithm)> = Vec::new();
    for j in jobs {
        let key = (j.flow_pcuh, j.penetration, j.algorithm);
        if !cells.contains(&key) {
            cells.push(key);
        }
    }
    cells
        .into_iter()
        .map(|(flow, pen, alg)| {
            let members: Vec<Option<&MetricsRow>> = jobs
                .iter()
                .zip(rows)
                .filter(|(j, _)| j.flow_pcuh == flow && j.penetration == pen && j.algorithm == alg)
                .map(|(_, r)| r.as_ref())
                .collect();
            let ok: Vec<&MetricsRow> = members.iter().flatten().copied().filter(|r| !failed(r)).collect();
            let (mean_halts, std_halts) = mean_std(&ok.iter().map(|r| r.avg_halts).collect::<Vec<_>>());
            let (mean_tt, std_tt) = mean_std(&ok.iter().map(|r| r.avg_travel_time_s).collect::<Vec<_>>());
            let (mean_v, std_v) = mean_std(&ok.iter().map(|r| r.avg_speed_mps).collect::<Vec<_>>());
            AggregateRow {
                scenario: scenario.to_string(),
                flow_pcuh: flow,
                penetration: pen,
                algorithm: alg.as_str().to_string(),
                runs: members.len(),
                failed: members.len() - ok.len(),
                mean_halts,
                std_halts,
                mean_travel_time_s: mean_tt,
                std_travel_time_s: std_tt,
                mean_speed_mps: mean_v,
                std_speed_mps: std_v,
            }
        })
        .collect()
}

/// Runs the grid on at most `threads` workers (all cores when `None`).
/// Individual run failures are recorded, not propagated.
pub fn run_sweep(cfg: &ScenarioConfig, threads: Option<usize>) -> Result<SweepResult, CliError> {
    let jobs = sweep_jobs(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Threads(e.to_string()))?;
    let results: Vec<Result<MetricsRow, String>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let c = job_config(cfg, job);
                let out = Simulation::new(&c).map_err(|e| e.to_string())?.run();
                Ok(metrics_row(&c, &out))
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(jobs.len());
    let mut errors = Vec::new();
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok(row) => rows.push(Some(row)),
            Err(e) => {
                rows.push(None);
                errors.push((*job, e));
            }
        }
    }
    let aggregates = aggregate(&cfg.scenario, &jobs, &rows);
    Ok(SweepResult {
        scenario: cfg.scenario.clone(),
        jobs,
        rows,
        errors,
        aggregates,
    })
}

/// Writes `metrics.csv` (per-run rows, then one `mean` row per cell),
/// `sweep_aggregate.csv` and `summary.txt`.
pub fn write_sweep(result: &SweepResult, out_dir: &Path) -> Result<(), CliError> {
    create_dir(out_dir)?;
    let path = out_dir.join("metrics.csv");
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&path)
        .map_err(csv_err(&path))?;
    w.write_record(METRICS_HEADER.split(',')).map_err(csv_err(&path))?;
    for r in result.rows.iter().flatten() {
        w.serialize(r).map_err(csv_err(&path))?;
    }
    for r in result.mean_rows() {
        w.serialize(r).map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;

    let path = out_dir.join("sweep_aggregate.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    for a in &result.aggregates {
        w.serialize(a).map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;

    let mut s = String::new();
    let _ = writeln!(s, "scenario {}: {} runs, {} failed", result.scenario, result.jobs.len(), result.failed_runs());
    for a in &result.aggregates {
        let _ = writeln!(
            s,
            "  flow {} pen {} {:<13} travel {:.2} s (sd {:.2})  halts {:.3}  speed {:.2} m/s  failed {}/{}",
            a.flow_pcuh, a.penetration, a.algorithm, a.mean_travel_time_s, a.std_travel_time_s, a.mean_halts, a.mean_speed_mps, a.failed, a.runs
        );
    }
    for r in result.rows.iter().flatten().filter(|r| failed(r)) {
        let _ = writeln!(
            s,
            "  FAILED flow {} {} seed {}: collisions {}, deadlock {}",
            r.flow_pcuh, r.algorithm, r.seed, r.collisions, r.deadlock
        );
    }
    for (job, e) in &result.errors {
        let _ = writeln!(s, "  ERROR flow {} {} seed {}: {e}", job.flow_pcuh, job.algorithm, job.seed);
    }
    let path = out_dir.join("summary.txt");
    std::fs::write(&path, s).map_err(io_err(&path))
}
