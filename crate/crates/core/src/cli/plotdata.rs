use super::{create_dir, csv_err, io_err, CliError};
use crate::sim::{grant_timeline, mode_timeline, read_jsonl, MetricsRow, TraceEvent};
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Width of one period in the time series tables.
pub const SERIES_PERIOD_S: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Mean and spread of halts per cell, from a sweep `metrics.csv`.
    HaltsBar,
    /// Mean travel time per exit period, from a run's `vehicles.csv`.
    TravelTimeSeries,
    /// Mean speed per exit period, from a run's `vehicles.csv`.
    SpeedSeries,
    /// Grant bars, from a run's `trace.jsonl`.
    GrantTimeline,
    /// CAV mode segments, from a run's `trace.jsonl`.
    ModeTimeline,
}

impl PlotKind {
    pub const ALL: [PlotKind; 5] = [
        PlotKind::HaltsBar,
        PlotKind::TravelTimeSeries,
        PlotKind::SpeedSeries,
        PlotKind::GrantTimeline,
        PlotKind::ModeTimeline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlotKind::HaltsBar => "halts_bar",
            PlotKind::TravelTimeSeries => "travel_time_series",
            PlotKind::SpeedSeries => "speed_series",
            PlotKind::GrantTimeline => "grant_timeline",
            PlotKind::ModeTimeline => "mode_timeline",
        }
    }
}

impl FromStr for PlotKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| CliError::UnknownKind(s.to_string()))
    }
}

fn read_trace(path: &Path) -> Result<Vec<TraceEvent>, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    read_jsonl(&text).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err(path))
}

fn halts_bar(input: &Path, w: &mut csv::Writer<std::fs::File>, out: &Path) -> Result<(), CliError> {
    let rows: Vec<MetricsRow> = read_csv(input)?;
    let mut cells: Vec<(f64, f64, String, Vec<f64>)> = Vec::new();
    for r in rows.iter().filter(|r| r.seed != "mean" && r.collisions == 0 && !r.deadlock) {
        match cells
            .iter_mut()
            .find(|c| c.0 == r.flow_pcuh && c.1 == r.penetration && c.2 == r.algorithm)
        {
            Some(c) => c.3.push(r.avg_halts),
            None => cells.push((r.flow_pcuh, r.penetration, r.algorithm.clone(), vec![r.avg_halts])),
        }
    }
    w.write_record(["flow_pcuh", "penetration", "algorithm", "mean_halts", "std_halts"])
        .map_err(csv_err(out))?;
    for (flow, pen, alg, xs) in cells {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        w.write_record([flow.to_string(), pen.to_string(), alg, mean.to_string(), std.to_string()])
            .map_err(csv_err(out))?;
    }
    Ok(())
}

fn series(input: &Path, speed: bool, w: &mut csv::Writer<std::fs::File>, out: &Path) -> Result<(), CliError> {
    let rows: Vec<super::VehicleRow> = read_csv(input)?;
    let mut bins: Vec<(f64, usize)> = Vec::new();
    for r in &rows {
        let (Some(exit), Some(x)) = (r.exit_t_s, if speed { r.avg_speed_mps } else { r.travel_time_s }) else {
            continue;
        };
        let k = (exit / SERIES_PERIOD_S).floor() as usize;
        if bins.len() <= k {
            bins.resize(k + 1, (0.0, 0));
        }
        bins[k].0 += x;
        bins[k].1 += 1;
    }
    let value = if speed { "mean_speed_mps" } else { "mean_travel_time_s" };
    w.write_record(["period_start_s", "period_end_s", "vehicles", value])
        .map_err(csv_err(out))?;
    for (k, (sum, n)) in bins.into_iter().enumerate() {
        let start = k as f64 * SERIES_PERIOD_S;
        let mean = if n > 0 { sum / n as f64 } else { f64::NAN };
        w.write_record([start.to_string(), (start + SERIES_PERIOD_S).to_string(), n.to_string(), mean.to_string()])
            .map_err(csv_err(out))?;
    }
    Ok(())
}

/// Writes `<kind>.csv` into `out_dir` from the artifact at `input` and
/// returns its path.
pub fn emit_plotdata(kind: PlotKind, input: &Path, out_dir: &Path) -> Result<PathBuf, CliError> {
    create_dir(out_dir)?;
    let out = out_dir.join(format!("{}.csv", kind.as_str()));
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&out)
        .map_err(csv_err(&out))?;
    match kind {
        PlotKind::HaltsBar => halts_bar(input, &mut w, &out)?,
        PlotKind::TravelTimeSeries => series(input, false, &mut w, &out)?,
        PlotKind::SpeedSeries => series(input, true, &mut w, &out)?,
        PlotKind::GrantTimeline => {
            w.write_record(["vehicle", "grant_start_s", "grant_end_s"])
                .map_err(csv_err(&out))?;
            for g in grant_timeline(&read_trace(input)?) {
                let end = g.grant_end.map_or(String::new(), |e| e.to_string());
                w.write_record([g.vehicle.0.to_string(), g.grant_start.to_string(), end])
                    .map_err(csv_err(&out))?;
            }
        }
        PlotKind::ModeTimeline => {
            w.write_record(["vehicle", "mode", "t_start_s", "t_end_s"])
                .map_err(csv_err(&out))?;
            for m in mode_timeline(&read_trace(input)?) {
                w.write_record([
                    m.vehicle.0.to_string(),
                    m.mode.as_str().to_string(),
                    m.t_start.to_string(),
                    m.t_end.to_string(),
                ])
                .map_err(csv_err(&out))?;
            }
        }
    }
    w.flush().map_err(io_err(&out))?;
    Ok(out)
}
