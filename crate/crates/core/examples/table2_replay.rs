//! Replays the six-vehicle comprehensive scenario and prints the grant order
//! and each CAV's control-mode sequence.

use crossway::config::ScenarioConfig;
use crossway::sim::{grant_timeline, mode_sequence, mode_timeline, Simulation};
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/table2.toml"));
    let cfg = ScenarioConfig::load(&path)?;
    let out = Simulation::new(&cfg)?.run();

    println!("grants:");
    for g in grant_timeline(&out.trace) {
        let end = g.grant_end.map_or("-".to_string(), |t| format!("{t:.2}"));
        println!("  vehicle {} from {:.2} s to {end} s", g.vehicle, g.grant_start);
    }
    let segments = mode_timeline(&out.trace);
    println!("modes:");
    for v in &out.vehicles {
        let seq = mode_sequence(&segments, v.id, 0.5);
        if !seq.is_empty() {
            let names: Vec<&str> = seq.iter().map(|m| m.as_str()).collect();
            println!("  vehicle {}: {}", v.id, names.join(" -> "));
        }
    }
    println!(
        "travel time {:.2} s, halts {:.2}, violations {}",
        out.report.avg_travel_time_s,
        out.report.avg_halts,
        out.violations.len()
    );
    Ok(())
}
