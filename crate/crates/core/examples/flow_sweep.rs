//! Random mixed traffic at several flows: HPQ against the fixed-time signal.
//!
//! Usage: `flow_sweep [seeds] [duration_s]`.

use crossway::config::{Algorithm, DemandConfig, RunConfig, ScenarioConfig, TraceLevel};
use crossway::sim::Simulation;

fn main() {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let duration: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(300.0);
    println!("flow  algorithm     seed  travel_s  halts  speed  collisions  violations  deadlock");
    for flow in [1000.0, 1300.0, 1600.0] {
        for algorithm in [Algorithm::Hpq, Algorithm::FixedSignal] {
            for seed in 1..=seeds {
                let cfg = ScenarioConfig {
                    demand: Some(DemandConfig {
                        flow_pcuh: flow,
                        penetration: 0.5,
                        movement_mix: None,
                        spawn_speed_mps: 9.0,
                    }),
                    run: RunConfig {
                        duration_s: duration,
                        seed,
                        algorithm,
                        trace: TraceLevel::Off,
                        ..RunConfig::default()
                    },
                    ..ScenarioConfig::default()
                };
                let out = Simulation::new(&cfg).expect("valid scenario").run();
                let r = &out.report;
                println!(
                    "{flow:<5} {:<13} {seed:<5} {:<9.2} {:<6.2} {:<6.2} {:<11} {:<11} {}",
                    algorithm.as_str(),
                    r.avg_travel_time_s,
                    r.avg_halts,
                    r.avg_speed_mps,
                    r.collisions,
                    out.violations.len(),
                    r.deadlock
                );
                for v in out.violations.iter().take(3) {
                    println!("    {v:?}");
                }
            }
        }
    }
}
