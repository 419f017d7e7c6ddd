//! Step the priority-queue allocator by hand. A CHV turning left from
//! approach 4 is granted first, a right turn from approach 1 joins it without
//! conflict, and a CAV turning left from approach 2 is admitted with exactly
//! one conflict. The two heads behind them then wait.

use crossway::allocator::{hpq_step, AllocatorState, VehicleId, VehicleKind};
use crossway::geometry::{GeometryParams, IntersectionModel, TrajectoryId};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graph = IntersectionModel::new(GeometryParams::default())?.compute_conflict_graph();
    let mut state = AllocatorState::new();
    let arrivals = [
        (1, VehicleKind::Chv, 11),
        (2, VehicleKind::Cav, 0),
        (3, VehicleKind::Cav, 5),
        (4, VehicleKind::Chv, 7),
        (5, VehicleKind::Cav, 1),
    ];
    for (i, (id, kind, traj)) in arrivals.into_iter().enumerate() {
        state.register(VehicleId(id), kind, TrajectoryId::new(traj)?, i as f64 * 0.1)?;
    }

    for cycle in 0..5 {
        let t = cycle as f64 * 0.5;
        let d = hpq_step(&state, &graph);
        println!("cycle {cycle} (t = {t:.1} s)");
        for c in &d.candidates {
            let r = state.get(c.id).expect("registered");
            println!(
                "  head {} {:?} traj {:>2} P={}  N1={} N2={}",
                c.id, r.kind, r.traj, c.priority, c.n1, c.n2
            );
        }
        match d.granted {
            Some(id) => {
                let with = d.conflict.map_or(String::new(), |c| format!(" resolving conflict with {c}"));
                println!("  -> grant {id}{with}");
                state.apply_grant(id, t)?;
            }
            None => println!("  -> no grant"),
        }
        let s2: Vec<String> = state.s2().map(|r| r.id.to_string()).collect();
        println!("  S2 = {{{}}}  |S3| = {}", s2.join(", "), state.s3_len());
    }
    Ok(())
}
