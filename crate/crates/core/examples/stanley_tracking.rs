//! Stanley steering on a kinematic bicycle that starts 1 m to the right of a
//! straight path and, separately, on approach 1's left turn.

use crossway::control::{stanley_steer, KinematicBicycle, StanleyParams};
use crossway::geometry::{GeometryParams, IntersectionModel, Movement, TrajectoryId};

const WHEELBASE_M: f64 = 2.7;
const DT_S: f64 = 0.02;

fn track(model: &IntersectionModel, movement: Movement, offset_m: f64, seconds: f64) {
    let path = model.trajectory(TrajectoryId::from_parts(1, movement));
    let p = StanleyParams::default();
    let start = path.pose_extended(0.0);
    let (nx, ny) = (start.heading.sin(), -start.heading.cos());
    let mut car = KinematicBicycle::from_front(start.x + offset_m * nx, start.y + offset_m * ny, start.heading, 10.0, WHEELBASE_M);
    println!("{movement} from approach 1, {offset_m} m offset:");
    let mut worst: f64 = 0.0;
    let steps = (seconds / DT_S).round() as usize;
    for k in 0..=steps {
        let out = stanley_steer(&car.front(), &path, &p);
        if out.s > path.total_length() {
            break;
        }
        if k > 0 {
            worst = worst.max(out.e_sc.abs());
        }
        if k % 50 == 0 {
            println!("  t={:>4.1} s  s={:>6.1} m  e_sc={:+.4} m  delta={:+.4} rad", k as f64 * DT_S, out.s, out.e_sc, out.delta);
        }
        car.step(out.delta, 0.0, DT_S);
    }
    println!("  max |e_sc| {worst:.3} m");
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = IntersectionModel::new(GeometryParams::default())?;
    track(&model, Movement::Straight, 1.0, 10.0);
    track(&model, Movement::Left, 0.0, 12.0);
    Ok(())
}
