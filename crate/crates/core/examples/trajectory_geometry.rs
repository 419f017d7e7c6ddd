//! Lengths and key poses of the twelve movement paths, with a lane-frame
//! round trip at the start of each turn.

use crossway::geometry::{GeometryParams, IntersectionModel, TrajectoryId};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = IntersectionModel::new(GeometryParams::default())?;
    let l = model.stop_line_s();
    println!("stop line at s = {l} m; lane origin {} m from the centre", model.origin_distance());
    println!("id  approach  movement  exit  length   join_s   pose at stop line        pose at join");
    for id in TrajectoryId::all() {
        let path = model.trajectory(id);
        let a = path.position_heading_at(l)?;
        let j = path.pose_extended(path.exit_join_s());
        println!(
            "{:>2}  {:>8}  {:>8}  {:>4}  {:>6.2}  {:>7.2}  ({:6.2}, {:6.2}) {:+.3}  ({:6.2}, {:6.2}) {:+.3}",
            id.raw(),
            id.approach(),
            id.movement().to_string(),
            id.exit() + 1,
            path.total_length(),
            path.exit_join_s(),
            a.x,
            a.y,
            a.heading,
            j.x,
            j.y,
            j.heading
        );
    }
    let path = model.trajectory(TrajectoryId::new(2)?);
    let s = l + 3.0;
    let (p, _) = path.lane_point_at(s);
    let (back, _) = path.arc_length_heading(p)?;
    println!("left turn from approach 1: s = {s} -> lane point ({:.4}, {:.4}) -> s = {back:.12}", p.alpha, p.beta);
    Ok(())
}
