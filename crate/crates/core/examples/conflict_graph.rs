//! Print the canonical conflict graph: crossing edges and merging pairs.

use crossway::geometry::{GeometryParams, IntersectionModel};

fn main() {
    let model = IntersectionModel::new(GeometryParams::default()).expect("default layout is valid");
    let graph = model.compute_conflict_graph();
    println!("crossing edges: {}", graph.crossing_edges().len());
    for e in graph.crossing_edges() {
        println!(
            "  {:>2} x {:>2}  s=({:7.3}, {:7.3})  at ({:6.3}, {:6.3})",
            e.a, e.b, e.s_a, e.s_b, e.point.x, e.point.y
        );
    }
    println!("merging pairs: {}", graph.merging_pairs().len());
    for m in graph.merging_pairs() {
        println!(
            "  {:>2} + {:>2}  s=({:7.3}, {:7.3})  at ({:6.3}, {:6.3})",
            m.a, m.b, m.s_a, m.s_b, m.point.x, m.point.y
        );
    }
}
