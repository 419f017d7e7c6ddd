use crate::allocator::{fcfs_strict_step, hpq_step, AllocatorState, Candidate, GrantDecision, VehicleId};
use crate::config::{Algorithm, SignalConfig};
use crate::geometry::ConflictGraph;

/// Signal state of the fixed-time baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalState {
    /// Approaches with green, if any.
    pub green: Option<[u8; 2]>,
    /// Green time left in the current phase.
    pub remaining_s: f64,
}

/// Two phases, approaches 1 and 3 then 2 and 4, each followed by all-red.
pub fn signal_state(t: f64, cfg: &SignalConfig) -> SignalState {
    let phase = cfg.green_s + cfg.all_red_s;
    let u = t.rem_euclid(2.0 * phase);
    let (k, r) = if u < phase { (0, u) } else { (1, u - phase) };
    if r < cfg.green_s {
        SignalState {
            green: Some(if k == 0 { [1, 3] } else { [2, 4] }),
            remaining_s: cfg.green_s - r,
        }
    } else {
        SignalState { green: None, remaining_s: 0.0 }
    }
}

/// Kinematic view of a queued vehicle, used by the signal baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadState {
    pub distance_to_line_m: f64,
    pub v: f64,
}

/// Lowest speed assumed when estimating arrival at the stop line.
const CREEP_SPEED_MPS: f64 = 2.0;

/// Fixed-signal grants: each green lane's head may go if nothing conflicting
/// holds the right of way and it can reach the line before the green ends.
pub fn fixed_signal_step<F>(
    state: &AllocatorState,
    graph: &ConflictGraph,
    t: f64,
    cfg: &SignalConfig,
    head_state: F,
) -> Vec<GrantDecision>
where
    F: Fn(VehicleId) -> HeadState,
{
    let signal = signal_state(t, cfg);
    let Some(green) = signal.green else { return Vec::new() };
    let mut out = Vec::new();
    let mut granted: Vec<crate::geometry::TrajectoryId> = Vec::new();
    for head in state.heads() {
        if !green.contains(&head.lane) {
            continue;
        }
        let (n1, _) = state.s2_conflicts(head.traj, graph);
        let n1 = n1 + granted.iter().filter(|g| graph.conflicts(head.traj, **g)).count();
        let hs = head_state(head.id);
        let eta = hs.distance_to_line_m.max(0.0) / hs.v.max(CREEP_SPEED_MPS);
        let candidate = Candidate { id: head.id, priority: head.priority, n1, n2: 0 };
        let ok = n1 == 0 && eta <= signal.remaining_s;
        out.push(GrantDecision {
            granted: ok.then_some(head.id),
            conflict: None,
            candidates: vec![candidate],
        });
        if ok {
            granted.push(head.traj);
        }
    }
    out
}

/// One ICU cycle for the selected algorithm. HPQ and strict FCFS grant at
/// most one vehicle; the signal may grant one per green lane.
pub fn policy_step<F>(
    algorithm: Algorithm,
    state: &AllocatorState,
    graph: &ConflictGraph,
    t: f64,
    signal: &SignalConfig,
    head_state: F,
) -> Vec<GrantDecision>
where
    F: Fn(VehicleId) -> HeadState,
{
    match algorithm {
        Algorithm::Hpq => vec![hpq_step(state, graph)],
        Algorithm::FcfsStrict => vec![fcfs_strict_step(state)],
        Algorithm::FixedSignal => fixed_signal_step(state, graph, t, signal, head_state),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::VehicleKind;
    use crate::geometry::{GeometryParams, IntersectionModel, Movement, TrajectoryId};

    #[test]
    fn signal_phases() {
        let cfg = SignalConfig::default();
        assert_eq!(signal_state(0.0, &cfg).green, Some([1, 3]));
        assert_eq!(signal_state(29.9, &cfg).green, Some([1, 3]));
        assert_eq!(signal_state(31.0, &cfg).green, None);
        assert_eq!(signal_state(33.0, &cfg).green, Some([2, 4]));
        assert_eq!(signal_state(64.0, &cfg).green, None);
        assert_eq!(signal_state(66.0, &cfg).green, Some([1, 3]));
        assert!((signal_state(10.0, &cfg).remaining_s - 20.0).abs() < 1e-12);
    }

    #[test]
    fn opposing_straights_share_green_but_lefts_wait() {
        let model = IntersectionModel::new(GeometryParams::default()).unwrap();
        let graph = model.compute_conflict_graph();
        let mut st = AllocatorState::new();
        st.register(VehicleId(1), VehicleKind::Chv, TrajectoryId::from_parts(1, Movement::Straight), 0.0)
            .unwrap();
        st.register(VehicleId(2), VehicleKind::Chv, TrajectoryId::from_parts(3, Movement::Straight), 0.0)
            .unwrap();
        st.register(VehicleId(3), VehicleKind::Chv, TrajectoryId::from_parts(2, Movement::Straight), 0.0)
            .unwrap();
        let near = |_| HeadState { distance_to_line_m: 2.0, v: 0.0 };
        let d = fixed_signal_step(&st, &graph, 1.0, &SignalConfig::default(), near);
        let granted: Vec<_> = d.iter().filter_map(|d| d.granted).collect();
        assert_eq!(granted, vec![VehicleId(1), VehicleId(2)]);

        let mut st = AllocatorState::new();
        st.register(VehicleId(1), VehicleKind::Chv, TrajectoryId::from_parts(1, Movement::Straight), 0.0)
            .unwrap();
        st.register(VehicleId(2), VehicleKind::Chv, TrajectoryId::from_parts(3, Movement::Left), 0.0)
            .unwrap();
        let d = fixed_signal_step(&st, &graph, 1.0, &SignalConfig::default(), near);
        let granted: Vec<_> = d.iter().filter_map(|d| d.granted).collect();
        assert_eq!(granted, vec![VehicleId(1)]);
    }

    #[test]
    fn late_arrival_is_held_for_next_green() {
        let model = IntersectionModel::new(GeometryParams::default()).unwrap();
        let graph = model.compute_conflict_graph();
        let mut st = AllocatorState::new();
        st.register(VehicleId(1), VehicleKind::Cav, TrajectoryId::from_parts(1, Movement::Straight), 0.0)
            .unwrap();
        let far = |_| HeadState { distance_to_line_m: 90.0, v: 9.0 };
        assert!(fixed_signal_step(&st, &graph, 25.0, &SignalConfig::default(), far)[0].granted.is_none());
        assert!(fixed_signal_step(&st, &graph, 5.0, &SignalConfig::default(), far)[0].granted.is_some());
    }
}
