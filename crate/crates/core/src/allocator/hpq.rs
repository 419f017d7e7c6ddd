use super::{AllocatorState, VehicleId, VehicleKind};
use crate::geometry::ConflictGraph;
use serde::{Deserialize, Serialize};

/// Evaluation of one queue head during a grant step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: VehicleId,
    pub priority: u32,
    pub n1: usize,
    pub n2: usize,
}

/// Output of one ICU cycle: `(I_p, I_c)` plus the per-head evaluation.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct GrantDecision {
    pub granted: Option<VehicleId>,
    pub conflict: Option<VehicleId>,
    pub candidates: Vec<Candidate>,
}

impl GrantDecision {
    pub fn none() -> Self {
        Self::default()
    }
}

/// One HPQ cycle. Scans the queue heads in ascending priority and grants the
/// first that qualifies: a CHV needs `N1 + N2 = 0`, a CAV `N1 <= 1` and
/// `N2 = 0`. Grants at most one vehicle; the state is not modified.
pub fn hpq_step(state: &AllocatorState, graph: &ConflictGraph) -> GrantDecision {
    let mut decision = GrantDecision::none();
    let heads = state.heads();
    // N2 for every head in one pass over S3.
    let mut n2 = [0usize; 4];
    for r in state.s3() {
        for (k, head) in heads.iter().enumerate() {
            if r.priority < head.priority && graph.conflicts(head.traj, r.traj) {
                n2[k] += 1;
            }
        }
    }
    for (head, &n2) in heads.iter().zip(&n2) {
        let (n1, last) = state.s2_conflicts(head.traj, graph);
        decision.candidates.push(Candidate {
            id: head.id,
            priority: head.priority,
            n1,
            n2,
        });
        let ok = match head.kind {
            VehicleKind::Chv => n1 + n2 == 0,
            VehicleKind::Cav => n1 <= 1 && n2 == 0,
        };
        if ok {
            decision.granted = Some(head.id);
            decision.conflict = if head.kind == VehicleKind::Cav { last } else { None };
            break;
        }
    }
    decision
}

/// Strict first-come-first-served baseline: the priority-1 vehicle is granted
/// only when nobody holds the conflict area.
pub fn fcfs_strict_step(state: &AllocatorState) -> GrantDecision {
    let mut decision = GrantDecision::none();
    if state.s2_len() > 0 {
        return decision;
    }
    if let Some(head) = state.heads().first() {
        decision.candidates.push(Candidate {
            id: head.id,
            priority: head.priority,
            n1: 0,
            n2: 0,
        });
        decision.granted = Some(head.id);
    }
    decision
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{GeometryParams, IntersectionModel, Movement, TrajectoryId};

    fn graph() -> ConflictGraph {
        IntersectionModel::new(GeometryParams::default())
            .unwrap()
            .compute_conflict_graph()
    }

    fn reg(s: &mut AllocatorState, id: u32, kind: VehicleKind, traj: u8) {
        s.register(VehicleId(id), kind, TrajectoryId::new(traj).unwrap(), 0.0)
            .unwrap();
    }

    #[test]
    fn lone_head_granted() {
        let g = graph();
        let mut s = AllocatorState::new();
        reg(&mut s, 1, VehicleKind::Chv, 11);
        let d = hpq_step(&s, &g);
        assert_eq!(d.granted, Some(VehicleId(1)));
        assert_eq!(d.conflict, None);
    }

    #[test]
    fn chv_blocked_by_single_s2_conflict() {
        let g = graph();
        let mut s = AllocatorState::new();
        reg(&mut s, 1, VehicleKind::Cav, 1);
        s.apply_grant(VehicleId(1), 0.0).unwrap();
        reg(&mut s, 2, VehicleKind::Chv, 4);
        // Lane-4 straight crosses the lane-1 straight; lane-3 right does not.
        reg(&mut s, 3, VehicleKind::Chv, 6);
        let d = hpq_step(&s, &g);
        assert_eq!(d.candidates[0].n1, 1);
        assert_eq!(d.granted, Some(VehicleId(3)));
    }

    #[test]
    fn cav_granted_with_one_conflict() {
        let g = graph();
        let mut s = AllocatorState::new();
        reg(&mut s, 1, VehicleKind::Chv, 1);
        s.apply_grant(VehicleId(1), 0.0).unwrap();
        reg(&mut s, 2, VehicleKind::Cav, 4);
        let d = hpq_step(&s, &g);
        assert_eq!(d.granted, Some(VehicleId(2)));
        assert_eq!(d.conflict, Some(VehicleId(1)));
    }

    #[test]
    fn higher_priority_conflict_blocks() {
        let g = graph();
        let mut s = AllocatorState::new();
        reg(&mut s, 1, VehicleKind::Cav, 4);
        s.apply_grant(VehicleId(1), 0.0).unwrap();
        // P=1 CHV crosses the S2 holder; the P=2 CAV crosses the P=1 CHV.
        reg(&mut s, 2, VehicleKind::Chv, 1);
        reg(&mut s, 3, VehicleKind::Cav, 10);
        reg(&mut s, 4, VehicleKind::Chv, 3);
        let d = hpq_step(&s, &g);
        let by_id = |id| d.candidates.iter().find(|c| c.id == VehicleId(id)).copied().unwrap();
        assert_eq!((by_id(2).n1, by_id(2).n2), (1, 0));
        assert_eq!((by_id(3).n1, by_id(3).n2), (0, 1));
        assert_eq!((by_id(4).n1, by_id(4).n2), (0, 0));
        assert_eq!(d.granted, Some(VehicleId(4)));
    }

    #[test]
    fn single_grant_per_step() {
        let g = graph();
        let mut s = AllocatorState::new();
        for (i, t) in [0u8, 3, 6, 9].into_iter().enumerate() {
            reg(&mut s, i as u32, VehicleKind::Cav, t);
        }
        let d = hpq_step(&s, &g);
        assert_eq!(d.granted, Some(VehicleId(0)));
    }

    #[test]
    fn right_turn_heads_pass_together() {
        let g = graph();
        let mut s = AllocatorState::new();
        let r = |a| TrajectoryId::from_parts(a, Movement::Right).raw();
        for a in 1..=4u8 {
            reg(&mut s, u32::from(a), VehicleKind::Chv, r(a));
        }
        for t in 0..4 {
            let d = hpq_step(&s, &g);
            let id = d.granted.expect("right turns never conflict");
            s.apply_grant(id, f64::from(t) * 0.5).unwrap();
        }
        assert_eq!(s.s2_len(), 4);
    }

    #[test]
    fn fcfs_waits_for_empty_area() {
        let mut s = AllocatorState::new();
        reg(&mut s, 1, VehicleKind::Cav, 0);
        reg(&mut s, 2, VehicleKind::Cav, 3);
        let d = fcfs_strict_step(&s);
        assert_eq!(d.granted, Some(VehicleId(1)));
        s.apply_grant(VehicleId(1), 0.0).unwrap();
        assert_eq!(fcfs_strict_step(&s).granted, None);
    }
}
