use crossway::allocator::{hpq_step, AllocatorState, VehicleId, VehicleKind, VehicleSet};
use crossway::geometry::{ConflictGraph, GeometryParams, IntersectionModel, TrajectoryId};
use proptest::prelude::*;
use std::collections::BTreeMap;
use std::sync::OnceLock;

fn graph() -> &'static ConflictGraph {
    static G: OnceLock<ConflictGraph> = OnceLock::new();
    G.get_or_init(|| {
        IntersectionModel::new(GeometryParams::default())
            .unwrap()
            .compute_conflict_graph()
    })
}

#[derive(Debug, Clone)]
enum Op {
    Arrive { traj: u8, cav: bool },
    Cycle,
    Promote(usize),
    Depart(usize),
    Abnormal(usize),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (0u8..12, any::<bool>()).prop_map(|(traj, cav)| Op::Arrive { traj, cav }),
        3 => Just(Op::Cycle),
        2 => any::<usize>().prop_map(Op::Promote),
        2 => any::<usize>().prop_map(Op::Depart),
        1 => any::<usize>().prop_map(Op::Abnormal),
    ]
}

/// Grant rule restated over the raw sets.
fn qualifies(s: &AllocatorState, id: VehicleId) -> bool {
    let g = graph();
    let r = s.get(id).unwrap();
    let n1 = s.s2().filter(|o| g.conflicts(r.traj, o.traj)).count();
    let n2 = s
        .s3()
        .filter(|o| o.priority < r.priority && g.conflicts(r.traj, o.traj))
        .count();
    match r.kind {
        VehicleKind::Chv => n1 == 0 && n2 == 0,
        VehicleKind::Cav => n1 <= 1 && n2 == 0,
    }
}

fn pick(ids: &[VehicleId], i: usize) -> Option<&VehicleId> {
    (!ids.is_empty()).then(|| &ids[i % ids.len()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn allocator_invariants(ops in prop::collection::vec(op(), 1..120)) {
        let g = graph();
        let mut s = AllocatorState::new();
        let mut next = 0u32;
        let mut departed = 0usize;
        let mut t = 0.0;
        let mut arrivals: BTreeMap<u8, Vec<VehicleId>> = BTreeMap::new();
        let mut granted: BTreeMap<u8, Vec<VehicleId>> = BTreeMap::new();
        for op in ops {
            t += 0.5;
            match op {
                Op::Arrive { traj, cav } => {
                    let kind = if cav { VehicleKind::Cav } else { VehicleKind::Chv };
                    let id = VehicleId(next);
                    next += 1;
                    let traj = TrajectoryId::new(traj).unwrap();
                    let p = s.register(id, kind, traj, t).unwrap().priority;
                    prop_assert_eq!(p as usize, s.s3_len());
                    arrivals.entry(traj.approach()).or_default().push(id);
                }
                Op::Cycle => {
                    let before = s.s3_len();
                    let d = hpq_step(&s, g);
                    let heads: Vec<VehicleId> = s.heads().iter().map(|r| r.id).collect();
                    if s.s2_len() == 0 && before > 0 {
                        prop_assert!(d.granted.is_some(), "idle conflict area must serve someone");
                    }
                    if let Some(id) = d.granted {
                        prop_assert!(heads.contains(&id));
                        prop_assert!(qualifies(&s, id));
                        let p = s.get(id).unwrap().priority;
                        for h in &heads {
                            if s.get(*h).unwrap().priority < p {
                                prop_assert!(!qualifies(&s, *h), "an earlier head qualified");
                            }
                        }
                        if let Some(c) = d.conflict {
                            prop_assert_eq!(s.get(c).unwrap().set, VehicleSet::S2);
                            prop_assert!(g.conflicts(s.get(id).unwrap().traj, s.get(c).unwrap().traj));
                        }
                        let lane = s.get(id).unwrap().lane;
                        s.apply_grant(id, t).unwrap();
                        granted.entry(lane).or_default().push(id);
                        prop_assert_eq!(s.s3_len(), before - 1);
                    } else {
                        for h in &heads {
                            prop_assert!(!qualifies(&s, *h));
                        }
                    }
                }
                Op::Promote(i) => {
                    let ids: Vec<VehicleId> = s.s2().map(|r| r.id).collect();
                    if let Some(&id) = pick(&ids, i) {
                        s.promote_to_s1(id).unwrap();
                    }
                }
                Op::Depart(i) => {
                    let ids: Vec<VehicleId> = s
                        .records()
                        .filter(|r| r.set == VehicleSet::S1)
                        .map(|r| r.id)
                        .collect();
                    if let Some(&id) = pick(&ids, i) {
                        s.depart(id).unwrap();
                        departed += 1;
                    }
                }
                Op::Abnormal(i) => {
                    let ids: Vec<VehicleId> = s.s2().map(|r| r.id).collect();
                    if let Some(&id) = pick(&ids, i) {
                        let lane = s.get(id).unwrap().lane;
                        s.handle_abnormal(id).unwrap();
                        let max_other = s.s3().filter(|r| r.lane != lane).map(|r| r.priority).max();
                        let min_same = s.s3().filter(|r| r.lane == lane).map(|r| r.priority).min();
                        if let (Some(o), Some(m)) = (max_other, min_same) {
                            prop_assert!(o < m, "abnormal lane not demoted");
                        }
                    }
                }
            }
            prop_assert!(s.check_invariants().is_ok(), "{:?}", s.check_invariants());
            prop_assert_eq!(s.len() + departed, next as usize);
            let sets = s.count(VehicleSet::S1) + s.count(VehicleSet::S2) + s.count(VehicleSet::S3);
            prop_assert_eq!(sets, s.len());
        }
        // Lanes are served in arrival order.
        for (lane, order) in &granted {
            let arr = &arrivals[lane];
            prop_assert_eq!(&arr[..order.len()], &order[..]);
        }
    }

    #[test]
    fn chv_grants_are_conflict_free(trajs in prop::collection::vec(0u8..12, 1..40)) {
        let g = graph();
        let mut s = AllocatorState::new();
        for (i, t) in trajs.iter().enumerate() {
            s.register(VehicleId(i as u32), VehicleKind::Chv, TrajectoryId::new(*t).unwrap(), i as f64).unwrap();
        }
        while let Some(id) = hpq_step(&s, g).granted {
            s.apply_grant(id, 0.0).unwrap();
            let holders: Vec<TrajectoryId> = s.s2().map(|r| r.traj).collect();
            for (i, a) in holders.iter().enumerate() {
                for b in &holders[i + 1..] {
                    prop_assert!(!g.conflicts(*a, *b));
                }
            }
        }
    }
}

#[test]
fn concurrent_grants_example() {
    let g = graph();
    let mut s = AllocatorState::new();
    for (id, traj) in [(1, 11), (2, 0), (3, 5)] {
        s.register(VehicleId(id), VehicleKind::Chv, TrajectoryId::new(traj).unwrap(), 0.0)
            .unwrap();
    }
    let first = hpq_step(&s, g).granted.unwrap();
    assert_eq!(first, VehicleId(1));
    s.apply_grant(first, 0.0).unwrap();
    // Trajectory 0 is free of 11; 5 is blocked by the opposing-left crossing with 11.
    let second = hpq_step(&s, g).granted.unwrap();
    assert_eq!(second, VehicleId(2));
    s.apply_grant(second, 0.5).unwrap();
    assert_eq!(hpq_step(&s, g).granted, None);
}
