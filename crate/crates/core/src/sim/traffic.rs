use crate::allocator::VehicleKind;
use crate::geometry::{Movement, TrajectoryId, TRAJECTORY_COUNT};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

/// Random demand over one measurement window.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficDemand {
    /// Total flow over all four approaches.
    pub flow_pcuh: f64,
    /// CAV share of arrivals.
    pub penetration: f64,
    /// Probabilities over the twelve trajectories.
    pub mix: [f64; TRAJECTORY_COUNT],
    pub duration_s: f64,
    pub seed: u64,
}

impl TrafficDemand {
    /// 25% right, 50% straight, 25% left on every approach.
    pub fn default_mix() -> [f64; TRAJECTORY_COUNT] {
        std::array::from_fn(|i| match TrajectoryId::new(i as u8).expect("in range").movement() {
            Movement::Straight => 0.125,
            _ => 0.0625,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Arrival {
    pub t: f64,
    pub traj: TrajectoryId,
    pub kind: VehicleKind,
}

/// Poisson arrivals on each approach at `flow / 4`, with movement drawn from
/// the mix and type from the penetration rate. Each approach uses its own
/// random stream, so the schedule depends only on the demand and the seed.
pub fn spawn_traffic(demand: &TrafficDemand) -> Vec<Arrival> {
    let mut out = Vec::new();
    let rate = demand.flow_pcuh / 4.0 / 3600.0;
    if !(rate > 0.0) || demand.duration_s <= 0.0 {
        return out;
    }
    let exp = Exp::new(rate).expect("positive rate");
    for approach in 1..=4u8 {
        let ids: Vec<TrajectoryId> = [Movement::Right, Movement::Straight, Movement::Left]
            .into_iter()
            .map(|m| TrajectoryId::from_parts(approach, m))
            .collect();
        let weights: Vec<f64> = ids.iter().map(|id| demand.mix[id.index()]).collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(demand.seed);
        rng.set_stream(u64::from(approach));
        let mut t = 0.0;
        loop {
            t += exp.sample(&mut rng);
            if t >= demand.duration_s {
                break;
            }
            let mut u = rng.random::<f64>() * total;
            let mut traj = ids[ids.len() - 1];
            for (id, w) in ids.iter().zip(&weights) {
                if u < *w {
                    traj = *id;
                    break;
                }
                u -= w;
            }
            let kind = if rng.random_bool(demand.penetration) {
                VehicleKind::Cav
            } else {
                VehicleKind::Chv
            };
            out.push(Arrival { t, traj, kind });
        }
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.traj.approach().cmp(&b.traj.approach())));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demand(flow: f64, seed: u64) -> TrafficDemand {
        TrafficDemand {
            flow_pcuh: flow,
            penetration: 0.5,
            mix: TrafficDemand::default_mix(),
            duration_s: 900.0,
            seed,
        }
    }

    #[test]
    fn zero_flow_is_empty() {
        assert!(spawn_traffic(&demand(0.0, 3)).is_empty());
    }

    #[test]
    fn default_mix_sums_to_one() {
        assert!((TrafficDemand::default_mix().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(spawn_traffic(&demand(1300.0, 9)), spawn_traffic(&demand(1300.0, 9)));
        assert_ne!(spawn_traffic(&demand(1300.0, 9)), spawn_traffic(&demand(1300.0, 10)));
    }

    #[test]
    fn sorted_and_inside_window() {
        let a = spawn_traffic(&demand(1600.0, 1));
        assert!(a.windows(2).all(|w| w[0].t <= w[1].t));
        assert!(a.iter().all(|x| (0.0..900.0).contains(&x.t)));
    }
}
