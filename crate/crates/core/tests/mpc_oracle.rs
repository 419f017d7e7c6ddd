mod common;

use common::MpcGridOracle;
use crossway::control::{mpc_command, mpc_solve, MpcParams, MpcSetup};
use proptest::prelude::*;

fn setup(np: usize, nc: usize, h: f64, tweak: impl FnOnce(&mut MpcParams)) -> MpcSetup {
    let mut p = MpcParams {
        prediction_horizon: np,
        control_horizon: nc,
        ..MpcParams::default()
    };
    tweak(&mut p);
    MpcSetup::new(&p, h).unwrap()
}

#[test]
fn equilibrium_is_zero() {
    let s = setup(20, 5, 1.5, |_| {});
    let sol = mpc_solve([0.0, 0.0], &s, &[0.0], 0.0).unwrap();
    assert!(sol.tau.iter().all(|t| t.abs() < 1e-12));
    assert!(sol.cost.abs() < 1e-12);
}

#[test]
fn speed_error_accelerates() {
    // e_v = v_ref - v > 0: the vehicle is too slow.
    let s = setup(20, 5, 0.0, |_| {});
    assert!(mpc_solve([0.0, 3.0], &s, &[0.0], 0.0).unwrap().applied() > 0.0);
}

#[test]
fn rate_limited_ramp_matches_grid() {
    let s = setup(3, 2, 0.0, |p| {
        p.accel_step_max_mps2 = 0.3;
        p.accel_step_min_mps2 = -0.3;
        p.input_weight = 0.01;
    });
    let x0 = [0.0, 8.0];
    let sol = mpc_solve(x0, &s, &[0.0], 0.0).unwrap();
    assert!((sol.tau[0] - 0.3).abs() < 1e-12);
    assert!((sol.tau[1] - sol.tau[0] - 0.3).abs() < 1e-12);
    let (grid, _) = MpcGridOracle::new(&s, x0, &[0.0], 0.0).search().unwrap();
    assert!((sol.cost - grid).abs() <= 0.01 * grid);
}

#[test]
fn infeasible_state_box_softens() {
    let s = setup(4, 2, 0.0, |p| {
        p.state_max = [100.0, 0.5];
        p.state_min = [-100.0, -0.5];
        p.accel_step_max_mps2 = 0.1;
        p.accel_step_min_mps2 = -0.1;
    });
    // Speed error far outside the box and a slow input ramp: no hard solution.
    assert!(MpcGridOracle::new(&s, [0.0, 5.0], &[0.0], 0.0).search().is_none());
    let cmd = mpc_command([0.0, 5.0], &s, &[0.0], 0.0);
    assert!(cmd.soft && !cmd.fallback);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn input_constraints_hold_exactly(
        es in -30.0..30.0f64,
        ev in -10.0..10.0f64,
        w in -3.0..3.0f64,
        prev in -4.0..3.0f64,
        h in 0.0..2.5f64,
    ) {
        let s = setup(20, 5, h, |_| {});
        let sol = mpc_solve([es, ev], &s, &[w], prev).unwrap();
        let mut last = prev;
        for &t in &sol.tau {
            prop_assert!(t >= s.tau_min && t <= s.tau_max);
            prop_assert!(t - last >= s.dtau_min && t - last <= s.dtau_max);
            last = t;
        }
    }
}
