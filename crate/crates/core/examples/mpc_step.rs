//! One MPC solve for a CAV 15 m behind its reference and 3 m/s too slow,
//! then a closed loop that drives the error to zero.

use crossway::control::{mpc_solve, MpcParams, MpcSetup};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = MpcParams::default();
    let setup = MpcSetup::new(&params, 1.5)?;
    let x0 = [15.0, 3.0];
    let sol = mpc_solve(x0, &setup, &[0.0], 0.0)?;
    println!("initial error e_s = {} m, e_v = {} m/s", x0[0], x0[1]);
    println!("planned inputs:");
    for (k, tau) in sol.tau.iter().enumerate() {
        println!("  k={k}  tau = {tau:+.3} m/s^2");
    }
    println!("cost {:.3}, soft constraints used: {}", sol.cost, sol.slack.is_some());

    let mut x = x0;
    let mut tau = 0.0;
    let steps = (10.0 / params.period_s).round() as usize;
    println!("closed loop:");
    for k in 0..=steps {
        if k % 10 == 0 {
            println!("  t={:>4.1} s  e_s={:+7.3} m  e_v={:+6.3} m/s  tau={tau:+.3}", k as f64 * params.period_s, x[0], x[1]);
        }
        tau = mpc_solve(x, &setup, &[0.0], tau)?.applied();
        x = setup.step(x, tau, 0.0);
    }
    Ok(())
}
