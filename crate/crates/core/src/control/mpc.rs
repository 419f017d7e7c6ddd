//! Longitudinal MPC on the error state `x = [s_ref - s, v_ref - v]`.
//!
//! The horizon is condensed onto the free inputs `tau_0 .. tau_{Nc-1}`; the
//! input is held at `tau_{Nc-1}` for the rest of the prediction horizon. The
//! resulting dense QP is solved with Goldfarb-Idnani from `quadprog`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcParams {
    pub prediction_horizon: usize,
    pub control_horizon: usize,
    /// Control period `phi`.
    pub period_s: f64,
    /// State weight `Theta` (symmetric).
    pub state_weight: [[f64; 2]; 2],
    /// Input weight `Phi`.
    pub input_weight: f64,
    pub accel_min_mps2: f64,
    pub accel_max_mps2: f64,
    /// Bounds on the input change per control period.
    pub accel_step_min_mps2: f64,
    pub accel_step_max_mps2: f64,
    pub state_min: [f64; 2],
    pub state_max: [f64; 2],
}

impl Default for MpcParams {
    fn default() -> Self {
        Self {
            prediction_horizon: 20,
            control_horizon: 5,
            period_s: 0.1,
            state_weight: [[0.5, 0.0], [0.0, 1.0]],
            input_weight: 1.0,
            accel_min_mps2: -4.0,
            accel_max_mps2: 3.0,
            accel_step_min_mps2: -2.0,
            accel_step_max_mps2: 2.0,
            state_min: [-100.0, -13.8],
            state_max: [100.0, 13.8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MpcError {
    #[error("control period must be positive, got {0}")]
    NonpositivePeriod(f64),
    #[error("invalid MPC setup: {0}")]
    InvalidSetup(String),
    #[error("QP solver failed: {0}")]
    SolverFailure(String),
}

/// `(Xi, Psi1, Psi2)` for period `phi` and headway term `h`.
pub fn discretize(phi: f64, h: f64) -> Result<([[f64; 2]; 2], [f64; 2], [f64; 2]), MpcError> {
    if !(phi > 0.0) {
        return Err(MpcError::NonpositivePeriod(phi));
    }
    let xi = [[1.0, phi], [0.0, 1.0]];
    let psi1 = [-h * phi - phi * phi / 2.0, -phi];
    let psi2 = [phi * phi / 2.0, phi];
    Ok((xi, psi1, psi2))
}

/// Discretised problem for one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcSetup {
    pub period: f64,
    pub headway: f64,
    pub xi: [[f64; 2]; 2],
    pub psi1: [f64; 2],
    pub psi2: [f64; 2],
    pub np: usize,
    pub nc: usize,
    pub theta: [[f64; 2]; 2],
    pub phi_w: f64,
    pub x_min: [f64; 2],
    pub x_max: [f64; 2],
    pub tau_min: f64,
    pub tau_max: f64,
    pub dtau_min: f64,
    pub dtau_max: f64,
}

impl MpcSetup {
    pub fn new(p: &MpcParams, headway: f64) -> Result<Self, MpcError> {
        let (xi, psi1, psi2) = discretize(p.period_s, headway)?;
        let s = Self {
            period: p.period_s,
            headway,
            xi,
            psi1,
            psi2,
            np: p.prediction_horizon,
            nc: p.control_horizon,
            theta: p.state_weight,
            phi_w: p.input_weight,
            x_min: p.state_min,
            x_max: p.state_max,
            tau_min: p.accel_min_mps2,
            tau_max: p.accel_max_mps2,
            dtau_min: p.accel_step_min_mps2,
            dtau_max: p.accel_step_max_mps2,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), MpcError> {
        let bad = |m: &str| Err(MpcError::InvalidSetup(m.to_string()));
        if self.nc == 0 || self.nc > self.np {
            return bad("need 1 <= N_c <= N_p");
        }
        let t = self.theta;
        if t[0][1] != t[1][0] {
            return bad("state weight must be symmetric");
        }
        if t[0][0] < 0.0 || t[1][1] < 0.0 || t[0][0] * t[1][1] < t[0][1] * t[0][1] {
            return bad("state weight must be positive semidefinite");
        }
        if !(self.phi_w > 0.0) {
            return bad("input weight must be positive");
        }
        if !(self.tau_min <= self.tau_max) || self.x_min[0] > self.x_max[0] || self.x_min[1] > self.x_max[1] {
            return bad("empty box bounds");
        }
        if !(self.dtau_min <= 0.0 && self.dtau_max >= 0.0) {
            return bad("input-increment box must contain zero");
        }
        Ok(())
    }

    /// Frobenius norm of `Theta`.
    pub fn theta_norm(&self) -> f64 {
        self.theta
            .iter()
            .flatten()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// One step of `x+ = Xi x + Psi1 tau + Psi2 omega`.
    pub fn step(&self, x: [f64; 2], tau: f64, omega: f64) -> [f64; 2] {
        [
            self.xi[0][0] * x[0] + self.xi[0][1] * x[1] + self.psi1[0] * tau + self.psi2[0] * omega,
            self.xi[1][0] * x[0] + self.xi[1][1] * x[1] + self.psi1[1] * tau + self.psi2[1] * omega,
        ]
    }

    /// Predicted states `x_1 .. x_Np` for a control sequence of length `N_c`.
    pub fn rollout(&self, x0: [f64; 2], tau: &[f64], omega: &[f64]) -> Vec<[f64; 2]> {
        let mut x = x0;
        (0..self.np)
            .map(|k| {
                x = self.step(x, tau[k.min(self.nc - 1)], omega_at(omega, k));
                x
            })
            .collect()
    }

    /// Objective evaluated by forward simulation.
    pub fn rollout_cost(&self, x0: [f64; 2], tau: &[f64], omega: &[f64]) -> f64 {
        let states = self.rollout(x0, tau, omega);
        let state_cost: f64 = states.iter().map(|x| quad(&self.theta, x)).sum();
        state_cost + self.phi_w * tau.iter().map(|t| t * t).sum::<f64>()
    }
}

fn omega_at(omega: &[f64], k: usize) -> f64 {
    // Constant hold of the last forecast value.
    omega.get(k).or(omega.last()).copied().unwrap_or(0.0)
}

fn quad(m: &[[f64; 2]; 2], x: &[f64; 2]) -> f64 {
    x[0] * (m[0][0] * x[0] + m[0][1] * x[1]) + x[1] * (m[1][0] * x[0] + m[1][1] * x[1])
}

/// Condensed form `J(tau) = tau' H tau + 2 f' tau + c` with stacked
/// predictions `x_eta = free_eta + G_eta tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedQp {
    pub n: usize,
    /// Row-major `n x n`.
    pub hessian: Vec<f64>,
    pub linear: Vec<f64>,
    pub constant: f64,
    pub free: Vec<[f64; 2]>,
    /// `gain[eta][j]` is the 2-vector sensitivity of `x_{eta+1}` to `tau_j`.
    pub gain: Vec<Vec<[f64; 2]>>,
}

impl CondensedQp {
    pub fn build(setup: &MpcSetup, x0: [f64; 2], omega: &[f64]) -> Self {
        let (np, nc) = (setup.np, setup.nc);
        let mut free = Vec::with_capacity(np);
        let mut gain = Vec::with_capacity(np);
        let mut x = x0;
        let mut g = vec![[0.0; 2]; nc];
        for k in 0..np {
            x = setup.step(x, 0.0, omega_at(omega, k));
            free.push(x);
            // Propagate sensitivities through Xi and add the input entering at step k.
            for gj in g.iter_mut() {
                *gj = [
                    setup.xi[0][0] * gj[0] + setup.xi[0][1] * gj[1],
                    setup.xi[1][0] * gj[0] + setup.xi[1][1] * gj[1],
                ];
            }
            let j = k.min(nc - 1);
            g[j][0] += setup.psi1[0];
            g[j][1] += setup.psi1[1];
            gain.push(g.clone());
        }
        let th = &setup.theta;
        let mut hessian = vec![0.0; nc * nc];
        let mut linear = vec![0.0; nc];
        let mut constant = 0.0;
        for (f, gk) in free.iter().zip(&gain) {
            constant += quad(th, f);
            let tf = [th[0][0] * f[0] + th[0][1] * f[1], th[1][0] * f[0] + th[1][1] * f[1]];
            for i in 0..nc {
                linear[i] += gk[i][0] * tf[0] + gk[i][1] * tf[1];
                let tg = [
                    th[0][0] * gk[i][0] + th[0][1] * gk[i][1],
                    th[1][0] * gk[i][0] + th[1][1] * gk[i][1],
                ];
                for j in 0..nc {
                    hessian[i * nc + j] += gk[j][0] * tg[0] + gk[j][1] * tg[1];
                }
            }
        }
        for i in 0..nc {
            hessian[i * nc + i] += setup.phi_w;
        }
        Self {
            n: nc,
            hessian,
            linear,
            constant,
            free,
            gain,
        }
    }

    pub fn objective(&self, tau: &[f64]) -> f64 {
        let n = self.n;
        let mut v = self.constant;
        for i in 0..n {
            v += 2.0 * self.linear[i] * tau[i];
            for j in 0..n {
                v += tau[i] * self.hessian[i * n + j] * tau[j];
            }
        }
        v
    }

    /// Analytic gradient `2 H tau + 2 f`.
    pub fn gradient(&self, tau: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| 2.0 * self.linear[i] + 2.0 * (0..n).map(|j| self.hessian[i * n + j] * tau[j]).sum::<f64>())
            .collect()
    }

    pub fn predict(&self, tau: &[f64]) -> Vec<[f64; 2]> {
        self.free
            .iter()
            .zip(&self.gain)
            .map(|(f, g)| {
                let mut x = *f;
                for (gj, t) in g.iter().zip(tau) {
                    x[0] += gj[0] * t;
                    x[1] += gj[1] * t;
                }
                x
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSolution {
    pub tau: Vec<f64>,
    pub predicted: Vec<[f64; 2]>,
    /// Objective without slack penalty.
    pub cost: f64,
    /// State-box slack per dimension when the soft fallback was needed.
    pub slack: Option<[f64; 2]>,
}

impl MpcSolution {
    pub fn applied(&self) -> f64 {
        self.tau[0]
    }
}

/// Solve the MPC for initial error state `x0`, a disturbance forecast
/// `omega` (held constant past its end) and the previously applied input.
pub fn mpc_solve(
    x0: [f64; 2],
    setup: &MpcSetup,
    omega: &[f64],
    tau_prev: f64,
) -> Result<MpcSolution, MpcError> {
    setup.validate()?;
    let qp = CondensedQp::build(setup, x0, omega);
    let prev = tau_prev.clamp(setup.tau_min, setup.tau_max);
    let tau = match solve_condensed(setup, &qp, prev, None) {
        Ok(t) => (t, None),
        Err(quadprog::Error::Infeasible) => {
            let rho = 1e6 * setup.theta_norm().max(1e-12);
            let sol = solve_condensed(setup, &qp, prev, Some(rho))
                .map_err(|e| MpcError::SolverFailure(e.to_string()))?;
            let n = setup.nc;
            (sol[..n].to_vec(), Some([sol[n].max(0.0), sol[n + 1].max(0.0)]))
        }
        Err(e) => return Err(MpcError::SolverFailure(e.to_string())),
    };
    let (raw, slack) = tau;
    let tau = enforce_input_constraints(setup, &raw[..setup.nc], prev);
    let predicted = qp.predict(&tau);
    let cost = qp.objective(&tau);
    Ok(MpcSolution {
        tau,
        predicted,
        cost,
        slack,
    })
}

/// Applied command with fallback: any solver failure brakes at `tau_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpcCommand {
    pub accel: f64,
    pub fallback: bool,
    pub soft: bool,
}

pub fn mpc_command(x0: [f64; 2], setup: &MpcSetup, omega: &[f64], tau_prev: f64) -> MpcCommand {
    match mpc_solve(x0, setup, omega, tau_prev) {
        Ok(sol) => MpcCommand {
            accel: sol.applied(),
            fallback: false,
            soft: sol.slack.is_some(),
        },
        Err(_) => MpcCommand {
            accel: setup.tau_min,
            fallback: true,
            soft: false,
        },
    }
}

/// Project onto the input and increment boxes so both hold exactly in
/// floating point, not just to solver tolerance.
fn enforce_input_constraints(setup: &MpcSetup, raw: &[f64], prev: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    let mut last = prev;
    for &t in raw {
        let lo = setup.tau_min.max(last + setup.dtau_min);
        let hi = setup.tau_max.min(last + setup.dtau_max);
        let mut v = t.clamp(lo, hi);
        while v - last > setup.dtau_max {
            v = v.next_down();
        }
        while v - last < setup.dtau_min {
            v = v.next_up();
        }
        out.push(v);
        last = v;
    }
    out
}

/// Build and solve the dense QP. With `soft = Some(rho)` two slack variables
/// relax the state box and are penalised by `rho * |slack|^2`.
fn solve_condensed(
    setup: &MpcSetup,
    qp: &CondensedQp,
    prev: f64,
    soft: Option<f64>,
) -> Result<Vec<f64>, quadprog::Error> {
    let nc = setup.nc;
    let n = nc + if soft.is_some() { 2 } else { 0 };
    let mut q = vec![0.0; n * n];
    let mut c = vec![0.0; n];
    for i in 0..nc {
        c[i] = 2.0 * qp.linear[i];
        for j in 0..nc {
            q[i * n + j] = 2.0 * qp.hessian[i * nc + j];
        }
    }
    if let Some(rho) = soft {
        q[nc * n + nc] = 2.0 * rho;
        q[(nc + 1) * n + nc + 1] = 2.0 * rho;
    }
    let mut a: Vec<f64> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut row = |coef: &[(usize, f64)], rhs: f64| {
        let mut r = vec![0.0; n];
        for &(i, v) in coef {
            r[i] += v;
        }
        a.extend_from_slice(&r);
        b.push(rhs);
    };
    for k in 0..nc {
        row(&[(k, 1.0)], setup.tau_max);
        row(&[(k, -1.0)], -setup.tau_min);
        if k == 0 {
            row(&[(0, 1.0)], setup.dtau_max + prev);
            row(&[(0, -1.0)], -(setup.dtau_min + prev));
        } else {
            row(&[(k, 1.0), (k - 1, -1.0)], setup.dtau_max);
            row(&[(k, -1.0), (k - 1, 1.0)], -setup.dtau_min);
        }
    }
    for (f, g) in qp.free.iter().zip(&qp.gain) {
        for d in 0..2 {
            let mut up: Vec<(usize, f64)> = (0..nc).map(|j| (j, g[j][d])).collect();
            let mut down: Vec<(usize, f64)> = (0..nc).map(|j| (j, -g[j][d])).collect();
            if soft.is_some() {
                up.push((nc + d, -1.0));
                down.push((nc + d, -1.0));
            }
            row(&up, setup.x_max[d] - f[d]);
            row(&down, f[d] - setup.x_min[d]);
        }
    }
    if soft.is_some() {
        row(&[(nc, -1.0)], 0.0);
        row(&[(nc + 1, -1.0)], 0.0);
    }
    quadprog::solve_qp(&mut q, &c, &a, &b, 0, false).map(|s| s.sol)
}
