//! The Strang splitting loop: half a Crank-Nicolson diffusion step, a full
//! jump step (precomputed matrix exponential or Padé-Picard), half a
//! diffusion step; plus payoff initialization and price extraction.

use serde::{Deserialize, Serialize};

use crate::generator::{JumpGenerator, JumpPropagator};
use crate::grid::Grid;
use crate::levy::{DiffusionParams, LevyJumpModel};
use crate::{EngineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Payoff {
    Call,
    Put,
    Digital,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JumpMethod {
    Exp,
    PadePicard,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PricingProblem {
    pub spot: f64,
    pub strike: f64,
    pub maturity: f64,
    pub payoff: Payoff,
    pub diffusion: DiffusionParams,
    pub jump: LevyJumpModel,
    pub n_time_steps: usize,
    pub jump_method: JumpMethod,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Two implicit-Euler quarter-steps before the first half-step.
    pub rannacher: bool,
}

impl PricingProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.maturity > 0.0) {
            return Err(EngineError::InvalidModel("maturity must be positive".into()));
        }
        if self.n_time_steps < 1 {
            return Err(EngineError::InvalidModel("need at least one time step".into()));
        }
        if !(self.spot > 0.0 && self.strike > 0.0) {
            return Err(EngineError::InvalidModel("spot and strike must be positive".into()));
        }
        self.jump.validate()
    }
}

/// Option values on the jump grid at backward time τ.
#[derive(Debug, Clone)]
pub struct SolutionState {
    pub values: Vec<f64>,
    pub tau: f64,
}

/// Side-channel diagnostics of one pricing run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunDiagnostics {
    pub regime: String,
    pub h: f64,
    pub n_nodes: usize,
    pub dtau: f64,
    pub picard_iterations: Vec<usize>,
    pub wall_seconds: f64,
    pub positivity_min: f64,
}

pub fn payoff_on_grid(payoff: Payoff, spot: f64, strike: f64, grid: &Grid) -> SolutionState {
    let values = grid
        .nodes()
        .iter()
        .map(|&x| {
            let s = spot * x.exp();
            match payoff {
                Payoff::Call => (s - strike).max(0.0),
                Payoff::Put => (strike - s).max(0.0),
                Payoff::Digital => {
                    if s > strike {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        })
        .collect();
    SolutionState { values, tau: 0.0 }
}

/// Asymptotic value at a far-field node given the forward and discount
/// factors accumulated so far.
fn asymptote(payoff: Payoff, spot: f64, strike: f64, x: f64, fwd: f64, disc: f64, upper: bool) -> f64 {
    match (payoff, upper) {
        (Payoff::Call, true) => spot * x.exp() * fwd - strike * disc,
        (Payoff::Call, false) => 0.0,
        (Payoff::Put, true) => 0.0,
        (Payoff::Put, false) => strike * disc - spot * x.exp() * fwd,
        (Payoff::Digital, true) => disc,
        (Payoff::Digital, false) => 0.0,
    }
}

/// Tridiagonal CN system data for the diffusion rows.
struct CnOperator {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

fn diffusion_rows(grid: &Grid, rate: f64, conv: f64, diff_half: f64) -> CnOperator {
    let (lo, hi) = grid.diffusion_range();
    let x = grid.nodes();
    let m = hi - lo + 1;
    let mut sub = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut sup = vec![0.0; m];
    for (k, i) in (lo..=hi).enumerate() {
        if i == lo || i == hi {
            continue; // Dirichlet rows
        }
        let hm = x[i] - x[i - 1];
        let hp = x[i + 1] - x[i];
        let c1m = -hp / (hm * (hm + hp));
        let c10 = (hp - hm) / (hm * hp);
        let c1p = hm / (hp * (hm + hp));
        let c2m = 2.0 / (hm * (hm + hp));
        let c20 = -2.0 / (hm * hp);
        let c2p = 2.0 / (hp * (hm + hp));
        sub[k] = conv * c1m + diff_half * c2m;
        diag[k] = -rate + conv * c10 + diff_half * c20;
        sup[k] = conv * c1p + diff_half * c2p;
    }
    CnOperator { sub, diag, sup }
}

fn thomas_solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = diag.to_vec();
    c[0] = sup[0] / d[0];
    rhs[0] /= d[0];
    for i in 1..n {
        let m = d[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / m;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / m;
        d[i] = m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// θ-scheme step of the diffusion operator over dt on the diffusion range;
/// extension nodes are reset to the asymptote at the new time level.
#[allow(clippy::too_many_arguments)]
fn diffusion_step_theta(
    state: &mut SolutionState,
    grid: &Grid,
    problem: &PricingProblem,
    drift_shift: f64,
    dt: f64,
    theta: f64,
    fwd: &mut f64,
    disc: &mut f64,
) {
    let d = &problem.diffusion;
    let conv = d.rate - d.dividend - 0.5 * d.sigma * d.sigma + drift_shift;
    let op = diffusion_rows(grid, d.rate, conv, 0.5 * d.sigma * d.sigma);
    let (lo, hi) = grid.diffusion_range();
    let m = hi - lo + 1;
    let x = grid.nodes();

    // explicit part (I + (1-θ)·dt·D) applied to the old values
    let mut rhs = vec![0.0; m];
    for (k, i) in (lo..=hi).enumerate() {
        if i == lo || i == hi {
            continue;
        }
        let v = &state.values;
        rhs[k] = v[i]
            + (1.0 - theta) * dt * (op.sub[k] * v[i - 1] + op.diag[k] * v[i] + op.sup[k] * v[i + 1]);
    }

    // advance the far-field factors to the new time level
    *fwd *= ((drift_shift - d.dividend) * dt).exp();
    *disc *= (-d.rate * dt).exp();

    // implicit system (I − θ·dt·D), Dirichlet closures at both ends
    let mut sub = vec![0.0; m];
    let mut dia = vec![1.0; m];
    let mut sup = vec![0.0; m];
    for k in 0..m {
        if k == 0 || k == m - 1 {
            continue;
        }
        sub[k] = -theta * dt * op.sub[k];
        dia[k] = 1.0 - theta * dt * op.diag[k];
        sup[k] = -theta * dt * op.sup[k];
    }
    rhs[0] = asymptote(problem.payoff, problem.spot, problem.strike, x[lo], *fwd, *disc, false)
        .max(0.0);
    rhs[m - 1] = asymptote(problem.payoff, problem.spot, problem.strike, x[hi], *fwd, *disc, true);
    thomas_solve(&sub, &dia, &sup, &mut rhs);
    for (k, i) in (lo..=hi).enumerate() {
        state.values[i] = rhs[k];
    }
    for i in 0..lo {
        state.values[i] =
            asymptote(problem.payoff, problem.spot, problem.strike, x[i], *fwd, *disc, false)
                .max(0.0);
    }
    for i in hi + 1..grid.len() {
        state.values[i] =
            asymptote(problem.payoff, problem.spot, problem.strike, x[i], *fwd, *disc, true);
    }
    state.tau += dt;
}

/// One Crank-Nicolson half-step of the diffusion part (dt = Δτ/2 supplied
/// by the caller), optionally opened with two implicit-Euler quarter-steps.
#[allow(clippy::too_many_arguments)]
pub fn diffusion_half_step(
    state: &mut SolutionState,
    grid: &Grid,
    problem: &PricingProblem,
    drift_shift: f64,
    dt_half: f64,
    rannacher: bool,
    fwd: &mut f64,
    disc: &mut f64,
) {
    if rannacher {
        diffusion_step_theta(state, grid, problem, drift_shift, 0.5 * dt_half, 1.0, fwd, disc);
        diffusion_step_theta(state, grid, problem, drift_shift, 0.5 * dt_half, 1.0, fwd, disc);
    } else {
        diffusion_step_theta(state, grid, problem, drift_shift, dt_half, 0.5, fwd, disc);
    }
}

/// Jump step via the precomputed propagator A = exp(Δτ·J*).
pub fn jump_full_step_exp(state: &mut SolutionState, prop: &JumpPropagator, dt: f64) {
    state.values = prop.apply(&state.values);
    state.tau += dt;
}

/// Jump step via the (1,1) Padé form solved by Picard iteration:
/// C_{k+1} = C_old + Δτ/2·J*(C_old + C_k). Returns the iteration count.
pub fn jump_full_step_picard(
    state: &mut SolutionState,
    gen: &JumpGenerator,
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let c_old = state.values.clone();
    let mut c = c_old.clone();
    let scale = c_old.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    for it in 1..=max_iter {
        let mut sum: Vec<f64> = c_old.iter().zip(&c).map(|(a, b)| a + b).collect();
        let jv = gen.apply(&sum)?;
        for (s, (co, j)) in sum.iter_mut().zip(c_old.iter().zip(&jv)) {
            *s = co + 0.5 * dt * j;
        }
        let delta = sum
            .iter()
            .zip(&c)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        c = sum;
        if delta <= tol * scale.max(1.0) || delta <= 1e2 * f64::EPSILON * scale {
            state.values = c;
            state.tau += dt;
            return Ok(it);
        }
        if !delta.is_finite() {
            return Err(EngineError::PicardDiverged {
                iterations: it,
                residual: delta,
            });
        }
    }
    let residual = {
        let mut sum: Vec<f64> = c_old.iter().zip(&c).map(|(a, b)| a + b).collect();
        let jv = gen.apply(&sum)?;
        for (s, (co, j)) in sum.iter_mut().zip(c_old.iter().zip(&jv)) {
            *s = co + 0.5 * dt * j;
        }
        sum.iter()
            .zip(&c)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
    };
    Err(EngineError::PicardDiverged {
        iterations: max_iter,
        residual,
    })
}

/// 4-point Lagrange interpolation of grid values at x (exact at nodes).
pub fn interpolate_at(grid: &Grid, values: &[f64], x: f64) -> f64 {
    let nodes = grid.nodes();
    let n = nodes.len();
    let idx = nodes.partition_point(|&v| v < x);
    let i0 = idx.saturating_sub(2).min(n - 4);
    let xs = &nodes[i0..i0 + 4];
    let ys = &values[i0..i0 + 4];
    let mut p = 0.0;
    for m in 0..4 {
        let mut l = 1.0;
        for q in 0..4 {
            if q != m {
                l *= (x - xs[q]) / (xs[m] - xs[q]);
            }
        }
        p += ys[m] * l;
    }
    p
}

/// Full Strang-splitting run: n steps of (half-D, full-J, half-D).
pub fn strang_price(
    problem: &PricingProblem,
    grid: &Grid,
    gen: &JumpGenerator,
) -> Result<(f64, SolutionState, RunDiagnostics)> {
    problem.validate()?;
    let t0 = std::time::Instant::now();
    let dt = problem.maturity / problem.n_time_steps as f64;
    let ds = gen.drift_shift + problem.diffusion.drift_shift;
    let mut state = payoff_on_grid(problem.payoff, problem.spot, problem.strike, grid);
    let mut fwd = 1.0;
    let mut disc = 1.0;
    let mut diag = RunDiagnostics {
        regime: gen.regime.clone(),
        h: grid.steps().iter().cloned().fold(0.0, f64::max),
        n_nodes: grid.len(),
        dtau: dt,
        ..Default::default()
    };
    let prop = match problem.jump_method {
        JumpMethod::Exp => Some(gen.propagator(dt)?),
        JumpMethod::PadePicard => None,
    };
    let mut pos_min = f64::INFINITY;
    for step in 0..problem.n_time_steps {
        let rann = problem.rannacher && step == 0;
        diffusion_half_step(&mut state, grid, problem, ds, 0.5 * dt, rann, &mut fwd, &mut disc);
        pos_min = pos_min.min(state.values.iter().cloned().fold(f64::INFINITY, f64::min));
        match &prop {
            Some(p) => jump_full_step_exp(&mut state, p, dt),
            None => {
                let its = jump_full_step_picard(
                    &mut state,
                    gen,
                    dt,
                    problem.picard_tol,
                    problem.picard_max_iter,
                )?;
                diag.picard_iterations.push(its);
            }
        }
        fwd *= (-gen.drift_shift * dt).exp();
        pos_min = pos_min.min(state.values.iter().cloned().fold(f64::INFINITY, f64::min));
        diffusion_half_step(&mut state, grid, problem, ds, 0.5 * dt, false, &mut fwd, &mut disc);
        pos_min = pos_min.min(state.values.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    let price = interpolate_at(grid, &state.values, 0.0);
    diag.positivity_min = pos_min;
    diag.wall_seconds = t0.elapsed().as_secs_f64();
    Ok((price, state, diag))
}
