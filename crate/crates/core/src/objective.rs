//! Misfit cost over an assimilation window, the sum-to-zero penalty on the
//! boundary stencils, and their gradients.

use serde::{Deserialize, Serialize};

use crate::adjoint::misfit_gradient;
use crate::error::{check_len, Error, Result};
use crate::exact::Observations;
use crate::grid::GridSpec;
use crate::scheme::{BoundaryScheme, CoefficientGroup, ControlVector, InteriorStencil};
use crate::wave::{integrate, State};

/// Cost reported when the forward model blows up inside the window.
pub const BLOWUP_PENALTY: f64 = 1e12;

/// Trapezoid weights for levels `0..=last`: `tau/2` at both ends, `tau`
/// in between.
pub fn time_weights(last: usize, tau: f64) -> Vec<f64> {
    if last == 0 {
        return vec![0.0];
    }
    let mut w = vec![tau; last + 1];
    w[0] = 0.5 * tau;
    w[last] = 0.5 * tau;
    w
}

/// Discrete `int_0^1 (du^2 + dp^2) dx` with weight `h` on every half-node
/// and interior node; boundary u-nodes carry no weight.
pub fn state_norm2(du: &[f64], dp: &[f64], grid: &GridSpec) -> Result<f64> {
    check_len("du", grid.u_len(), du.len())?;
    check_len("dp", grid.p_len(), dp.len())?;
    Ok(norm2_unchecked(du, dp, grid.h()))
}

fn norm2_unchecked(du: &[f64], dp: &[f64], h: f64) -> f64 {
    let n = dp.len();
    let su: f64 = du[1..n].iter().map(|v| v * v).sum();
    let sp: f64 = dp.iter().map(|v| v * v).sum();
    h * (su + sp)
}

/// `state_norm2` of `(u - u_ref, p - p_ref)` without allocating.
pub fn distance2(u: &[f64], p: &[f64], u_ref: &[f64], p_ref: &[f64], h: f64) -> f64 {
    let n = p.len();
    let su: f64 = (1..n).map(|i| (u[i] - u_ref[i]).powi(2)).sum();
    let sp: f64 = p.iter().zip(p_ref).map(|(x, y)| (x - y).powi(2)).sum();
    h * (su + sp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    /// Number of leapfrog levels after t = 0 inside the window; the window
    /// length is `window_steps * tau`.
    pub window_steps: usize,
    pub eta: f64,
    pub groups_regularized: Vec<CoefficientGroup>,
}

impl CostConfig {
    pub fn new(window_steps: usize, eta: f64) -> Result<Self> {
        if window_steps == 0 {
            return Err(Error::invalid("assimilation window must be at least one step"));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::invalid(format!("eta must be non-negative, got {eta}")));
        }
        Ok(CostConfig {
            window_steps,
            eta,
            groups_regularized: CoefficientGroup::ALL.to_vec(),
        })
    }

    pub fn from_window_time(t_window: f64, eta: f64, grid: &GridSpec) -> Result<Self> {
        CostConfig::new(grid.steps_in(t_window)?, eta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub total: f64,
    pub misfit: f64,
    pub regularization: f64,
    /// `state_norm2` of the misfit at each level of the window.
    pub xi: Vec<f64>,
    pub diverged: bool,
}

/// `eta * sum_groups (sum_j alpha_j)^2` and its gradient.
pub fn regularization(bs: &BoundaryScheme, cfg: &CostConfig) -> (f64, ControlVector) {
    let layout = bs.layout();
    let mut grad = ControlVector::zeros(layout.len());
    let mut value = 0.0;
    if cfg.eta == 0.0 {
        return (value, grad);
    }
    for &group in &cfg.groups_regularized {
        let sum: f64 = bs.group(group).iter().sum();
        value += cfg.eta * sum * sum;
        for j in 0..=layout.j() {
            grad.0[layout.index(group, j)] += 2.0 * cfg.eta * sum;
        }
    }
    (value, grad)
}

/// Total cost and gradient for boundary coefficients `bs`.
///
/// A diverging forward run yields `total = BLOWUP_PENALTY` and a zero
/// gradient rather than an error.
pub fn evaluate(
    bs: &BoundaryScheme,
    cfg: &CostConfig,
    obs: &Observations,
    ic: &State,
    stencil: &InteriorStencil,
    grid: &GridSpec,
) -> Result<(CostReport, ControlVector)> {
    let window = grid.with_steps(cfg.window_steps)?;
    if obs.n_levels() < cfg.window_steps + 1 {
        return Err(Error::Dimension {
            what: "observation levels",
            expected: cfg.window_steps + 1,
            got: obs.n_levels(),
        });
    }
    let traj = match integrate(ic, stencil, bs, &window) {
        Ok(t) => t,
        Err(Error::Diverged { .. }) => {
            return Ok((
                CostReport {
                    total: BLOWUP_PENALTY,
                    misfit: BLOWUP_PENALTY,
                    regularization: 0.0,
                    xi: Vec::new(),
                    diverged: true,
                },
                ControlVector::zeros(bs.layout().len()),
            ))
        }
        Err(e) => return Err(e),
    };
    let weights = time_weights(cfg.window_steps, window.tau());
    let xi: Vec<f64> = traj
        .states
        .iter()
        .enumerate()
        .map(|(lvl, s)| distance2(&s.u, &s.p, &obs.u[lvl], &obs.p[lvl], window.h()))
        .collect();
    let misfit: f64 = xi.iter().zip(&weights).map(|(x, w)| x * w).sum();
    let mut grad = misfit_gradient(&traj, obs, stencil, bs, &window)?;
    let (reg, reg_grad) = regularization(bs, cfg);
    for (g, r) in grad.0.iter_mut().zip(&reg_grad.0) {
        *g += r;
    }
    Ok((
        CostReport {
            total: misfit + reg,
            misfit,
            regularization: reg,
            xi,
            diverged: false,
        },
        grad,
    ))
}

/// Everything the minimizer needs to evaluate the cost at a control vector.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: GridSpec,
    pub stencil: InteriorStencil,
    pub ic: State,
    pub obs: Observations,
    pub cost: CostConfig,
    /// Boundary stencil width minus one.
    pub j: usize,
}

impl Problem {
    pub fn n_controls(&self) -> usize {
        4 * (self.j + 1)
    }

    pub fn evaluate(&self, alpha: &ControlVector) -> Result<(CostReport, ControlVector)> {
        let bs = BoundaryScheme::from_control(self.j, alpha)?;
        evaluate(&bs, &self.cost, &self.obs, &self.ic, &self.stencil, &self.grid)
    }
}

/// Central-difference gradient of `problem` at `alpha` with per-component
/// step `step * max(1, |alpha_i|)`.
pub fn finite_difference_gradient(
    problem: &Problem,
    alpha: &ControlVector,
    step: f64,
) -> Result<ControlVector> {
    if !(step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let mut g = Vec::with_capacity(alpha.len());
    for i in 0..alpha.len() {
        let d = step * alpha.0[i].abs().max(1.0);
        let mut plus = alpha.clone();
        plus.0[i] += d;
        let mut minus = alpha.clone();
        minus.0[i] -= d;
        let fp = problem.evaluate(&plus)?.0.total;
        let fm = problem.evaluate(&minus)?.0.total;
        g.push((fp - fm) / (2.0 * d));
    }
    Ok(ControlVector(g))
}
