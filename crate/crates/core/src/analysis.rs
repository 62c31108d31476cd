//! Closed-form dispersion predictions and error diagnostics.
//!
//! Every formula takes the integer mode number `k` and works with the
//! angular wavenumber `kappa = k pi`. The `beta` functions return the ratio
//! between the coefficient a discrete scheme effectively applies to the
//! exact mode and the exact coefficient 1; `beta - 1` is the velocity error.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{sample_state, ModeSpec};
use crate::grid::GridSpec;
use crate::wave::Trajectory;

fn kappa(k: u32) -> f64 {
    k as f64 * PI
}

fn guard_nonzero(v: f64, what: &str) -> Result<f64> {
    if v.abs() < 1e-12 || !v.is_finite() {
        Err(Error::invalid(format!("{what} vanishes")))
    } else {
        Ok(v)
    }
}

/// `h sin(kappa tau) / (2 tau sin(kappa h / 2))` for leapfrog with the
/// second-order staggered stencil.
pub fn beta2(k: u32, h: f64, tau: f64) -> Result<f64> {
    let kp = kappa(k);
    let s = guard_nonzero((kp * h / 2.0).sin(), "sin(kappa h / 2)")?;
    Ok(h * (kp * tau).sin() / (2.0 * tau * s))
}

/// `12 h sin(kappa tau) / (27 tau sin(kappa h/2) - tau sin(3 kappa h/2))`
/// for leapfrog with the fourth-order staggered stencil.
pub fn beta4(k: u32, h: f64, tau: f64) -> Result<f64> {
    let kp = kappa(k);
    let s = guard_nonzero(
        27.0 * (kp * h / 2.0).sin() - (3.0 * kp * h / 2.0).sin(),
        "fourth-order symbol",
    )?;
    Ok(12.0 * h * (kp * tau).sin() / (tau * s))
}

/// Length of each boundary cell, relative to `h`, that makes a wave of
/// speed `beta` cross the grid in unit time: `1 - (N/2)(beta - 1)/beta`.
pub fn h_modified_ratio(n_cells: usize, beta: f64) -> f64 {
    1.0 - 0.5 * n_cells as f64 * (beta - 1.0) / beta
}

/// Predicted factor on `(u_1 - u_0)/h` at the half-node 1/2.
pub fn predicted_c_u(n_cells: usize, beta: f64) -> f64 {
    1.0 / h_modified_ratio(n_cells, beta)
}

/// Predicted factor on `(p_{3/2} - p_{1/2})/h` at node 1, whose stencil
/// spans half of the modified cell.
pub fn predicted_c_p(n_cells: usize, beta: f64) -> f64 {
    2.0 / (h_modified_ratio(n_cells, beta) + 1.0)
}

/// Slope of the line of `(alpha_p_0, alpha_p_1)` pairs giving the same
/// derivative of `cos(k pi x)` at node 1: `-1 / (4 cos^2(k pi h / 2) - 3)`.
pub fn kernel_tangent(k: u32, h: f64) -> f64 {
    let c = (kappa(k) * h / 2.0).cos();
    -1.0 / (4.0 * c * c - 3.0)
}

/// Time for the numerical mode to fall one full period behind (or ahead
/// of) the exact one: `(2/k) / |beta - 1|`.
pub fn t_shift(k: u32, beta: f64) -> f64 {
    (2.0 / k as f64) / (beta - 1.0).abs()
}

fn c_denominator(kappa: f64, h: f64, tau: f64) -> f64 {
    (h * h - h / 2.0) * (kappa * tau).sin() + tau * (kappa * h / 2.0).sin()
}

/// Predicted `(du/dx)_{1/2}` factor for a mode of angular wavenumber
/// `kappa` under the second-order scheme:
/// `h^2 sin(kappa tau) / ((h^2 - h/2) sin(kappa tau) + tau sin(kappa h/2))`.
pub fn second_order_c(kappa: f64, h: f64, tau: f64) -> f64 {
    h * h * (kappa * tau).sin() / c_denominator(kappa, h, tau)
}

/// Smallest angular wavenumber in `(0, pi/h)` where the denominator of
/// [`second_order_c`] changes sign. Beyond it the compensating `du/dx`
/// factor is negative, which the scheme cannot use stably.
pub fn second_order_c_singularity(h: f64, tau: f64) -> Result<f64> {
    let upper = PI / h;
    let samples = 20_000;
    let step = upper / samples as f64;
    let mut lo = step;
    let mut f_lo = c_denominator(lo, h, tau);
    for i in 2..samples {
        let hi = i as f64 * step;
        let f_hi = c_denominator(hi, h, tau);
        if f_lo == 0.0 {
            return Ok(lo);
        }
        if f_lo.signum() != f_hi.signum() {
            let (mut a, mut b, mut fa) = (lo, hi, f_lo);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                let fm = c_denominator(mid, h, tau);
                if fm == 0.0 || (b - a) <= 4.0 * f64::EPSILON * mid {
                    return Ok(mid);
                }
                if fm.signum() == fa.signum() {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            return Ok(0.5 * (a + b));
        }
        lo = hi;
        f_lo = f_hi;
    }
    Err(Error::NoRoot(format!(
        "denominator keeps its sign on (0, pi/h) for h = {h}, tau = {tau}"
    )))
}

/// Theory for one mode on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionReport {
    pub k: u32,
    pub beta2: f64,
    pub beta4: f64,
    /// `h_modified / h` from `beta2`.
    pub h_mod_ratio: f64,
    pub c_u: f64,
    pub c_p: f64,
    /// Period-slip time of the second-order scheme.
    pub t_shift: f64,
    pub kernel_tangent: f64,
}

pub fn dispersion_report(k: u32, grid: &GridSpec) -> Result<DispersionReport> {
    let (h, tau, n) = (grid.h(), grid.tau(), grid.n_cells());
    let b2 = beta2(k, h, tau)?;
    Ok(DispersionReport {
        k,
        beta2: b2,
        beta4: beta4(k, h, tau)?,
        h_mod_ratio: h_modified_ratio(n, b2),
        c_u: predicted_c_u(n, b2),
        c_p: predicted_c_p(n, b2),
        t_shift: t_shift(k, b2),
        kernel_tangent: kernel_tangent(k, h),
    })
}

/// Error norm `xi(t)` between a trajectory and the exact solution at every
/// stored level.
///
/// `xi` is the plain sum of squared differences over all grid points
/// (u-nodes and p half-nodes), i.e. `N` times the `h`-weighted norm. On this
/// scale a single unit mode that is exactly half a period out of phase gives
/// `xi = 4N`.
pub fn xi_series(traj: &Trajectory, modes: &[ModeSpec], grid: &GridSpec) -> Vec<(f64, f64)> {
    traj.states
        .iter()
        .enumerate()
        .map(|(lvl, s)| {
            let t = grid.time(lvl);
            let e = sample_state(modes, grid, t);
            let v: f64 = s
                .u
                .iter()
                .zip(&e.u)
                .chain(s.p.iter().zip(&e.p))
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            (t, v)
        })
        .collect()
}

/// Ordinary least-squares line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square vertical residual.
    pub residual: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension {
            what: "fit ordinates",
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::invalid("a line fit needs at least two points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(Error::invalid("all abscissae coincide"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    Ok(LineFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
    })
}

/// Least-squares line through `(alpha_p_0, alpha_p_1)` pairs.
pub fn fit_kernel_line(points: &[(f64, f64)]) -> Result<LineFit> {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    linear_fit(&xs, &ys)
}
