//! Closed-form solutions of the continuous wave system, used as twin
//! observations.
//!
//! A mode `k` with coefficients `(a, b)` starts from `u = a sin(k pi x)`,
//! `p = b cos(k pi x)` and evolves as
//! `u = (a cos(k pi t) - b sin(k pi t)) sin(k pi x)`,
//! `p = (b cos(k pi t) + a sin(k pi t)) cos(k pi x)`.
//! `k = 0` is the steady state `u = 0`, `p = b`, which carries the mean of a
//! `p` initial condition.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::wave::State;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub k: u32,
    /// Sine coefficient of `u(x, 0)`.
    pub a: f64,
    /// Cosine coefficient of `p(x, 0)`.
    pub b: f64,
}

impl ModeSpec {
    pub fn new(k: u32, a: f64, b: f64) -> Self {
        ModeSpec { k, a, b }
    }

    /// The unit single mode `u = sin(k pi x)`, `p = cos(k pi x)`.
    pub fn unit(k: u32) -> Self {
        ModeSpec { k, a: 1.0, b: 1.0 }
    }

    pub fn eval(&self, x: f64, t: f64) -> (f64, f64) {
        let kappa = self.k as f64 * PI;
        let (st, ct) = (kappa * t).sin_cos();
        let (sx, cx) = (kappa * x).sin_cos();
        (
            (self.a * ct - self.b * st) * sx,
            (self.b * ct + self.a * st) * cx,
        )
    }
}

/// Unit mode `k` at `(x, t)`:
/// `u = -sqrt(2) sin(k pi t - pi/4) sin(k pi x)`,
/// `p = sqrt(2) cos(k pi t - pi/4) cos(k pi x)`.
pub fn exact_mode(k: u32, x: f64, t: f64) -> (f64, f64) {
    let kappa = k as f64 * PI;
    let phase = kappa * t - FRAC_PI_4;
    (
        -SQRT_2 * phase.sin() * (kappa * x).sin(),
        SQRT_2 * phase.cos() * (kappa * x).cos(),
    )
}

pub fn exact_superposition(modes: &[ModeSpec], x: f64, t: f64) -> (f64, f64) {
    modes.iter().fold((0.0, 0.0), |(u, p), m| {
        let (mu, mp) = m.eval(x, t);
        (u + mu, p + mp)
    })
}

/// Rejects repeated mode numbers and modes the grid cannot resolve.
pub fn validate_modes(modes: &[ModeSpec], grid: &GridSpec) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for m in modes {
        if !seen.insert(m.k) {
            return Err(Error::invalid(format!("mode k = {} listed twice", m.k)));
        }
        if m.k as usize > grid.n_cells() - 1 {
            return Err(Error::invalid(format!(
                "mode k = {} is not resolvable on {} cells",
                m.k,
                grid.n_cells()
            )));
        }
    }
    Ok(())
}

// 4-point Gauss-Legendre on [-1, 1].
const GL_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

fn integrate_unit(f: impl Fn(f64) -> f64, panels: usize) -> f64 {
    let w = 1.0 / panels as f64;
    (0..panels)
        .map(|c| {
            let mid = (c as f64 + 0.5) * w;
            GL_NODES
                .iter()
                .zip(&GL_WEIGHTS)
                .map(|(xi, wi)| wi * f(mid + 0.5 * w * xi))
                .sum::<f64>()
                * 0.5
                * w
        })
        .sum()
}

/// Sine coefficients of `u0` and cosine coefficients of `p0` for
/// `k = 1..=k_max`, plus a `k = 0` entry holding the mean of `p0` when it is
/// nonzero. Integrals use composite 4-point Gauss-Legendre on `panels`
/// equal cells.
pub fn project_initial(
    u0: impl Fn(f64) -> f64,
    p0: impl Fn(f64) -> f64,
    k_max: u32,
    panels: usize,
) -> Vec<ModeSpec> {
    let panels = panels.max(1);
    let mut modes = Vec::with_capacity(k_max as usize + 1);
    let mean = integrate_unit(&p0, panels);
    if mean != 0.0 {
        modes.push(ModeSpec::new(0, 0.0, mean));
    }
    for k in 1..=k_max {
        let kappa = k as f64 * PI;
        let a = 2.0 * integrate_unit(|x| u0(x) * (kappa * x).sin(), panels);
        let b = 2.0 * integrate_unit(|x| p0(x) * (kappa * x).cos(), panels);
        modes.push(ModeSpec::new(k, a, b));
    }
    modes
}

/// Exact fields on the model grid at every leapfrog level `0..=n_steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observations {
    pub grid: GridSpec,
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
}

impl Observations {
    pub fn n_levels(&self) -> usize {
        self.times.len()
    }

    pub fn state(&self, level: usize) -> State {
        State {
            u: self.u[level].clone(),
            p: self.p[level].clone(),
            t: self.times[level],
        }
    }

    /// The x -> 1 - x image of every level.
    pub fn mirrored(&self) -> Observations {
        let mut out = self.clone();
        for level in 0..self.n_levels() {
            let m = self.state(level).mirrored();
            out.u[level] = m.u;
            out.p[level] = m.p;
        }
        out
    }
}

/// Exact state sampled on the grid at time `t`; the boundary u-nodes are
/// pinned to zero.
pub fn sample_state(modes: &[ModeSpec], grid: &GridSpec, t: f64) -> State {
    let n = grid.n_cells();
    let mut u: Vec<f64> = (0..=n)
        .map(|i| exact_superposition(modes, grid.x_u(i), t).0)
        .collect();
    u[0] = 0.0;
    u[n] = 0.0;
    let p = (0..n)
        .map(|m| exact_superposition(modes, grid.x_p(m), t).1)
        .collect();
    State { u, p, t }
}

pub fn sample_observations(modes: &[ModeSpec], grid: &GridSpec) -> Observations {
    let times: Vec<f64> = (0..=grid.n_steps()).map(|n| grid.time(n)).collect();
    let mut u = Vec::with_capacity(times.len());
    let mut p = Vec::with_capacity(times.len());
    for &t in &times {
        let s = sample_state(modes, grid, t);
        u.push(s.u);
        p.push(s.p);
    }
    Observations {
        grid: *grid,
        times,
        u,
        p,
    }
}
