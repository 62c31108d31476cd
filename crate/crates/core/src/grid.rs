//! Spatial and temporal discretization of the unit interval.
//!
//! `u` lives on the nodes `x_i = i h`, `i = 0..=N`; `p` lives on the
//! half-nodes `x_{i-1/2} = i h - h/2`, `i = 1..=N`. In storage, `p[m]` holds
//! `p_{m+1/2}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n_cells: usize,
    h: f64,
    tau: f64,
    n_steps: usize,
}

impl GridSpec {
    /// `n_steps` is the index of the last stored time level, so a trajectory
    /// holds `n_steps + 1` states at `t = 0, tau, ..., n_steps * tau`.
    pub fn new(n_cells: usize, tau: f64, n_steps: usize) -> Result<Self> {
        if n_cells < 3 {
            return Err(Error::invalid(format!(
                "need at least 3 cells, got {n_cells}"
            )));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::invalid(format!("tau must be positive, got {tau}")));
        }
        if n_steps == 0 {
            return Err(Error::invalid("n_steps must be positive"));
        }
        let grid = GridSpec {
            n_cells,
            h: 1.0 / n_cells as f64,
            tau,
            n_steps,
        };
        if grid.cfl() > 1.0 {
            log::warn!(
                "tau/h = {:.4} exceeds 1; leapfrog is not stable for unit wave speed",
                grid.cfl()
            );
        }
        Ok(grid)
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn cfl(&self) -> f64 {
        self.tau / self.h
    }

    /// Same spatial grid and time step, different horizon.
    pub fn with_steps(&self, n_steps: usize) -> Result<Self> {
        GridSpec::new(self.n_cells, self.tau, n_steps)
    }

    pub fn u_len(&self) -> usize {
        self.n_cells + 1
    }

    pub fn p_len(&self) -> usize {
        self.n_cells
    }

    /// Position of u-node `i`.
    pub fn x_u(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    /// Position of p-storage index `m`, i.e. of `p_{m+1/2}`.
    pub fn x_p(&self, m: usize) -> f64 {
        (m as f64 + 0.5) * self.h
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.tau
    }

    /// Number of whole steps in `t`, rejecting windows that are not a
    /// multiple of tau.
    pub fn steps_in(&self, t: f64) -> Result<usize> {
        let steps = (t / self.tau).round();
        if steps < 1.0 || ((steps * self.tau) - t).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(Error::invalid(format!(
                "time {t} is not a positive multiple of tau = {}",
                self.tau
            )));
        }
        Ok(steps as usize)
    }
}
