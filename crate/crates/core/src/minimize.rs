//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! Two-loop recursion for the search direction, initial inverse Hessian
//! `gamma I` with `gamma = s'y / y'y` from the newest pair, and a
//! bracketing/zoom line search with safeguarded cubic interpolation.
//! Nothing is randomized, so runs are bitwise reproducible.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{CostReport, Problem};
use crate::scheme::{BoundaryScheme, ControlVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeConfig {
    /// Number of stored `(s, y)` pairs.
    pub memory: usize,
    pub max_iters: usize,
    /// Stop when `|g| <= grad_tol * max(1, |g_0|)`.
    pub grad_tol: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Function evaluations allowed per line search.
    pub max_line_search: usize,
    /// Relative rounding noise of the cost. The line search does not trust
    /// changes in f smaller than `f_noise * |f|` and decides on slopes.
    #[serde(default = "default_f_noise")]
    pub f_noise: f64,
}

fn default_f_noise() -> f64 {
    1e-12
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        MinimizeConfig {
            memory: 8,
            max_iters: 500,
            grad_tol: 1e-8,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
            f_noise: default_f_noise(),
        }
    }
}

impl MinimizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory < 1 {
            return Err(Error::invalid("L-BFGS memory must be at least 1"));
        }
        for (name, v) in [("grad_tol", self.grad_tol), ("c1", self.c1), ("c2", self.c2)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.f_noise >= 0.0 && self.f_noise < 1.0) {
            return Err(Error::invalid(format!("f_noise must lie in [0, 1), got {}", self.f_noise)));
        }
        if self.c1 >= self.c2 {
            return Err(Error::invalid("need c1 < c2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    LineSearchFailed,
}

/// Line-search data of one accepted step, enough to check the strong Wolfe
/// conditions after the fact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptedStep {
    pub step: f64,
    pub f0: f64,
    /// Directional derivative at the start of the step.
    pub slope0: f64,
    pub f: f64,
    /// Directional derivative at the accepted point.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    /// Cost at the start and after every accepted step.
    pub cost_history: Vec<f64>,
    pub grad_norm_history: Vec<f64>,
    pub steps: Vec<AcceptedStep>,
    pub iterations: usize,
    pub n_evaluations: usize,
    pub termination: Termination,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn two_loop(grad: &[f64], hist: &VecDeque<Pair>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(hist.len());
    for pair in hist.iter().rev() {
        let a = pair.rho * dot(&pair.s, &q);
        q.iter_mut().zip(&pair.y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some(last) = hist.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for (pair, a) in hist.iter().zip(alphas.iter().rev()) {
        let b = pair.rho * dot(&pair.y, &q);
        q.iter_mut().zip(&pair.s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

#[derive(Clone)]
struct Sample {
    step: f64,
    f: f64,
    g: Vec<f64>,
    slope: f64,
}

/// Minimizer of the cubic through `(a, fa, da)` and `(b, fb, db)`, or `None`
/// when it does not exist.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    t.is_finite().then_some(t)
}

struct LineSearch<'a, F, E>
where
    F: FnMut(&[f64]) -> std::result::Result<(f64, Vec<f64>), E>,
{
    f: &'a mut F,
    x: &'a [f64],
    dir: &'a [f64],
    f0: f64,
    slope0: f64,
    c1: f64,
    c2: f64,
    /// Changes in f below this are rounding noise.
    noise: f64,
    budget: usize,
    evals: usize,
}

impl<F, E> LineSearch<'_, F, E>
where
    F: FnMut(&[f64]) -> std::result::Result<(f64, Vec<f64>), E>,
{
    fn sample(&mut self, step: f64) -> std::result::Result<Sample, E> {
        let trial: Vec<f64> = self.x.iter().zip(self.dir).map(|(x, d)| x + step * d).collect();
        let (f, g) = (self.f)(&trial)?;
        self.evals += 1;
        let f = if f.is_nan() { f64::INFINITY } else { f };
        let slope = dot(&g, self.dir);
        Ok(Sample { step, f, g, slope })
    }

    fn armijo_fails(&self, s: &Sample) -> bool {
        !(s.f <= self.f0 + self.c1 * s.step * self.slope0 + self.noise)
    }

    fn curvature_holds(&self, s: &Sample) -> bool {
        s.slope.abs() <= -self.c2 * self.slope0
    }

    fn run(&mut self, initial: f64) -> std::result::Result<Option<Sample>, E> {
        let mut prev = Sample {
            step: 0.0,
            f: self.f0,
            g: Vec::new(),
            slope: self.slope0,
        };
        let mut step = initial;
        let mut first = true;
        while self.evals < self.budget {
            let cur = self.sample(step)?;
            if self.armijo_fails(&cur) || (!first && cur.f > prev.f + self.noise) {
                return self.zoom(prev, cur);
            }
            if self.curvature_holds(&cur) {
                return Ok(Some(cur));
            }
            if cur.slope >= 0.0 {
                return self.zoom(cur, prev);
            }
            let next = cubic_min(prev.step, prev.f, prev.slope, cur.step, cur.f, cur.slope)
                .filter(|t| *t > cur.step)
                .unwrap_or(4.0 * cur.step);
            step = next.clamp(cur.step * 1.1, cur.step * 4.0);
            prev = cur;
            first = false;
        }
        Ok(None)
    }

    fn zoom(&mut self, mut lo: Sample, mut hi: Sample) -> std::result::Result<Option<Sample>, E> {
        while self.evals < self.budget {
            let width = hi.step - lo.step;
            if width.abs() <= 1e-16 * lo.step.abs().max(hi.step.abs()) {
                break;
            }
            let interp = if hi.f.is_finite() {
                cubic_min(lo.step, lo.f, lo.slope, hi.step, hi.f, hi.slope)
            } else {
                None
            };
            let (a, b) = if lo.step < hi.step {
                (lo.step + 0.1 * width.abs(), hi.step - 0.1 * width.abs())
            } else {
                (hi.step + 0.1 * width.abs(), lo.step - 0.1 * width.abs())
            };
            let step = interp.unwrap_or(0.5 * (lo.step + hi.step)).clamp(a, b);
            let cur = self.sample(step)?;
            if self.armijo_fails(&cur) || cur.f > lo.f + self.noise {
                hi = cur;
            } else {
                if self.curvature_holds(&cur) {
                    return Ok(Some(cur));
                }
                if cur.slope * (hi.step - lo.step) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
        }
        Ok(None)
    }
}

/// Minimize `f_and_grad` from `x0`.
///
/// The callback may return `+inf`, NaN or any large finite penalty for
/// inadmissible points; the line search treats them as rejected trial steps
/// and backtracks. Errors from the callback abort the run.
pub fn lbfgs<F, E>(
    mut f_and_grad: F,
    x0: &[f64],
    cfg: &MinimizeConfig,
) -> std::result::Result<LbfgsResult, E>
where
    F: FnMut(&[f64]) -> std::result::Result<(f64, Vec<f64>), E>,
{
    let mut x = x0.to_vec();
    let (mut f, mut g) = f_and_grad(&x)?;
    let mut n_evaluations = 1;
    let g0 = norm(&g);
    let threshold = cfg.grad_tol * g0.max(1.0);
    let mut cost_history = vec![f];
    let mut grad_norm_history = vec![g0];
    let mut hist: VecDeque<Pair> = VecDeque::with_capacity(cfg.memory);
    let mut steps = Vec::new();
    let mut iterations = 0;

    let termination = loop {
        if norm(&g) <= threshold {
            break Termination::GradientTolerance;
        }
        if iterations >= cfg.max_iters {
            break Termination::MaxIterations;
        }
        let mut dir = two_loop(&g, &hist);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            hist.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }
        let initial = if hist.is_empty() {
            (1.0 / norm(&dir)).min(1.0)
        } else {
            1.0
        };
        let mut ls = LineSearch {
            f: &mut f_and_grad,
            x: &x,
            dir: &dir,
            f0: f,
            slope0: slope,
            c1: cfg.c1,
            c2: cfg.c2,
            noise: cfg.f_noise * f.abs(),
            budget: cfg.max_line_search,
            evals: 0,
        };
        let accepted = ls.run(initial)?;
        n_evaluations += ls.evals;
        let Some(sample) = accepted else {
            break Termination::LineSearchFailed;
        };
        let s: Vec<f64> = dir.iter().map(|d| sample.step * d).collect();
        let y: Vec<f64> = sample.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        steps.push(AcceptedStep {
            step: sample.step,
            f0: f,
            slope0: slope,
            f: sample.f,
            slope: sample.slope,
        });
        x.iter_mut().zip(&s).for_each(|(xi, si)| *xi += si);
        f = sample.f;
        g = sample.g;
        iterations += 1;
        cost_history.push(f);
        grad_norm_history.push(norm(&g));
        if sy > f64::EPSILON * norm(&s) * norm(&y) {
            if hist.len() == cfg.memory {
                hist.pop_front();
            }
            hist.push_back(Pair { s, y, rho: 1.0 / sy });
        }
    };

    Ok(LbfgsResult {
        x,
        f,
        grad: g,
        cost_history,
        grad_norm_history,
        steps,
        iterations,
        n_evaluations,
        termination,
    })
}

/// Outcome of fitting boundary coefficients to observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub alpha_start: BoundaryScheme,
    pub alpha_opt: BoundaryScheme,
    pub cost_history: Vec<f64>,
    pub grad_norm_history: Vec<f64>,
    pub iterations: usize,
    pub n_evaluations: usize,
    pub termination: Termination,
    pub final_report: CostReport,
}

/// Minimize the assimilation cost of `problem` starting from `start`.
pub fn assimilate(
    problem: &Problem,
    start: &BoundaryScheme,
    cfg: &MinimizeConfig,
) -> Result<OptimResult> {
    cfg.validate()?;
    if start.j() != problem.j {
        return Err(Error::invalid(format!(
            "starting scheme has J = {}, problem has J = {}",
            start.j(),
            problem.j
        )));
    }
    let x0 = start.to_control();
    let run = lbfgs(
        |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let (report, grad) = problem.evaluate(&ControlVector(x.to_vec()))?;
            Ok((report.total, grad.0))
        },
        &x0.0,
        cfg,
    )?;
    let alpha_opt = BoundaryScheme::from_control(problem.j, &ControlVector(run.x.clone()))?;
    let (final_report, _) = problem.evaluate(&ControlVector(run.x))?;
    Ok(OptimResult {
        alpha_start: start.clone(),
        alpha_opt,
        cost_history: run.cost_history,
        grad_norm_history: run.grad_norm_history,
        iterations: run.iterations,
        n_evaluations: run.n_evaluations,
        termination: run.termination,
        final_report,
    })
}
