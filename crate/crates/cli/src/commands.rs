//! The five experiment commands. Each one reads an [`ExperimentConfig`],
//! writes its files under `cfg.out` and returns a summary of what it found.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use wavebound::adjoint::dot_product_residual;
use wavebound::analysis::{
    dispersion_report, fit_kernel_line, second_order_c, second_order_c_singularity, xi_series,
    DispersionReport, LineFit,
};
use wavebound::exact::{sample_observations, ModeSpec, Observations};
use wavebound::minimize::{assimilate, Termination};
use wavebound::objective::{finite_difference_gradient, CostConfig, Problem};
use wavebound::wave::integrate;
use wavebound::{
    BoundaryScheme, ControlVector, Error as CoreError, GridSpec, InteriorStencil, State,
};

use crate::config::ExperimentConfig;

/// Grid, stencil and initial data shared by every command.
pub struct Setup {
    pub grid: GridSpec,
    pub stencil: InteriorStencil,
    pub modes: Vec<ModeSpec>,
    pub ic: State,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.grid()?;
        let modes = cfg.initial.modes();
        let ic = wavebound::exact::sample_state(&modes, &grid, 0.0);
        Ok(Setup {
            grid,
            stencil: cfg.stencil()?,
            modes,
            ic,
        })
    }

    /// Assimilation problem over the first `window` steps.
    pub fn problem(&self, cfg: &ExperimentConfig, window: usize) -> Result<Problem> {
        let wgrid = self.grid.with_steps(window)?;
        Ok(Problem {
            grid: wgrid,
            stencil: self.stencil,
            ic: self.ic.clone(),
            obs: sample_observations(&self.modes, &wgrid),
            cost: CostConfig::new(window, cfg.eta)?,
            j: cfg.j,
        })
    }

    /// `xi(t)` over the full horizon, or `None` if the run blows up.
    pub fn xi(&self, bs: &BoundaryScheme) -> Result<Option<Vec<(f64, f64)>>> {
        match integrate(&self.ic, &self.stencil, bs, &self.grid) {
            Ok(traj) => Ok(Some(xi_series(&traj, &self.modes, &self.grid))),
            Err(CoreError::Diverged { step, t, .. }) => {
                log::warn!("forward run diverged at step {step} (t = {t})");
                Ok(None)
            }
            Err(e) => Err(e.into()),
        }
    }
}

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    Ok(&cfg.out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardSummary {
    pub xi_peak: f64,
    pub t_peak: f64,
    /// Smallest `xi` after the peak.
    pub xi_min_after_peak: f64,
    pub t_min_after_peak: f64,
}

/// Peak of `xi` and the smallest value that follows it.
pub fn peak_and_trough(xi: &[(f64, f64)]) -> ForwardSummary {
    let (ipk, &(t_peak, xi_peak)) = xi
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, &(f64, f64))>, (i, p)| match best {
            Some((_, b)) if b.1 >= p.1 => best,
            _ => Some((i, p)),
        })
        .unwrap_or((0, &(0.0, 0.0)));
    let &(t_min, xi_min) = xi[ipk..]
        .iter()
        .fold(None, |best: Option<&(f64, f64)>, p| match best {
            Some(b) if b.1 <= p.1 => best,
            _ => Some(p),
        })
        .unwrap_or(&(t_peak, xi_peak));
    ForwardSummary {
        xi_peak,
        t_peak,
        xi_min_after_peak: xi_min,
        t_min_after_peak: t_min,
    }
}

/// Run the classical scheme; writes `xi.csv`, `error_xt.csv` and
/// `forward.json`.
pub fn cmd_forward(cfg: &ExperimentConfig) -> Result<ForwardSummary> {
    let setup = Setup::new(cfg)?;
    let dir = out_dir(cfg)?;
    let bs = BoundaryScheme::classical(cfg.j)?;
    let traj = integrate(&setup.ic, &setup.stencil, &bs, &setup.grid)?;
    let xi = xi_series(&traj, &setup.modes, &setup.grid);

    let mut w = csv_writer(&dir.join("xi.csv"))?;
    w.write_record(["t", "xi"])?;
    for (t, v) in &xi {
        w.write_record([t.to_string(), v.to_string()])?;
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("error_xt.csv"))?;
    w.write_record(["t", "x", "u_error"])?;
    for (lvl, s) in traj.states.iter().enumerate().step_by(cfg.xt_stride) {
        let t = setup.grid.time(lvl);
        let exact = wavebound::exact::sample_state(&setup.modes, &setup.grid, t);
        for (i, (a, b)) in s.u.iter().zip(&exact.u).enumerate() {
            w.write_record([t.to_string(), setup.grid.x_u(i).to_string(), (a - b).to_string()])?;
        }
    }
    w.flush()?;

    let summary = peak_and_trough(&xi);
    write_json(&dir.join("forward.json"), &summary)?;
    Ok(summary)
}

/// Boundary factors as the leading coefficient of each stencil, which for
/// `J = 1` is the whole story since the other node is pinned or in the
/// kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveredFactors {
    pub c_u_left: f64,
    pub c_u_right: f64,
    pub alpha_p_left: (f64, f64),
    pub alpha_p_right: (f64, f64),
}

impl RecoveredFactors {
    fn of(bs: &BoundaryScheme) -> Self {
        RecoveredFactors {
            c_u_left: bs.alpha_u[1],
            c_u_right: bs.alpha_u_tilde[1],
            alpha_p_left: (bs.alpha_p[0], bs.alpha_p[1]),
            alpha_p_right: (bs.alpha_p_tilde[0], bs.alpha_p_tilde[1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssimilationResult {
    pub name: String,
    pub order: u32,
    pub j: usize,
    pub eta: f64,
    pub window_steps: usize,
    pub t_window: f64,
    pub alpha_start: BoundaryScheme,
    pub alpha_opt: BoundaryScheme,
    pub recovered: RecoveredFactors,
    /// Theory for every travelling mode of the initial data.
    pub predicted: Vec<DispersionReport>,
    pub cost_history: Vec<f64>,
    pub grad_norm_history: Vec<f64>,
    pub iterations: usize,
    pub n_evaluations: usize,
    pub termination: Termination,
    pub final_cost: f64,
    pub final_misfit: f64,
    pub final_regularization: f64,
    /// Mean of `xi` over the levels after the window, `None` if the
    /// identified scheme blew up over the long run.
    pub post_window_xi_mean: Option<f64>,
    pub post_window_xi_max: Option<f64>,
    pub classical_post_window_xi_mean: f64,
}

/// One assimilation from the classical scheme over `window` steps.
pub fn assimilate_window(
    cfg: &ExperimentConfig,
    setup: &Setup,
    window: usize,
) -> Result<wavebound::minimize::OptimResult> {
    let problem = setup.problem(cfg, window)?;
    let start = BoundaryScheme::classical(cfg.j)?;
    Ok(assimilate(&problem, &start, &cfg.minimizer)?)
}

/// Fit boundary coefficients over the configured window, then rerun both
/// the classical and the identified scheme over the full horizon. Writes
/// `result.json` and `xi.csv` (`t, xi_assimilated, xi_classical`).
pub fn cmd_assimilate(cfg: &ExperimentConfig) -> Result<AssimilationResult> {
    let setup = Setup::new(cfg)?;
    let dir = out_dir(cfg)?;
    let opt = assimilate_window(cfg, &setup, cfg.window_steps)?;
    let classical = setup
        .xi(&opt.alpha_start)?
        .context("the classical scheme diverged")?;
    let assimilated = setup.xi(&opt.alpha_opt)?;
    let start = cfg.window_steps;
    fn post(xi: &[(f64, f64)], start: usize) -> &[(f64, f64)] {
        &xi[start.min(xi.len() - 1)..]
    }

    let mut w = csv_writer(&dir.join("xi.csv"))?;
    w.write_record(["t", "xi_assimilated", "xi_classical"])?;
    for (lvl, (t, c)) in classical.iter().enumerate() {
        let a = assimilated.as_ref().map_or(f64::NAN, |x| x[lvl].1);
        w.write_record([t.to_string(), a.to_string(), c.to_string()])?;
    }
    w.flush()?;

    let predicted = setup
        .modes
        .iter()
        .filter(|m| m.k > 0)
        .map(|m| dispersion_report(m.k, &setup.grid))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let result = AssimilationResult {
        name: cfg.name.clone(),
        order: cfg.order,
        j: cfg.j,
        eta: cfg.eta,
        window_steps: cfg.window_steps,
        t_window: setup.grid.time(cfg.window_steps),
        recovered: RecoveredFactors::of(&opt.alpha_opt),
        alpha_start: opt.alpha_start,
        alpha_opt: opt.alpha_opt,
        predicted,
        cost_history: opt.cost_history,
        grad_norm_history: opt.grad_norm_history,
        iterations: opt.iterations,
        n_evaluations: opt.n_evaluations,
        termination: opt.termination,
        final_cost: opt.final_report.total,
        final_misfit: opt.final_report.misfit,
        final_regularization: opt.final_report.regularization,
        post_window_xi_mean: assimilated.as_ref().map(|x| mean(post(x, start).iter().map(|p| p.1))),
        post_window_xi_max: assimilated
            .as_ref()
            .map(|x| post(x, start).iter().map(|p| p.1).fold(0.0, f64::max)),
        classical_post_window_xi_mean: mean(post(&classical, start).iter().map(|p| p.1)),
    };
    write_json(&dir.join("result.json"), &result)?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub window_steps: usize,
    pub t_window: f64,
    pub final_cost: f64,
    pub termination: Termination,
    pub alpha: BoundaryScheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub points: Vec<SweepPoint>,
    /// Least-squares line through the left `(alpha_p_0, alpha_p_1)` pairs.
    pub kernel_line: LineFit,
    /// Predicted slope for each travelling mode.
    pub predicted_tangents: Vec<(u32, f64)>,
    pub alpha_p0_range: (f64, f64),
    pub c_u_range: (f64, f64),
}

fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

/// One assimilation per window of `cfg.sweep`, run in parallel. Writes
/// `alphas.csv` and `kernel_line.json`.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<SweepSummary> {
    let setup = Setup::new(cfg)?;
    let dir = out_dir(cfg)?;
    let points = cfg
        .sweep
        .windows()
        .into_par_iter()
        .map(|window| {
            let opt = assimilate_window(cfg, &setup, window)?;
            Ok(SweepPoint {
                window_steps: window,
                t_window: setup.grid.time(window),
                final_cost: opt.final_report.total,
                termination: opt.termination,
                alpha: opt.alpha_opt,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut w = csv_writer(&dir.join("alphas.csv"))?;
    let mut header = vec!["window_steps".to_string(), "t_window".into(), "final_cost".into()];
    for (prefix, _) in groups(&points[0].alpha) {
        for k in 0..=cfg.j {
            header.push(format!("{prefix}{k}"));
        }
    }
    w.write_record(&header)?;
    for p in &points {
        let mut row = vec![
            p.window_steps.to_string(),
            p.t_window.to_string(),
            p.final_cost.to_string(),
        ];
        for (_, coeffs) in groups(&p.alpha) {
            row.extend(coeffs.iter().map(|c| c.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;

    let pairs: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.alpha.alpha_p[0], p.alpha.alpha_p[1]))
        .collect();
    let kernel_line = if pairs.len() >= 2 {
        fit_kernel_line(&pairs)?
    } else {
        LineFit {
            slope: f64::NAN,
            intercept: f64::NAN,
            residual: f64::NAN,
        }
    };
    let summary = SweepSummary {
        kernel_line,
        predicted_tangents: setup
            .modes
            .iter()
            .filter(|m| m.k > 0)
            .map(|m| (m.k, wavebound::analysis::kernel_tangent(m.k, setup.grid.h())))
            .collect(),
        alpha_p0_range: range(pairs.iter().map(|p| p.0)),
        c_u_range: range(
            points
                .iter()
                .flat_map(|p| [p.alpha.alpha_u[1], p.alpha.alpha_u_tilde[1]]),
        ),
        points,
    };
    write_json(&dir.join("kernel_line.json"), &summary)?;
    Ok(summary)
}

fn groups(bs: &BoundaryScheme) -> [(&'static str, &[f64]); 4] {
    [
        ("alpha_u_", &bs.alpha_u),
        ("alpha_u_tilde_", &bs.alpha_u_tilde),
        ("alpha_p_", &bs.alpha_p),
        ("alpha_p_tilde_", &bs.alpha_p_tilde),
    ]
}

/// Per-component comparison of adjoint and finite-difference gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradRow {
    pub index: usize,
    pub adjoint: f64,
    pub finite_difference: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub dot_residuals: Vec<f64>,
    pub rows: Vec<GradRow>,
    pub max_rel_error: f64,
    pub grad_norm: f64,
    pub twin: bool,
    pub passed: bool,
}

/// Tolerance on the per-component relative gradient error.
pub const GRADCHECK_TOL: f64 = 1e-5;

/// `|a - f| / max(|a|, |f|, 1e-6 max_i |a_i|)`: relative per component,
/// except that components six orders below the largest one (such as the
/// coefficient of the pinned boundary node, which is exactly zero) are
/// compared on that floor, above the round-off of the differences.
pub fn relative_errors(adjoint: &[f64], fd: &[f64]) -> Vec<f64> {
    let scale = adjoint.iter().fold(0.0_f64, |m, a| m.max(a.abs())) * 1e-6;
    adjoint
        .iter()
        .zip(fd)
        .map(|(a, f)| {
            let d = a.abs().max(f.abs()).max(scale);
            if d == 0.0 {
                0.0
            } else {
                (a - f).abs() / d
            }
        })
        .collect()
}

/// Observations produced by the discrete model itself, so that the misfit
/// of `bs` is exactly zero.
pub fn model_twin(problem: &Problem, bs: &BoundaryScheme) -> Result<Observations> {
    let traj = integrate(&problem.ic, &problem.stencil, bs, &problem.grid)?;
    Ok(Observations {
        grid: problem.grid,
        times: traj.states.iter().map(|s| s.t).collect(),
        u: traj.states.iter().map(|s| s.u.clone()).collect(),
        p: traj.states.iter().map(|s| s.p.clone()).collect(),
    })
}

/// Dot-product test on 20 seeded random pairs and an adjoint-versus-central
/// difference table at the classical scheme. With `twin`, observations come
/// from the model and the report checks that the gradient vanishes instead.
pub fn cmd_gradcheck(cfg: &ExperimentConfig, twin: bool) -> Result<GradcheckReport> {
    let setup = Setup::new(cfg)?;
    let dir = out_dir(cfg)?;
    let mut problem = setup.problem(cfg, cfg.window_steps)?;
    let bs = BoundaryScheme::classical(cfg.j)?;
    if twin {
        problem.obs = model_twin(&problem, &bs)?;
    }
    let alpha = bs.to_control();

    let traj = integrate(&problem.ic, &problem.stencil, &bs, &problem.grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut dot_residuals = Vec::with_capacity(20);
    for _ in 0..20 {
        let d = ControlVector((0..alpha.len()).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let forcing: Vec<State> = traj
            .states
            .iter()
            .map(|s| State {
                u: (0..s.u.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                p: (0..s.p.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                t: s.t,
            })
            .collect();
        dot_residuals.push(dot_product_residual(
            &traj,
            &d,
            &forcing,
            &problem.stencil,
            &bs,
            &problem.grid,
        )?);
    }

    let (_, grad) = problem.evaluate(&alpha)?;
    let fd = finite_difference_gradient(&problem, &alpha, 1e-5)?;
    let rel = relative_errors(&grad.0, &fd.0);
    let rows: Vec<GradRow> = (0..alpha.len())
        .map(|i| GradRow {
            index: i,
            adjoint: grad.0[i],
            finite_difference: fd.0[i],
            rel_error: rel[i],
        })
        .collect();
    let max_rel_error = rel.iter().cloned().fold(0.0, f64::max);
    let grad_norm = grad.norm();
    let dots_ok = dot_residuals.iter().all(|r| *r < 1e-10);
    let passed = dots_ok
        && if twin {
            grad_norm < 1e-12
        } else {
            max_rel_error <= GRADCHECK_TOL
        };
    let report = GradcheckReport {
        dot_residuals,
        rows,
        max_rel_error,
        grad_norm,
        twin,
        passed,
    };
    write_json(&dir.join("gradcheck.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionMarkers {
    pub h: f64,
    pub tau: f64,
    /// First angular wavenumber where the second-order `du/dx` factor
    /// changes sign, and the same in units of `pi`.
    pub singularity_kappa: f64,
    pub singularity_k: f64,
    /// Factor for the first integer mode beyond the singularity.
    pub first_mode_past_singularity: u32,
    pub c_past_singularity: f64,
    pub modes: Vec<DispersionReport>,
}

/// Tabulate `beta - 1` for both schemes over `tau/h` in `(0, 1]`; writes
/// `beta.csv` and `markers.json`.
pub fn cmd_dispersion(cfg: &ExperimentConfig) -> Result<DispersionMarkers> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let dir = out_dir(cfg)?;
    let h = grid.h();

    let mut w = csv_writer(&dir.join("beta.csv"))?;
    let mut header = vec!["tau_over_h".to_string()];
    for k in &cfg.dispersion_k {
        header.push(format!("beta2_minus_1_k{k}"));
        header.push(format!("beta4_minus_1_k{k}"));
    }
    w.write_record(&header)?;
    for i in 1..=cfg.ratio_samples {
        let ratio = i as f64 / cfg.ratio_samples as f64;
        let tau = ratio * h;
        let mut row = vec![ratio.to_string()];
        for &k in &cfg.dispersion_k {
            row.push((wavebound::analysis::beta2(k, h, tau)? - 1.0).to_string());
            row.push((wavebound::analysis::beta4(k, h, tau)? - 1.0).to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;

    let kappa = second_order_c_singularity(h, grid.tau())?;
    let singularity_k = kappa / std::f64::consts::PI;
    let next = singularity_k.floor() as u32 + 1;
    let markers = DispersionMarkers {
        h,
        tau: grid.tau(),
        singularity_kappa: kappa,
        singularity_k,
        first_mode_past_singularity: next,
        c_past_singularity: second_order_c(next as f64 * std::f64::consts::PI, h, grid.tau()),
        modes: cfg
            .dispersion_k
            .iter()
            .map(|&k| dispersion_report(k, &grid))
            .collect::<std::result::Result<Vec<_>, _>>()?,
    };
    write_json(&dir.join("markers.json"), &markers)?;
    Ok(markers)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_and_trough_of_a_series() {
        let xi: Vec<(f64, f64)> = [0.0, 2.0, 5.0, 3.0, 1.0, 4.0]
            .iter()
            .enumerate()
            .map(|(i, v)| (i as f64, *v))
            .collect();
        let s = peak_and_trough(&xi);
        assert_eq!((s.t_peak, s.xi_peak), (2.0, 5.0));
        assert_eq!((s.t_min_after_peak, s.xi_min_after_peak), (4.0, 1.0));
    }

    #[test]
    fn relative_error_floor() {
        let r = relative_errors(&[1.0, 0.0, 1e-12], &[1.0 + 1e-9, 0.0, 2e-12]);
        assert!((r[0] - 1e-9).abs() < 1e-15);
        assert_eq!(r[1], 0.0);
        assert!((r[2] - 1e-6).abs() < 1e-15);
        let r = relative_errors(&[0.5, 2e-3], &[0.5, 1e-3]);
        assert!((r[1] - 0.5).abs() < 1e-15);
    }
}
