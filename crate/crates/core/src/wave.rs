//! Staggered-grid discretization of `u_t = p_x`, `p_t = u_x` on `0 < x < 1`
//! with `u(0) = u(1) = 0`, integrated by leapfrog after a two-stage first step.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::GridSpec;
use crate::scheme::{BoundaryScheme, InteriorStencil};

/// Default blow-up threshold on `max(|u|, |p|)`.
pub const DEFAULT_BLOWUP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    /// `u_i` for `i = 0..=N`.
    pub u: Vec<f64>,
    /// `p_{m+1/2}` for `m = 0..N`.
    pub p: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn zeros(grid: &GridSpec, t: f64) -> Self {
        State {
            u: vec![0.0; grid.u_len()],
            p: vec![0.0; grid.p_len()],
            t,
        }
    }

    pub fn new(u: Vec<f64>, p: Vec<f64>, t: f64, grid: &GridSpec) -> Result<Self> {
        check_len("u", grid.u_len(), u.len())?;
        check_len("p", grid.p_len(), p.len())?;
        Ok(State { u, p, t })
    }

    /// Lengths match the grid and `u` vanishes on both boundary nodes.
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        check_len("u", grid.u_len(), self.u.len())?;
        check_len("p", grid.p_len(), self.p.len())?;
        let n = grid.n_cells();
        if self.u[0] != 0.0 || self.u[n] != 0.0 {
            return Err(Error::invalid(format!(
                "u must vanish on the boundary, got u_0 = {}, u_N = {}",
                self.u[0], self.u[n]
            )));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.p)
            .fold(0.0_f64, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
    }

    /// `a * self + b * other`, keeping `self.t`.
    pub fn combine(&self, a: f64, other: &State, b: f64) -> State {
        State {
            u: self.u.iter().zip(&other.u).map(|(x, y)| a * x + b * y).collect(),
            p: self.p.iter().zip(&other.p).map(|(x, y)| a * x + b * y).collect(),
            t: self.t,
        }
    }

    /// The x -> 1 - x image `(u, p) -> (R u, -R p)`, which maps solutions of
    /// a scheme onto solutions of its mirrored scheme.
    pub fn mirrored(&self) -> State {
        State {
            u: self.u.iter().rev().copied().collect(),
            p: self.p.iter().rev().map(|v| -v).collect(),
            t: self.t,
        }
    }
}

/// Every stored level of one forward run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// The intermediate state at `t = tau/2` from the split first step.
    pub half_state: State,
    /// States at `t = 0, tau, ..., n_steps * tau`.
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn n_levels(&self) -> usize {
        self.states.len()
    }
}

// (dp/dx) at u-nodes 1..N-1, written to `out[i - 1]`.
pub(crate) fn apply_dp(
    p: &[f64],
    stencil: &InteriorStencil,
    bs: &BoundaryScheme,
    inv_h: f64,
    out: &mut [f64],
) {
    let n = p.len();
    let a = &stencil.coeffs;
    out[0] = inv_h * bs.alpha_p.iter().zip(p).map(|(c, v)| c * v).sum::<f64>();
    for i in 2..n - 1 {
        // p_{i+j-1/2} is p[i + j - 1], j = -1..=2
        let base = i - 2;
        out[i - 1] = inv_h
            * (a[0] * p[base] + a[1] * p[base + 1] + a[2] * p[base + 2] + a[3] * p[base + 3]);
    }
    out[n - 2] = -inv_h
        * bs
            .alpha_p_tilde
            .iter()
            .enumerate()
            .map(|(j, c)| c * p[n - 1 - j])
            .sum::<f64>();
}

// (du/dx) at half-nodes m+1/2, m = 0..N-1, written to `out[m]`.
pub(crate) fn apply_du(
    u: &[f64],
    stencil: &InteriorStencil,
    bs: &BoundaryScheme,
    inv_h: f64,
    out: &mut [f64],
) {
    let n = u.len() - 1;
    let a = &stencil.coeffs;
    out[0] = inv_h * bs.alpha_u.iter().zip(u).map(|(c, v)| c * v).sum::<f64>();
    for m in 1..n - 1 {
        let base = m - 1;
        out[m] = inv_h
            * (a[0] * u[base] + a[1] * u[base + 1] + a[2] * u[base + 2] + a[3] * u[base + 3]);
    }
    out[n - 1] = -inv_h
        * bs
            .alpha_u_tilde
            .iter()
            .enumerate()
            .map(|(j, c)| c * u[n - j])
            .sum::<f64>();
}

// out += D_p^T w, with `w` on u-nodes 1..N-1 and `out` on p.
pub(crate) fn apply_dp_transpose_add(
    w: &[f64],
    stencil: &InteriorStencil,
    bs: &BoundaryScheme,
    inv_h: f64,
    out: &mut [f64],
) {
    let n = out.len();
    let a = &stencil.coeffs;
    for (j, c) in bs.alpha_p.iter().enumerate() {
        out[j] += inv_h * c * w[0];
    }
    for i in 2..n - 1 {
        let base = i - 2;
        let wi = inv_h * w[i - 1];
        out[base] += a[0] * wi;
        out[base + 1] += a[1] * wi;
        out[base + 2] += a[2] * wi;
        out[base + 3] += a[3] * wi;
    }
    for (j, c) in bs.alpha_p_tilde.iter().enumerate() {
        out[n - 1 - j] -= inv_h * c * w[n - 2];
    }
}

// out += D_u^T w, with `w` on half-nodes and `out` on u-nodes 0..=N.
pub(crate) fn apply_du_transpose_add(
    w: &[f64],
    stencil: &InteriorStencil,
    bs: &BoundaryScheme,
    inv_h: f64,
    out: &mut [f64],
) {
    let n = out.len() - 1;
    let a = &stencil.coeffs;
    for (j, c) in bs.alpha_u.iter().enumerate() {
        out[j] += inv_h * c * w[0];
    }
    for m in 1..n - 1 {
        let base = m - 1;
        let wm = inv_h * w[m];
        out[base] += a[0] * wm;
        out[base + 1] += a[1] * wm;
        out[base + 2] += a[2] * wm;
        out[base + 3] += a[3] * wm;
    }
    for (j, c) in bs.alpha_u_tilde.iter().enumerate() {
        out[n - j] -= inv_h * c * w[n - 1];
    }
}

fn check_scheme(bs: &BoundaryScheme, grid: &GridSpec) -> Result<()> {
    bs.validate_for(grid.n_cells())
}

/// `dp/dx` at the interior u-nodes `i = 1..N-1`; element `i - 1` is node `i`.
pub fn derivative_p(
    p: &[f64],
    stencil: &InteriorStencil,
    bs: &BoundaryScheme,
    grid: &GridSpec,
) -> Result<Vec<f64>> {
    check_len("p", grid.p_len(), p.len())?;
    check_scheme(bs, grid)?;
    let mut out = vec![0.0; grid.n_cells() - 1];
    apply_dp(p, stencil, bs, 1.0 / grid.h(), &mut out);
    Ok(out)
}

/// `du/dx` at the half-nodes; element `m` is `x_{m+1/2}`.
pub fn derivative_u(
    u: &[f64],
    stencil: &InteriorStencil,
    bs: &BoundaryScheme,
    grid: &GridSpec,
) -> Result<Vec<f64>> {
    check_len("u", grid.u_len(), u.len())?;
    check_scheme(bs, grid)?;
    let mut out = vec![0.0; grid.n_cells()];
    apply_du(u, stencil, bs, 1.0 / grid.h(), &mut out);
    Ok(out)
}

/// Reusable buffers for the time-stepping kernels.
struct Stepper<'a> {
    stencil: &'a InteriorStencil,
    bs: &'a BoundaryScheme,
    inv_h: f64,
    dp: Vec<f64>,
    du: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(stencil: &'a InteriorStencil, bs: &'a BoundaryScheme, grid: &GridSpec) -> Self {
        Stepper {
            stencil,
            bs,
            inv_h: 1.0 / grid.h(),
            dp: vec![0.0; grid.n_cells() - 1],
            du: vec![0.0; grid.n_cells()],
        }
    }

    /// `out = base + dt * D(from)` for both variables.
    fn euler(&mut self, base: &State, from: &State, dt: f64, t: f64) -> State {
        apply_dp(&from.p, self.stencil, self.bs, self.inv_h, &mut self.dp);
        apply_du(&from.u, self.stencil, self.bs, self.inv_h, &mut self.du);
        let mut u = base.u.clone();
        for (ui, d) in u[1..].iter_mut().zip(&self.dp) {
            *ui += dt * d;
        }
        let p = base.p.iter().zip(&self.du).map(|(v, d)| v + dt * d).collect();
        State { u, p, t }
    }

    fn first_step(&mut self, ic: &State, tau: f64) -> (State, State) {
        let half = self.euler(ic, ic, 0.5 * tau, ic.t + 0.5 * tau);
        let one = self.euler(ic, &half, tau, ic.t + tau);
        (half, one)
    }

    fn leapfrog(&mut self, prev: &State, curr: &State, tau: f64) -> State {
        self.euler(prev, curr, 2.0 * tau, curr.t + tau)
    }
}

/// Split first step: two forward-Euler stages through `t = tau/2`.
/// Returns `(state at tau/2, state at tau)`.
pub fn first_step(
    ic: &State,
    stencil: &InteriorStencil,
    bs: &BoundaryScheme,
    grid: &GridSpec,
) -> Result<(State, State)> {
    ic.validate(grid)?;
    check_scheme(bs, grid)?;
    Ok(Stepper::new(stencil, bs, grid).first_step(ic, grid.tau()))
}

/// One leapfrog step from levels `n - 1` and `n` to `n + 1`.
pub fn leapfrog_step(
    prev: &State,
    curr: &State,
    stencil: &InteriorStencil,
    bs: &BoundaryScheme,
    grid: &GridSpec,
) -> Result<State> {
    prev.validate(grid)?;
    curr.validate(grid)?;
    check_scheme(bs, grid)?;
    Ok(Stepper::new(stencil, bs, grid).leapfrog(prev, curr, grid.tau()))
}

/// Integrate from `ic` to level `grid.n_steps()` with the default blow-up
/// threshold.
pub fn integrate(
    ic: &State,
    stencil: &InteriorStencil,
    bs: &BoundaryScheme,
    grid: &GridSpec,
) -> Result<Trajectory> {
    integrate_with(ic, stencil, bs, grid, DEFAULT_BLOWUP)
}

pub fn integrate_with(
    ic: &State,
    stencil: &InteriorStencil,
    bs: &BoundaryScheme,
    grid: &GridSpec,
    blowup: f64,
) -> Result<Trajectory> {
    ic.validate(grid)?;
    check_scheme(bs, grid)?;
    let tau = grid.tau();
    let mut stepper = Stepper::new(stencil, bs, grid);
    let mut states = Vec::with_capacity(grid.n_steps() + 1);
    let mut ic = ic.clone();
    ic.t = 0.0;
    let (half_state, one) = stepper.first_step(&ic, tau);
    states.push(ic);
    let guard = |s: &State, step: usize| -> Result<()> {
        let m = s.max_abs();
        if m.is_nan() || m > blowup {
            Err(Error::Diverged {
                step,
                t: s.t,
                magnitude: m,
            })
        } else {
            Ok(())
        }
    };
    guard(&one, 1)?;
    states.push(one);
    for n in 1..grid.n_steps() {
        let mut next = stepper.leapfrog(&states[n - 1], &states[n], tau);
        next.t = grid.time(n + 1);
        guard(&next, n + 1)?;
        states.push(next);
    }
    Ok(Trajectory { half_state, states })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n, 0.25 / n as f64, 40).unwrap()
    }

    fn sampled(g: &GridSpec, fu: impl Fn(f64) -> f64, fp: impl Fn(f64) -> f64) -> State {
        let n = g.n_cells();
        let mut u: Vec<f64> = (0..=n).map(|i| fu(g.x_u(i))).collect();
        u[0] = 0.0;
        u[n] = 0.0;
        let p = (0..n).map(|m| fp(g.x_p(m))).collect();
        State { u, p, t: 0.0 }
    }

    #[test]
    fn constant_p_has_zero_derivative() {
        let g = grid(12);
        let bs = BoundaryScheme::classical(1).unwrap();
        for st in [InteriorStencil::second_order(), InteriorStencil::fourth_order()] {
            let d = derivative_p(&vec![3.5; 12], &st, &bs, &g).unwrap();
            assert!(d.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn linear_fields_differentiate_exactly() {
        let g = grid(20);
        let bs = BoundaryScheme::classical(1).unwrap();
        let st = InteriorStencil::second_order();
        let p: Vec<f64> = (0..20).map(|m| g.x_p(m)).collect();
        let u: Vec<f64> = (0..=20).map(|i| g.x_u(i)).collect();
        for v in derivative_p(&p, &st, &bs, &g).unwrap() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        for v in derivative_u(&u, &st, &bs, &g).unwrap() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fourth_order_exact_on_cubics_in_interior() {
        let g = grid(16);
        let bs = BoundaryScheme::classical(1).unwrap();
        let st = InteriorStencil::fourth_order();
        let f = |x: f64| 2.0 * x * x * x - x * x + 0.5 * x;
        let df = |x: f64| 6.0 * x * x - 2.0 * x + 0.5;
        let p: Vec<f64> = (0..16).map(|m| f(g.x_p(m))).collect();
        let d = derivative_p(&p, &st, &bs, &g).unwrap();
        for i in 2..=14 {
            assert!((d[i - 1] - df(g.x_u(i))).abs() < 1e-10, "row {i}");
        }
        let u: Vec<f64> = (0..=16).map(|i| f(g.x_u(i))).collect();
        let d = derivative_u(&u, &st, &bs, &g).unwrap();
        for m in 1..=14 {
            assert!((d[m] - df(g.x_p(m))).abs() < 1e-10, "half-node {m}");
        }
    }

    #[test]
    fn boundary_rows_use_alpha() {
        let g = GridSpec::new(30, 1.0 / 120.0, 10).unwrap();
        let h = g.h();
        let mut bs = BoundaryScheme::classical(1).unwrap();
        bs.alpha_p = vec![-1.023, 1.023];
        bs.alpha_u = vec![-1.048, 1.048];
        let p: Vec<f64> = (0..30)
            .map(|m| (3.0 * std::f64::consts::PI * g.x_p(m)).cos())
            .collect();
        let u: Vec<f64> = (0..=30)
            .map(|i| (3.0 * std::f64::consts::PI * g.x_u(i)).sin())
            .collect();
        let st = InteriorStencil::second_order();
        let dp = derivative_p(&p, &st, &bs, &g).unwrap();
        assert!((dp[0] - 1.023 * (p[1] - p[0]) / h).abs() < 1e-12);
        // right row: -(1/h)(-p_{N-1/2} + p_{N-3/2})
        assert!((dp[28] - (p[29] - p[28]) / h).abs() < 1e-12);
        let du = derivative_u(&u, &st, &bs, &g).unwrap();
        assert!((du[0] - 1.048 * (u[1] - u[0]) / h).abs() < 1e-12);
        assert!((du[29] - (u[30] - u[29]) / h).abs() < 1e-12);
    }

    #[test]
    fn dimension_errors() {
        let g = grid(10);
        let bs = BoundaryScheme::classical(1).unwrap();
        let st = InteriorStencil::second_order();
        assert!(matches!(
            derivative_p(&[0.0; 9], &st, &bs, &g),
            Err(Error::Dimension { .. })
        ));
        assert!(derivative_u(&[0.0; 10], &st, &bs, &g).is_err());
        let wide = BoundaryScheme::classical(9).unwrap();
        assert!(derivative_p(&[0.0; 10], &st, &wide, &g).is_err());
    }

    #[test]
    fn transposes_match_forward_operators() {
        let g = grid(11);
        let bs = BoundaryScheme::new(
            vec![-0.7, 1.3, 0.2],
            vec![-1.1, 0.9, 0.4],
            vec![-2.0, 1.5, 0.3],
            vec![-0.5, 0.8, -0.1],
        )
        .unwrap();
        for st in [InteriorStencil::second_order(), InteriorStencil::fourth_order()] {
            let p: Vec<f64> = (0..11).map(|m| ((m * 7 % 5) as f64) - 1.3).collect();
            let w: Vec<f64> = (0..10).map(|i| ((i * 3 % 4) as f64) * 0.5 - 0.2).collect();
            let dp = derivative_p(&p, &st, &bs, &g).unwrap();
            let mut dpt = vec![0.0; 11];
            apply_dp_transpose_add(&w, &st, &bs, 1.0 / g.h(), &mut dpt);
            let lhs: f64 = dp.iter().zip(&w).map(|(a, b)| a * b).sum();
            let rhs: f64 = dpt.iter().zip(&p).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));

            let u: Vec<f64> = (0..12).map(|i| ((i * 5 % 7) as f64) - 2.0).collect();
            let w: Vec<f64> = (0..11).map(|m| ((m * 2 % 3) as f64) - 0.7).collect();
            let du = derivative_u(&u, &st, &bs, &g).unwrap();
            let mut dut = vec![0.0; 12];
            apply_du_transpose_add(&w, &st, &bs, 1.0 / g.h(), &mut dut);
            let lhs: f64 = du.iter().zip(&w).map(|(a, b)| a * b).sum();
            let rhs: f64 = dut.iter().zip(&u).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn leapfrog_is_time_reversible() {
        let g = GridSpec::new(20, 1.0 / 80.0, 30).unwrap();
        let bs = BoundaryScheme::classical(2).unwrap();
        let st = InteriorStencil::fourth_order();
        let ic = sampled(&g, |x| (std::f64::consts::PI * x).sin() * x, |x| x * x - 0.3);
        let traj = integrate(&ic, &st, &bs, &g).unwrap();
        let mut stepper = Stepper::new(&st, &bs, &g);
        for n in [2usize, 10, 30] {
            let back = stepper.leapfrog(&traj.states[n], &traj.states[n - 1], -g.tau());
            let target = &traj.states[n - 2];
            for (a, b) in back.u.iter().zip(&target.u).chain(back.p.iter().zip(&target.p)) {
                assert!((a - b).abs() < 1e-13, "level {n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_ic_stays_zero() {
        let g = grid(10);
        let bs = BoundaryScheme::classical(1).unwrap();
        let st = InteriorStencil::second_order();
        let z = State::zeros(&g, 0.0);
        let (half, one) = first_step(&z, &st, &bs, &g).unwrap();
        assert_eq!(half.max_abs(), 0.0);
        assert_eq!(one.max_abs(), 0.0);
        assert_eq!(leapfrog_step(&z, &one, &st, &bs, &g).unwrap().max_abs(), 0.0);
        let traj = integrate(&z, &st, &bs, &g).unwrap();
        assert_eq!(traj.n_levels(), 41);
        assert!(traj.states.iter().all(|s| s.max_abs() == 0.0));
    }

    #[test]
    fn nonzero_boundary_ic_rejected() {
        let g = grid(10);
        let mut s = State::zeros(&g, 0.0);
        s.u[10] = 1e-3;
        let bs = BoundaryScheme::classical(1).unwrap();
        assert!(integrate(&s, &InteriorStencil::second_order(), &bs, &g).is_err());
    }

    #[test]
    fn mirror_maps_solutions_to_mirrored_scheme() {
        let g = GridSpec::new(14, 1.0 / 56.0, 25).unwrap();
        let bs = BoundaryScheme::new(
            vec![-1.2, 1.1, 0.05],
            vec![-0.9, 1.0, -0.02],
            vec![-1.5, 1.4, 0.1],
            vec![-1.0, 0.95, 0.0],
        )
        .unwrap();
        let st = InteriorStencil::fourth_order();
        let ic = sampled(&g, |x| x * (1.0 - x) * (1.0 + 3.0 * x), |x| (2.0 * x).exp());
        let a = integrate(&ic, &st, &bs, &g).unwrap();
        let b = integrate(&ic.mirrored(), &st, &bs.mirrored(), &g).unwrap();
        for (sa, sb) in a.states.iter().zip(&b.states) {
            let m = sa.mirrored();
            for (x, y) in m.u.iter().zip(&sb.u).chain(m.p.iter().zip(&sb.p)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
