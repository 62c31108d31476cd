//! Tangent-linear and adjoint models with respect to the boundary
//! coefficients.
//!
//! The forward scheme is bilinear in (coefficients, state), so perturbing
//! the coefficients by `da` perturbs the fields by
//! `d(du)/dt = D_p dp + P da`, `d(dp)/dt = D_u du + U da`, where `P` and `U`
//! are built from the forward `p` and `u` and are nonzero only on the two
//! controlled rows. The same split first step and leapfrog are applied to
//! the perturbation, which starts from zero.
//!
//! The adjoint is the exact transpose of that discrete code, including the
//! first step. Written as a block matrix, the transposed first step differs
//! in sign from the one obtained by naively transposing a block form with a
//! `-tau U^{1/2}` entry; the dot-product test is the arbiter here.

use crate::error::{check_len, Error, Result};
use crate::exact::Observations;
use crate::grid::GridSpec;
use crate::objective::time_weights;
use crate::scheme::{BoundaryScheme, CoefficientGroup, ControlLayout, ControlVector, InteriorStencil};
use crate::wave::{apply_dp, apply_dp_transpose_add, apply_du, apply_du_transpose_add, State, Trajectory};

/// The controlled-row sensitivities of one forward state.
///
/// `p_left[j] = p_{j+1/2}/h` and `p_right[j] = -p_{N-j-1/2}/h` feed the
/// u-equation rows at nodes 1 and N-1; `u_left[j] = u_j/h` and
/// `u_right[j] = -u_{N-j}/h` feed the p-equation rows at half-nodes 1/2 and
/// N-1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivitySource {
    layout: ControlLayout,
    p_left: Vec<f64>,
    p_right: Vec<f64>,
    u_left: Vec<f64>,
    u_right: Vec<f64>,
}

impl SensitivitySource {
    pub fn from_state(state: &State, layout: ControlLayout, grid: &GridSpec) -> Self {
        let inv_h = 1.0 / grid.h();
        let n = grid.n_cells();
        let w = layout.width();
        SensitivitySource {
            layout,
            p_left: (0..w).map(|j| state.p[j] * inv_h).collect(),
            p_right: (0..w).map(|j| -state.p[n - 1 - j] * inv_h).collect(),
            u_left: (0..w).map(|j| state.u[j] * inv_h).collect(),
            u_right: (0..w).map(|j| -state.u[n - j] * inv_h).collect(),
        }
    }

    fn dot_group(&self, row: &[f64], d: &ControlVector, group: CoefficientGroup) -> f64 {
        row.iter()
            .enumerate()
            .map(|(j, r)| r * d.0[self.layout.index(group, j)])
            .sum()
    }

    fn add_group(&self, row: &[f64], weight: f64, grad: &mut [f64], group: CoefficientGroup) {
        for (j, r) in row.iter().enumerate() {
            grad[self.layout.index(group, j)] += weight * r;
        }
    }

    /// `P da` on rows (node 1, node N-1).
    pub fn p_rows(&self, d: &ControlVector) -> (f64, f64) {
        (
            self.dot_group(&self.p_left, d, CoefficientGroup::P),
            self.dot_group(&self.p_right, d, CoefficientGroup::PTilde),
        )
    }

    /// `U da` on rows (half-node 1/2, half-node N-1/2).
    pub fn u_rows(&self, d: &ControlVector) -> (f64, f64) {
        (
            self.dot_group(&self.u_left, d, CoefficientGroup::U),
            self.dot_group(&self.u_right, d, CoefficientGroup::UTilde),
        )
    }

    /// `grad += scale * P^T (left, right)`.
    pub fn add_p_transpose(&self, left: f64, right: f64, scale: f64, grad: &mut [f64]) {
        self.add_group(&self.p_left, scale * left, grad, CoefficientGroup::P);
        self.add_group(&self.p_right, scale * right, grad, CoefficientGroup::PTilde);
    }

    /// `grad += scale * U^T (left, right)`.
    pub fn add_u_transpose(&self, left: f64, right: f64, scale: f64, grad: &mut [f64]) {
        self.add_group(&self.u_left, scale * left, grad, CoefficientGroup::U);
        self.add_group(&self.u_right, scale * right, grad, CoefficientGroup::UTilde);
    }

    /// Full fields `(P da on u-nodes 1..N-1, U da on half-nodes)`; zero
    /// except on the controlled rows.
    pub fn apply(&self, d: &ControlVector, grid: &GridSpec) -> (Vec<f64>, Vec<f64>) {
        let n = grid.n_cells();
        let mut on_u = vec![0.0; n - 1];
        let mut on_p = vec![0.0; n];
        let (l, r) = self.p_rows(d);
        on_u[0] += l;
        on_u[n - 2] += r;
        let (l, r) = self.u_rows(d);
        on_p[0] += l;
        on_p[n - 1] += r;
        (on_u, on_p)
    }
}

fn check_control(d: &ControlVector, bs: &BoundaryScheme) -> Result<()> {
    check_len("control vector", bs.layout().len(), d.len())
}

struct TangentStepper<'a> {
    stencil: &'a InteriorStencil,
    bs: &'a BoundaryScheme,
    grid: &'a GridSpec,
    inv_h: f64,
    dp: Vec<f64>,
    du: Vec<f64>,
}

impl<'a> TangentStepper<'a> {
    // out = base + dt * (D(from) + S da)
    fn euler(
        &mut self,
        base: &State,
        from: &State,
        src: &SensitivitySource,
        d: &ControlVector,
        dt: f64,
        t: f64,
    ) -> State {
        let n = self.grid.n_cells();
        apply_dp(&from.p, self.stencil, self.bs, self.inv_h, &mut self.dp);
        apply_du(&from.u, self.stencil, self.bs, self.inv_h, &mut self.du);
        let (l, r) = src.p_rows(d);
        self.dp[0] += l;
        self.dp[n - 2] += r;
        let (l, r) = src.u_rows(d);
        self.du[0] += l;
        self.du[n - 1] += r;
        let mut u = base.u.clone();
        for (ui, v) in u[1..].iter_mut().zip(&self.dp) {
            *ui += dt * v;
        }
        let p = base.p.iter().zip(&self.du).map(|(b, v)| b + dt * v).collect();
        State { u, p, t }
    }
}

/// Propagate a coefficient perturbation `dalpha` along `traj`.
///
/// `traj` must come from `integrate` with the same `(stencil, bs)`; that is
/// a contract the function cannot check. The result has the same levels as
/// `traj` and starts from a zero perturbation.
pub fn tlm_run(
    traj: &Trajectory,
    dalpha: &ControlVector,
    stencil: &InteriorStencil,
    bs: &BoundaryScheme,
    grid: &GridSpec,
) -> Result<Trajectory> {
    check_control(dalpha, bs)?;
    bs.validate_for(grid.n_cells())?;
    let layout = bs.layout();
    let tau = grid.tau();
    let levels = traj.n_levels();
    let mut st = TangentStepper {
        stencil,
        bs,
        grid,
        inv_h: 1.0 / grid.h(),
        dp: vec![0.0; grid.n_cells() - 1],
        du: vec![0.0; grid.n_cells()],
    };
    let zero = State::zeros(grid, 0.0);
    let src0 = SensitivitySource::from_state(&traj.states[0], layout, grid);
    let half = st.euler(&zero, &zero, &src0, dalpha, 0.5 * tau, 0.5 * tau);
    let mut states = Vec::with_capacity(levels);
    states.push(zero.clone());
    if levels > 1 {
        let src_half = SensitivitySource::from_state(&traj.half_state, layout, grid);
        let one = st.euler(&zero, &half, &src_half, dalpha, tau, tau);
        states.push(one);
    }
    for n in 1..levels.saturating_sub(1) {
        let src = SensitivitySource::from_state(&traj.states[n], layout, grid);
        let next = st.euler(&states[n - 1], &states[n], &src, dalpha, 2.0 * tau, grid.time(n + 1));
        states.push(next);
    }
    Ok(Trajectory {
        half_state: half,
        states,
    })
}

/// `sum_t A(t) forcing(t)` as a single backward sweep.
///
/// `forcing[n]` is the cotangent of the perturbation at level `n`, for
/// `n = 0..forcing.len()`; the result satisfies
/// `<tlm_run(d), forcing> = <d, adjoint_sweep(forcing)>` in the Euclidean
/// inner products over all levels and grid points.
pub fn adjoint_sweep(
    traj: &Trajectory,
    forcing: &[State],
    stencil: &InteriorStencil,
    bs: &BoundaryScheme,
    grid: &GridSpec,
) -> Result<ControlVector> {
    bs.validate_for(grid.n_cells())?;
    let layout = bs.layout();
    let mut grad = vec![0.0; layout.len()];
    if forcing.len() < 2 {
        return Ok(ControlVector(grad));
    }
    if forcing.len() > traj.n_levels() {
        return Err(Error::Dimension {
            what: "forcing levels",
            expected: traj.n_levels(),
            got: forcing.len(),
        });
    }
    for f in forcing {
        check_len("forcing u", grid.u_len(), f.u.len())?;
        check_len("forcing p", grid.p_len(), f.p.len())?;
    }
    let n = grid.n_cells();
    let tau = grid.tau();
    let inv_h = 1.0 / grid.h();
    let last = forcing.len() - 1;

    let mut lam_u: Vec<Vec<f64>> = forcing.iter().map(|f| f.u.clone()).collect();
    let mut lam_p: Vec<Vec<f64>> = forcing.iter().map(|f| f.p.clone()).collect();
    let mut scratch_p = vec![0.0; n];
    let mut scratch_u = vec![0.0; n + 1];

    for lvl in (2..=last).rev() {
        let src = SensitivitySource::from_state(&traj.states[lvl - 1], layout, grid);
        let (lower, upper) = lam_u.split_at_mut(lvl);
        let lu = &upper[0];
        for (a, b) in lower[lvl - 2].iter_mut().zip(lu) {
            *a += b;
        }
        let (lowerp, upperp) = lam_p.split_at_mut(lvl);
        let lp = &upperp[0];
        for (a, b) in lowerp[lvl - 2].iter_mut().zip(lp) {
            *a += b;
        }

        // u^{n} = u^{n-2} + 2 tau (D_p p^{n-1} + P^{n-1} a)
        scratch_p.iter_mut().for_each(|v| *v = 0.0);
        apply_dp_transpose_add(&lu[1..n], stencil, bs, inv_h, &mut scratch_p);
        for (a, b) in lowerp[lvl - 1].iter_mut().zip(&scratch_p) {
            *a += 2.0 * tau * b;
        }
        src.add_p_transpose(lu[1], lu[n - 1], 2.0 * tau, &mut grad);

        // p^{n} = p^{n-2} + 2 tau (D_u u^{n-1} + U^{n-1} a)
        scratch_u.iter_mut().for_each(|v| *v = 0.0);
        apply_du_transpose_add(lp, stencil, bs, inv_h, &mut scratch_u);
        for (a, b) in lower[lvl - 1].iter_mut().zip(&scratch_u) {
            *a += 2.0 * tau * b;
        }
        src.add_u_transpose(lp[0], lp[n - 1], 2.0 * tau, &mut grad);
    }

    // u^1 = tau (D_p p^{1/2} + P^{1/2} a), p^1 = tau (D_u u^{1/2} + U^{1/2} a)
    let lu1 = &lam_u[1];
    let lp1 = &lam_p[1];
    let src_half = SensitivitySource::from_state(&traj.half_state, layout, grid);
    let mut half_p = vec![0.0; n];
    apply_dp_transpose_add(&lu1[1..n], stencil, bs, inv_h, &mut half_p);
    half_p.iter_mut().for_each(|v| *v *= tau);
    src_half.add_p_transpose(lu1[1], lu1[n - 1], tau, &mut grad);
    let mut half_u = vec![0.0; n + 1];
    apply_du_transpose_add(lp1, stencil, bs, inv_h, &mut half_u);
    half_u.iter_mut().for_each(|v| *v *= tau);
    src_half.add_u_transpose(lp1[0], lp1[n - 1], tau, &mut grad);

    // u^{1/2} = (tau/2) P^0 a, p^{1/2} = (tau/2) U^0 a
    let src0 = SensitivitySource::from_state(&traj.states[0], layout, grid);
    src0.add_p_transpose(half_u[1], half_u[n - 1], 0.5 * tau, &mut grad);
    src0.add_u_transpose(half_p[0], half_p[n - 1], 0.5 * tau, &mut grad);

    Ok(ControlVector(grad))
}

/// Cotangent of the misfit cost at each level of `traj`:
/// `2 w_t h (u - u_obs, p - p_obs)`, zero on the boundary u-nodes.
pub fn misfit_forcing(traj: &Trajectory, obs: &Observations, grid: &GridSpec) -> Result<Vec<State>> {
    let levels = traj.n_levels();
    if levels > obs.n_levels() {
        return Err(Error::Dimension {
            what: "observation levels",
            expected: levels,
            got: obs.n_levels(),
        });
    }
    let weights = time_weights(levels - 1, grid.tau());
    let n = grid.n_cells();
    let h = grid.h();
    Ok(traj
        .states
        .iter()
        .enumerate()
        .map(|(lvl, s)| {
            let c = 2.0 * weights[lvl] * h;
            let mut u: Vec<f64> = s
                .u
                .iter()
                .zip(&obs.u[lvl])
                .map(|(a, b)| c * (a - b))
                .collect();
            u[0] = 0.0;
            u[n] = 0.0;
            let p = s
                .p
                .iter()
                .zip(&obs.p[lvl])
                .map(|(a, b)| c * (a - b))
                .collect();
            State { u, p, t: s.t }
        })
        .collect())
}

/// Gradient of the misfit part of the cost over all levels of `traj`.
pub fn misfit_gradient(
    traj: &Trajectory,
    obs: &Observations,
    stencil: &InteriorStencil,
    bs: &BoundaryScheme,
    grid: &GridSpec,
) -> Result<ControlVector> {
    let forcing = misfit_forcing(traj, obs, grid)?;
    adjoint_sweep(traj, &forcing, stencil, bs, grid)
}

/// Relative mismatch `|<tlm(d), f> - <d, adjoint(f)>| / max(|.|, |.|)` of
/// the two inner products, computed along `traj`.
pub fn dot_product_residual(
    traj: &Trajectory,
    dalpha: &ControlVector,
    forcing: &[State],
    stencil: &InteriorStencil,
    bs: &BoundaryScheme,
    grid: &GridSpec,
) -> Result<f64> {
    let tl = tlm_run(traj, dalpha, stencil, bs, grid)?;
    let lhs: f64 = tl
        .states
        .iter()
        .zip(forcing)
        .map(|(a, f)| {
            a.u.iter().zip(&f.u).map(|(x, y)| x * y).sum::<f64>()
                + a.p.iter().zip(&f.p).map(|(x, y)| x * y).sum::<f64>()
        })
        .sum();
    let rhs = dalpha.dot(&adjoint_sweep(traj, forcing, stencil, bs, grid)?);
    let scale = lhs.abs().max(rhs.abs());
    Ok(if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale })
}
