use std::f64::consts::PI;

use proptest::prelude::*;
use wavebound::exact::{sample_state, ModeSpec};
use wavebound::wave::{derivative_p, derivative_u, first_step, integrate, leapfrog_step};
use wavebound::{BoundaryScheme, Error, GridSpec, InteriorStencil, State};

/// Straight loop-by-loop re-implementation of the scheme, written from the
/// stencil definitions without sharing any code with the library.
struct Naive {
    n: usize,
    h: f64,
    a: [f64; 4],
    bs: BoundaryScheme,
}

impl Naive {
    fn dpdx(&self, p: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n + 1];
        for i in 1..n {
            out[i] = if i == 1 {
                (0..self.bs.alpha_p.len()).map(|j| self.bs.alpha_p[j] * p[j]).sum::<f64>() / self.h
            } else if i == n - 1 {
                -(0..self.bs.alpha_p_tilde.len())
                    .map(|j| self.bs.alpha_p_tilde[j] * p[n - 1 - j])
                    .sum::<f64>()
                    / self.h
            } else {
                // half-nodes i-3/2, i-1/2, i+1/2, i+3/2
                (self.a[0] * p[i - 2] + self.a[1] * p[i - 1] + self.a[2] * p[i] + self.a[3] * p[i + 1])
                    / self.h
            };
        }
        out
    }

    fn dudx(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for m in 0..n {
            out[m] = if m == 0 {
                (0..self.bs.alpha_u.len()).map(|j| self.bs.alpha_u[j] * u[j]).sum::<f64>() / self.h
            } else if m == n - 1 {
                -(0..self.bs.alpha_u_tilde.len())
                    .map(|j| self.bs.alpha_u_tilde[j] * u[n - j])
                    .sum::<f64>()
                    / self.h
            } else {
                // nodes m-1, m, m+1, m+2 around half-node m+1/2
                (self.a[0] * u[m - 1] + self.a[1] * u[m] + self.a[2] * u[m + 1] + self.a[3] * u[m + 2])
                    / self.h
            };
        }
        out
    }

    fn run(&self, u0: &[f64], p0: &[f64], tau: f64, steps: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
        let stage = |u: &[f64], p: &[f64], fu: &[f64], fp: &[f64], dt: f64| {
            let du = self.dpdx(fp);
            let dp = self.dudx(fu);
            let mut un = u.to_vec();
            for i in 1..self.n {
                un[i] += dt * du[i];
            }
            let pn: Vec<f64> = (0..self.n).map(|m| p[m] + dt * dp[m]).collect();
            (un, pn)
        };
        let mut out = vec![(u0.to_vec(), p0.to_vec())];
        let (uh, ph) = stage(u0, p0, u0, p0, tau / 2.0);
        out.push(stage(u0, p0, &uh, &ph, tau));
        for n in 1..steps {
            let (ref up, ref pp) = out[n - 1].clone();
            let (ref uc, ref pc) = out[n].clone();
            out.push(stage(up, pp, uc, pc, 2.0 * tau));
        }
        out
    }
}

fn scheme(alpha_u: [f64; 2], alpha_p: [f64; 2], tu: [f64; 2], tp: [f64; 2]) -> BoundaryScheme {
    BoundaryScheme::new(alpha_u.to_vec(), tu.to_vec(), alpha_p.to_vec(), tp.to_vec()).unwrap()
}

#[test]
fn integrate_matches_naive_reimplementation() {
    let grid = GridSpec::new(30, 1.0 / 120.0, 60).unwrap();
    let modes = [ModeSpec::new(3, 1.0, 1.0), ModeSpec::new(7, -0.3, 0.2)];
    let ic = sample_state(&modes, &grid, 0.0);
    let cases = [
        (InteriorStencil::second_order(), BoundaryScheme::classical(1).unwrap()),
        (
            InteriorStencil::second_order(),
            scheme([-0.9, 1.048], [-2.16, 2.28], [-1.1, 1.02], [-1.0, 1.05]),
        ),
        (
            InteriorStencil::fourth_order(),
            scheme([-1.0, 0.99], [-2.5, 2.66], [-0.8, 1.0], [-1.2, 1.3]),
        ),
    ];
    for (stencil, bs) in cases {
        let traj = integrate(&ic, &stencil, &bs, &grid).unwrap();
        let naive = Naive {
            n: 30,
            h: grid.h(),
            a: stencil.coeffs,
            bs: bs.clone(),
        }
        .run(&ic.u, &ic.p, grid.tau(), 60);
        assert_eq!(traj.n_levels(), naive.len());
        for (s, (u, p)) in traj.states.iter().zip(&naive) {
            for (a, b) in s.u.iter().zip(u).chain(s.p.iter().zip(p)) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }
}

#[test]
fn first_step_is_two_euler_stages() {
    let grid = GridSpec::new(30, 1.0 / 120.0, 1).unwrap();
    let ic = sample_state(&[ModeSpec::unit(3)], &grid, 0.0);
    let stencil = InteriorStencil::second_order();
    let bs = BoundaryScheme::classical(1).unwrap();
    let (half, one) = first_step(&ic, &stencil, &bs, &grid).unwrap();
    let tau = grid.tau();
    let h = grid.h();
    // By hand: u^{1/2}_i = u_i + tau/2 (p_{i+1/2} - p_{i-1/2})/h, and so on.
    for i in 1..30 {
        let uh = ic.u[i] + 0.5 * tau * (ic.p[i] - ic.p[i - 1]) / h;
        assert!((half.u[i] - uh).abs() < 1e-14);
    }
    for m in 0..30 {
        let ph = ic.p[m] + 0.5 * tau * (ic.u[m + 1] - ic.u[m]) / h;
        assert!((half.p[m] - ph).abs() < 1e-14);
    }
    for i in 1..30 {
        let u1 = ic.u[i] + tau * (half.p[i] - half.p[i - 1]) / h;
        assert!((one.u[i] - u1).abs() < 1e-14);
    }
    for m in 0..30 {
        let p1 = ic.p[m] + tau * (half.u[m + 1] - half.u[m]) / h;
        assert!((one.p[m] - p1).abs() < 1e-14);
    }
    assert_eq!((half.t, one.t), (0.5 * tau, tau));
    assert_eq!((one.u[0], one.u[30]), (0.0, 0.0));
}

#[test]
fn leapfrog_step_matches_formula() {
    let grid = GridSpec::new(30, 1.0 / 120.0, 1).unwrap();
    let ic = sample_state(&[ModeSpec::unit(3)], &grid, 0.0);
    let stencil = InteriorStencil::second_order();
    let bs = BoundaryScheme::classical(1).unwrap();
    let (_, one) = first_step(&ic, &stencil, &bs, &grid).unwrap();
    let two = leapfrog_step(&ic, &one, &stencil, &bs, &grid).unwrap();
    let (tau, h) = (grid.tau(), grid.h());
    for i in 1..30 {
        let want = ic.u[i] + 2.0 * tau * (one.p[i] - one.p[i - 1]) / h;
        assert!((two.u[i] - want).abs() < 1e-14);
    }
    for m in 0..30 {
        let want = ic.p[m] + 2.0 * tau * (one.u[m + 1] - one.u[m]) / h;
        assert!((two.p[m] - want).abs() < 1e-14);
    }
    let zero = State::zeros(&grid, 0.0);
    let z = leapfrog_step(&zero, &zero, &stencil, &bs, &grid).unwrap();
    assert!(z.u.iter().chain(&z.p).all(|v| *v == 0.0));
}

/// For the second-order interior with classical boundary rows, `sin(k pi x_i)`
/// and `cos(k pi x_{m+1/2})` span an invariant subspace, and the
/// semi-discrete system rotates it at frequency `2 sin(k pi h / 2) / h`.
fn semi_discrete_mode(grid: &GridSpec, k: u32, t: f64) -> State {
    let kappa = k as f64 * PI;
    let omega = 2.0 * (kappa * grid.h() / 2.0).sin() / grid.h();
    let (a, b) = ((omega * t).cos() - (omega * t).sin(), (omega * t).cos() + (omega * t).sin());
    let n = grid.n_cells();
    let mut u: Vec<f64> = (0..=n).map(|i| a * (kappa * grid.x_u(i)).sin()).collect();
    u[0] = 0.0;
    u[n] = 0.0;
    let p = (0..n).map(|m| b * (kappa * grid.x_p(m)).cos()).collect();
    State { u, p, t }
}

#[test]
fn first_step_local_error_is_third_order() {
    let stencil = InteriorStencil::second_order();
    let bs = BoundaryScheme::classical(1).unwrap();
    let err = |tau: f64| {
        let grid = GridSpec::new(30, tau, 1).unwrap();
        let ic = semi_discrete_mode(&grid, 1, 0.0);
        let (_, one) = first_step(&ic, &stencil, &bs, &grid).unwrap();
        let exact = semi_discrete_mode(&grid, 1, tau);
        one.u
            .iter()
            .zip(&exact.u)
            .chain(one.p.iter().zip(&exact.p))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2, e3) = (err(1.0 / 60.0), err(1.0 / 120.0), err(1.0 / 240.0));
    let (r1, r2) = (e1 / e2, e2 / e3);
    assert!((7.0..9.0).contains(&r1), "ratio {r1}");
    assert!((7.0..9.0).contains(&r2), "ratio {r2}");
    // C estimated from the coarse pair predicts the fine error
    let c = e2 / (1.0f64 / 120.0).powi(3);
    assert!(e3 < 1.2 * c * (1.0f64 / 240.0).powi(3));
}

#[test]
fn derivative_examples() {
    let grid = GridSpec::new(30, 0.01, 1).unwrap();
    let s2 = InteriorStencil::second_order();
    let classical = BoundaryScheme::classical(1).unwrap();
    let d = derivative_p(&[2.5; 30], &s2, &classical, &grid).unwrap();
    assert!(d.iter().all(|v| v.abs() < 1e-12));
    let lin: Vec<f64> = (0..30).map(|m| grid.x_p(m)).collect();
    let d = derivative_p(&lin, &s2, &classical, &grid).unwrap();
    assert!(d.iter().all(|v| (v - 1.0).abs() < 1e-12));
    let lin_u: Vec<f64> = (0..=30).map(|i| grid.x_u(i)).collect();
    let d = derivative_u(&lin_u, &s2, &classical, &grid).unwrap();
    assert!(d.iter().all(|v| (v - 1.0).abs() < 1e-12));
    assert!(derivative_u(&[0.0; 31], &s2, &classical, &grid)
        .unwrap()
        .iter()
        .all(|v| *v == 0.0));

    let h = grid.h();
    let bs = scheme([-1.048, 1.048], [-1.023, 1.023], [-1.0, 1.0], [-1.0, 1.0]);
    let p: Vec<f64> = (0..30).map(|m| (3.0 * PI * grid.x_p(m)).cos()).collect();
    let d = derivative_p(&p, &s2, &bs, &grid).unwrap();
    assert!((d[0] - 1.023 * (p[1] - p[0]) / h).abs() < 1e-12);
    let u: Vec<f64> = (0..=30).map(|i| (3.0 * PI * grid.x_u(i)).sin()).collect();
    let d = derivative_u(&u, &s2, &bs, &grid).unwrap();
    assert!((d[0] - 1.048 * (u[1] - u[0]) / h).abs() < 1e-12);
}

#[test]
fn sign_flipped_u_boundary_diverges() {
    let grid = GridSpec::new(30, 1.0 / 120.0, 36_000).unwrap();
    let ic = sample_state(&[ModeSpec::unit(3)], &grid, 0.0);
    let bs = scheme([1.0, -1.0], [-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]);
    match integrate(&ic, &InteriorStencil::second_order(), &bs, &grid) {
        Err(Error::Diverged { t, magnitude, .. }) => {
            assert!(t < 300.0);
            assert!(magnitude > 1e6 || magnitude.is_nan());
        }
        other => panic!("expected divergence, got {:?}", other.map(|t| t.n_levels())),
    }
}

#[test]
fn classical_run_stays_bounded() {
    let grid = GridSpec::new(30, 1.0 / 120.0, 36_000).unwrap();
    let ic = sample_state(&[ModeSpec::unit(3)], &grid, 0.0);
    for stencil in [InteriorStencil::second_order(), InteriorStencil::fourth_order()] {
        let traj = integrate(&ic, &stencil, &BoundaryScheme::classical(1).unwrap(), &grid).unwrap();
        assert_eq!(traj.n_levels(), 36_001);
        assert!(traj.states.iter().all(|s| s.max_abs() < 2.0));
        assert!(traj.states.iter().all(|s| s.u[0] == 0.0 && s.u[30] == 0.0));
    }
}

fn arb_scheme() -> impl Strategy<Value = BoundaryScheme> {
    prop::array::uniform4(0.9..1.1f64).prop_map(|c| {
        scheme([-c[0], c[0]], [-c[1], c[1]], [-c[2], c[2]], [-c[3], c[3]])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn integration_is_linear_in_the_initial_state(
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
        c2 in -1.0..1.0f64,
        c5 in -1.0..1.0f64,
        order in prop::sample::select(vec![2u32, 4]),
        bs in arb_scheme(),
    ) {
        let grid = GridSpec::new(30, 1.0 / 120.0, 240).unwrap();
        let stencil = InteriorStencil::of_order(order).unwrap();
        let ic1 = sample_state(&[ModeSpec::new(2, 1.0, c2)], &grid, 0.0);
        let ic2 = sample_state(&[ModeSpec::new(5, c5, 1.0)], &grid, 0.0);
        let mix = ic1.combine(a, &ic2, b);
        let t1 = integrate(&ic1, &stencil, &bs, &grid).unwrap();
        let t2 = integrate(&ic2, &stencil, &bs, &grid).unwrap();
        let tm = integrate(&mix, &stencil, &bs, &grid).unwrap();
        for ((s1, s2), sm) in t1.states.iter().zip(&t2.states).zip(&tm.states) {
            let want = s1.combine(a, s2, b);
            let scale = want.max_abs().max(1.0);
            for (x, y) in sm.u.iter().zip(&want.u).chain(sm.p.iter().zip(&want.p)) {
                prop_assert!((x - y).abs() <= 1e-12 * scale);
            }
        }
    }
}
