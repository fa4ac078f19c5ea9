//! Oracles for the basis, the DG containers and the forward/backward solvers.

mod common;

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use dgocp::basis::{gauss_rule, legendre_deriv, legendre_eval};
use dgocp::builtin::LinearLq;
use dgocp::control::ControlFunction;
use dgocp::ivp::{solve_backward, solve_forward, Discretization, IvpRight, NewtonOptions};
use dgocp::mesh::{DGFunction, Partition, Side};
use dgocp::Error;
use nalgebra::DMatrix;

use common::rel;

fn scalar_rhs(
    f: impl Fn(f64, f64) -> f64,
    dfdx: impl Fn(f64, f64) -> f64,
) -> IvpRight<impl Fn(f64, &[f64], &mut [f64]), impl Fn(f64, &[f64], &mut DMatrix<f64>)> {
    IvpRight::new(1, move |t, x: &[f64], o: &mut [f64]| o[0] = f(t, x[0]), move |t, x: &[f64], j: &mut DMatrix<f64>| j[(0, 0)] = dfdx(t, x[0]))
}

#[test]
fn legendre_values() {
    assert_eq!(legendre_eval(0, 0.3).unwrap(), 1.0);
    assert_eq!(legendre_eval(1, 0.5).unwrap(), 0.5);
    assert_abs_diff_eq!(legendre_eval(2, 1.0).unwrap(), 1.0, epsilon = 1e-15);
    assert_eq!(legendre_deriv(1, -0.7).unwrap(), 1.0);
    assert_eq!(legendre_deriv(0, 0.2).unwrap(), 0.0);
    assert_abs_diff_eq!(legendre_deriv(2, 0.5).unwrap(), 1.5, epsilon = 1e-15);
    assert!(matches!(legendre_eval(1, 1.5), Err(Error::Domain(_))));
}

#[test]
fn gauss_rules() {
    let q1 = gauss_rule(1).unwrap();
    assert_eq!(q1.points(), &[0.0]);
    assert_eq!(q1.weights(), &[2.0]);
    let q2 = gauss_rule(2).unwrap();
    assert_abs_diff_eq!(q2.points()[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
    assert_abs_diff_eq!(q2.weights()[0], 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(gauss_rule(3).unwrap().integrate(|x| x.powi(4)), 0.4, epsilon = 1e-15);
    assert!(gauss_rule(0).is_err());
}

#[test]
fn partitions() {
    let p = Partition::uniform(1.0, 10).unwrap();
    assert_abs_diff_eq!(p.step(0), 0.1, epsilon = 1e-15);
    assert_abs_diff_eq!(p.nodes()[3], 0.3, epsilon = 1e-15);
    assert_eq!(Partition::uniform(0.2, 2).unwrap().nodes(), &[0.0, 0.1, 0.2]);
    assert_abs_diff_eq!(Partition::uniform(1.0, 320).unwrap().max_step(), 0.003125, epsilon = 1e-15);
}

#[test]
fn dg_function_evaluation() {
    let part = Arc::new(Partition::new(vec![0.0, 0.1, 0.4, 1.0]).unwrap());
    let c = DGFunction::constant(part.clone(), 2, &[1.5]);
    assert_eq!(c.eval(0.37, Side::Left).unwrap(), vec![1.5]);
    let quad = gauss_rule(4).unwrap();
    let t = DGFunction::project_l2(|t| vec![t], part.clone(), 1, &quad);
    for side in [Side::Left, Side::Right] {
        assert_abs_diff_eq!(t.eval(0.25, side).unwrap()[0], 0.25, epsilon = 1e-15);
    }
    assert!(matches!(t.eval(1.2, Side::Left), Err(Error::Domain(_))));
    assert!(t.l2_error(|t| vec![t], &quad) < 1e-13);
    let zero = DGFunction::zeros(Arc::new(Partition::uniform(1.0, 3).unwrap()), 1, 1);
    assert_abs_diff_eq!(zero.l2_error(|_| vec![1.0], &quad), 1.0, epsilon = 1e-14);
}

#[test]
fn projection_examples() {
    let one = Arc::new(Partition::uniform(1.0, 1).unwrap());
    let quad = gauss_rule(5).unwrap();
    let sq = DGFunction::project_l2(|t| vec![t * t], one, 0, &quad);
    assert_abs_diff_eq!(sq.coeffs()[0], 1.0 / 3.0, epsilon = 1e-15);

    // piecewise-constant projection of the optimal control converges at rate 1
    let errs: Vec<f64> = (0..4)
        .map(|k| {
            let part = Arc::new(Partition::uniform(1.0, 10 << k).unwrap());
            let f = DGFunction::project_l2(|t| vec![LinearLq::exact_control(t)], part, 0, &quad);
            f.l2_error(|t| vec![LinearLq::exact_control(t)], &quad)
        })
        .collect();
    for w in errs.windows(2) {
        assert!(((w[0] / w[1]).log2() - 1.0).abs() < 0.05, "{errs:?}");
    }
}

#[test]
fn total_variation_examples() {
    let part = Arc::new(Partition::uniform(1.0, 2).unwrap());
    assert_eq!(DGFunction::constant(part.clone(), 1, &[0.4]).total_variation(), 0.0);
    let step = DGFunction::from_coeffs(part, 0, 1, vec![0.0, 1.0]).unwrap();
    assert_abs_diff_eq!(step.total_variation(), 1.0, epsilon = 1e-15);
    let one = Arc::new(Partition::uniform(1.0, 1).unwrap());
    let lin = DGFunction::project_l2(|t| vec![2.0 * t], one, 1, &gauss_rule(3).unwrap());
    assert_abs_diff_eq!(lin.total_variation(), 2.0, epsilon = 1e-14);
    let closed = ControlFunction::closed(1, |t| vec![t]);
    assert!(matches!(closed.total_variation(), Err(Error::Unsupported(_))));
}

#[test]
fn zero_rhs_keeps_constants() {
    let rhs = scalar_rhs(|_, _| 0.0, |_, _| 0.0);
    let part = Arc::new(Partition::new(vec![0.0, 0.3, 0.35, 1.0]).unwrap());
    for r in 0..4 {
        let disc = Discretization::new(part.clone(), r);
        let x = solve_forward(&rhs, &[5.0], &disc, &NewtonOptions::default()).unwrap();
        assert_eq!(x.coeffs().iter().filter(|c| **c != 0.0).count(), 3);
        assert!(x.coeffs().chunks(r + 1).all(|c| c[0] == 5.0));
        let l = solve_backward(&rhs, &[3.0], &disc, &NewtonOptions::default()).unwrap();
        assert!(l.coeffs().chunks(r + 1).all(|c| c[0] == 3.0));
    }
}

// The following drive the solver with the exact optimal control (or state)
// rather than the coupled discrete optimum, so the table entries hold only
// up to a small relative deviation (measured below 2.5%).

#[test]
fn state_with_exact_control_r1() {
    let rhs = scalar_rhs(|t, x| -x + LinearLq::exact_control(t), |_, _| -1.0);
    let disc = Discretization::uniform(1.0, 40, 1).unwrap();
    let x = solve_forward(&rhs, &[1.0], &disc, &NewtonOptions::default()).unwrap();
    let err = x.nodal_l2_error(|t, _| vec![LinearLq::exact_state(t)]);
    assert!(rel(err, 1.2240e-4) < 0.01, "{err:e}");
}

#[test]
fn state_with_exact_control_r3() {
    let rhs = scalar_rhs(|t, x| -x + LinearLq::exact_control(t), |_, _| -1.0);
    let disc = Discretization::uniform(1.0, 80, 3).unwrap();
    let x = solve_forward(&rhs, &[1.0], &disc, &NewtonOptions::default()).unwrap();
    let err = x.nodal_l2_error(|t, _| vec![LinearLq::exact_state(t)]);
    assert!(rel(err, 7.1152e-11) < 0.01, "{err:e}");
}

#[test]
fn backward_with_exact_state() {
    // μ' = μ - x̄, μ(1) = 0 is solved by μ = -ū
    let rhs = scalar_rhs(|t, m| m - LinearLq::exact_state(t), |_, _| 1.0);
    let disc = Discretization::uniform(1.0, 10, 2).unwrap();
    let mu = solve_backward(&rhs, &[0.0], &disc, &NewtonOptions::default()).unwrap();
    let err = mu.nodal_l2_error(|t, _| vec![-LinearLq::exact_control(t)]);
    assert!(rel(err, 1.3269e-5) < 0.025, "{err:e}");
}

fn rk4(f: impl Fn(f64, f64) -> f64, x0: f64, t_end: f64, dt: f64) -> Vec<(f64, f64)> {
    let steps = (t_end / dt).round() as usize;
    let mut out = vec![(0.0, x0)];
    let mut x = x0;
    for i in 0..steps {
        let t = i as f64 * dt;
        let k1 = f(t, x);
        let k2 = f(t + dt / 2.0, x + dt / 2.0 * k1);
        let k3 = f(t + dt / 2.0, x + dt / 2.0 * k2);
        let k4 = f(t + dt, x + dt * k3);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push(((i + 1) as f64 * dt, x));
    }
    out
}

#[test]
fn exponential_growth_against_rk4() {
    let rhs = scalar_rhs(|_, x| x, |_, _| 1.0);
    let disc = Discretization::uniform(1.0, 20, 2).unwrap();
    let x = solve_forward(&rhs, &[1.0], &disc, &NewtonOptions::default()).unwrap();
    let oracle = rk4(|_, x| x, 1.0, 1.0, 1e-5);
    let mut worst: f64 = 0.0;
    for n in 1..=20 {
        let (t, v) = oracle[n * 5000];
        worst = worst.max((x.eval(t, Side::Left).unwrap()[0] - v).abs());
    }
    assert!(worst < 1e-6, "{worst:e}");
}

#[test]
fn uncontrolled_riccati_blowup_profile() {
    let rhs = scalar_rhs(|_, x| x * x, |_, x| 2.0 * x);
    let disc = Discretization::uniform(0.2, 64, 3).unwrap();
    let x = solve_forward(&rhs, &[2.0], &disc, &NewtonOptions::default()).unwrap();
    assert_abs_diff_eq!(x.eval(0.2, Side::Left).unwrap()[0], 10.0 / 3.0, epsilon = 1e-6);
}

#[test]
fn sup_node_error_rate() {
    // x' = -x + sin t, smooth exact solution
    let exact = |t: f64| 1.5 * (-t).exp() + 0.5 * (t.sin() - t.cos());
    let rhs = scalar_rhs(|t, x| -x + t.sin(), |_, _| -1.0);
    for r in 0..3 {
        let errs: Vec<f64> = (0..4)
            .map(|k| {
                let n = 4 << k;
                let disc = Discretization::uniform(1.0, n, r).unwrap();
                let x = solve_forward(&rhs, &[1.0], &disc, &NewtonOptions::default()).unwrap();
                (1..=n)
                    .map(|i| {
                        let t = i as f64 / n as f64;
                        (x.eval(t, Side::Left).unwrap()[0] - exact(t)).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        let rate = (errs[2] / errs[3]).log2();
        // nodal values superconverge; the rate is at least r + 1
        assert!(rate > r as f64 + 1.0 - 0.1, "r = {r}: {errs:?}");
    }
}

#[test]
fn newton_failure_reports_interval() {
    let rhs = scalar_rhs(|_, x| x * x, |_, x| 2.0 * x);
    let disc = Discretization::uniform(1.0, 2, 1).unwrap();
    let opts = NewtonOptions { max_iter: 3, ..Default::default() };
    match solve_forward(&rhs, &[50.0], &disc, &opts) {
        Err(Error::SolverFailure { interval, residual, .. }) => {
            assert_eq!(interval, 0);
            assert!(residual > 0.0);
        }
        other => panic!("expected a solver failure, got {other:?}"),
    }
}
