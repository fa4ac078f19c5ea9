//! Oracles for the state, adjoint, cost, gradient, tangent and Hessian of the
//! discrete reduced problem.

mod common;

use std::sync::Arc;

use dgocp::builtin::{LinearLq, NonlinearQuadratic};
use dgocp::control::ControlFunction;
use dgocp::ivp::{Discretization, NewtonOptions};
use dgocp::mesh::{DGFunction, Partition};
use dgocp::optimize::{minimize, stationarity, OptimizeOptions};
use dgocp::problem::OcProblem;
use dgocp::reduced::{
    cost, evaluate, hessian_form, reduced_gradient, solve_adjoint, solve_state, tangent_derivative, tangent_solve,
};
use dgocp::verify::random_control;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{rel, simpson};

/// `x' = a x` (no control influence), `g = c + ½ u²`-like toy problems.
struct Toy {
    a: f64,
    g_const: f64,
    x_in_g: bool,
}

impl OcProblem for Toy {
    fn state_dim(&self) -> usize {
        1
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn horizon(&self) -> f64 {
        1.0
    }
    fn initial_state(&self) -> Vec<f64> {
        vec![0.8]
    }
    fn f(&self, _: f64, x: &[f64], _: &[f64], out: &mut [f64]) {
        out[0] = self.a * x[0];
    }
    fn fx(&self, _: f64, _: &[f64], _: &[f64], out: &mut DMatrix<f64>) {
        out[(0, 0)] = self.a;
    }
    fn fu(&self, _: f64, _: &[f64], _: &[f64], out: &mut DMatrix<f64>) {
        out[(0, 0)] = 0.0;
    }
    fn g(&self, _: f64, x: &[f64], _: &[f64]) -> f64 {
        self.g_const + if self.x_in_g { x[0] } else { 0.0 }
    }
    fn gx(&self, _: f64, _: &[f64], _: &[f64], out: &mut [f64]) {
        out[0] = if self.x_in_g { 1.0 } else { 0.0 };
    }
    fn gu(&self, _: f64, _: &[f64], _: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
}

fn newton() -> NewtonOptions {
    NewtonOptions::default()
}

fn closed(f: fn(f64) -> f64) -> ControlFunction {
    ControlFunction::closed(1, move |t| vec![f(t)])
}

#[test]
fn trivial_dynamics_and_costs() {
    let disc = Discretization::uniform(1.0, 7, 2).unwrap();
    let u = ControlFunction::closed(1, |t| vec![t.sin()]);
    let still = Toy { a: 0.0, g_const: 1.0, x_in_g: false };
    let x = solve_state(&still, &u, &disc, &newton()).unwrap();
    assert!(x.coeffs().chunks(3).all(|c| c == [0.8, 0.0, 0.0]));
    assert!((cost(&still, &u, &x, &disc).unwrap() - 1.0).abs() < 1e-14);
    let lam = solve_adjoint(&still, &u, &x, &disc, &newton()).unwrap();
    assert!(lam.coeffs().iter().all(|c| *c == 0.0));
    let grad = reduced_gradient(&still, &u, &x, &lam, &disc).unwrap();
    assert_eq!(grad.sup_norm(), 0.0);

    let zero = Toy { a: 0.3, g_const: 0.0, x_in_g: false };
    let x = solve_state(&zero, &u, &disc, &newton()).unwrap();
    assert_eq!(cost(&zero, &u, &x, &disc).unwrap(), 0.0);
    let v = ControlFunction::closed(1, |_| vec![0.0]);
    let y = tangent_solve(&LinearLq, &u, &x, &v, &disc, &newton()).unwrap();
    assert!(y.coeffs().iter().all(|c| *c == 0.0));
    assert_eq!(hessian_form(&LinearLq, &u, &v, &disc, &newton()).unwrap(), 0.0);
}

#[test]
fn state_with_exact_control_r3() {
    // exact ū instead of the discrete optimum: agreement within 1%
    let disc = Discretization::uniform(1.0, 80, 3).unwrap();
    let x = solve_state(&LinearLq, &closed(LinearLq::exact_control), &disc, &newton()).unwrap();
    let err = x.nodal_l2_error(|t, _| vec![LinearLq::exact_state(t)]);
    assert!(rel(err, 7.1152e-11) < 0.01, "{err:e}");
}

#[test]
fn cost_at_exact_solution_matches_simpson() {
    let oracle = 0.5 * simpson(|t| LinearLq::exact_state(t).powi(2) + LinearLq::exact_control(t).powi(2), 0.0, 1.0, 1_000_000);
    let disc = Discretization::uniform(1.0, 64, 2).unwrap();
    let u = closed(LinearLq::exact_control);
    let x = solve_state(&LinearLq, &u, &disc, &newton()).unwrap();
    let j = cost(&LinearLq, &u, &x, &disc).unwrap();
    assert!((j - oracle).abs() < 1e-8, "{j} vs {oracle}");
}

#[test]
fn adjoint_at_discrete_optimum_r2_finest() {
    let disc = Discretization::uniform(1.0, 320, 2).unwrap();
    let u0 = ControlFunction::closed(1, |_| vec![0.0]);
    let opts = OptimizeOptions { grad_tol: 1e-14, ..Default::default() };
    let rep = minimize(&LinearLq, &u0, &disc, 2, &opts).unwrap();
    let err = rep.lambda_star.nodal_l2_error(|t, _| vec![LinearLq::exact_adjoint(t)]);
    assert!(rel(err, 4.1672e-10) < 0.01, "{err:e}");
}

#[test]
fn gradient_vanishes_at_converged_optimum() {
    let disc = Discretization::uniform(1.0, 10, 1).unwrap();
    let u0 = ControlFunction::closed(1, |_| vec![0.0]);
    let rep = minimize(&LinearLq, &u0, &disc, 1, &OptimizeOptions::default()).unwrap();
    let eval = evaluate(&LinearLq, &ControlFunction::Dg(rep.u_star.clone()), &disc, &newton()).unwrap();
    assert!(eval.grad.sup_norm() < 1e-10, "{:e}", eval.grad.sup_norm());
}

#[test]
fn adjoint_gradient_equals_tangent_derivative() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (p, r) in [(&LinearLq as &dyn OcProblem, 1), (&NonlinearQuadratic as &dyn OcProblem, 2)] {
        let disc = Discretization::uniform(p.horizon(), 9, r).unwrap();
        for _ in 0..5 {
            let u = ControlFunction::Dg(random_control(&mut rng, disc.partition(), r, 1));
            let v = ControlFunction::Dg(random_control(&mut rng, disc.partition(), r, 1));
            let eval = evaluate(p, &u, &disc, &newton()).unwrap();
            let y = tangent_solve(p, &u, &eval.x_h, &v, &disc, &newton()).unwrap();
            let a = eval.grad.directional(&v, &disc).unwrap();
            let b = tangent_derivative(p, &u, &eval.x_h, &y, &v, &disc).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn stationarity_is_sup_of_u_minus_adjoint() {
    // no box: u - Π(u - ∇j) = ∇j = u - λ_h for this problem
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let disc = Discretization::uniform(1.0, 12, 2).unwrap();
    for _ in 0..5 {
        let u = random_control(&mut rng, disc.partition(), 2, 1);
        let uc = ControlFunction::Dg(u.clone());
        let s = stationarity(&LinearLq, &uc, &disc, &newton()).unwrap();
        let eval = evaluate(&LinearLq, &uc, &disc, &newton()).unwrap();
        let diff = u.add_scaled(-1.0, &eval.lambda_h).sample(disc.basis());
        assert!((s - diff.sup_norm()).abs() < 1e-12);
    }
}

#[test]
fn hessian_is_coercive_on_linear_lq() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let disc = Discretization::uniform(1.0, 16, 1).unwrap();
    let u = ControlFunction::closed(1, |_| vec![0.0]);
    for _ in 0..50 {
        let v = random_control(&mut rng, disc.partition(), 1, 1);
        let v = v.scaled(1.0 / v.l2_norm());
        let h = hessian_form(&LinearLq, &u, &ControlFunction::Dg(v), &disc, &newton()).unwrap();
        assert!(h >= 0.99, "{h}");
    }
}

#[test]
fn adjoint_is_lipschitz_in_control() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in [8, 32] {
        let disc = Discretization::uniform(0.2, n, 1).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let u1 = random_control(&mut rng, disc.partition(), 1, 1);
            let u2 = random_control(&mut rng, disc.partition(), 1, 1);
            let lam = |u: &DGFunction| {
                let uc = ControlFunction::Dg(u.clone());
                evaluate(&NonlinearQuadratic, &uc, &disc, &newton()).unwrap().lambda_h
            };
            let ratio = lam(&u1).add_scaled(-1.0, &lam(&u2)).l2_norm() / u1.add_scaled(-1.0, &u2).l2_norm();
            worst = worst.max(ratio);
        }
        // with T = 0.2 and |x| <= 3 the Lipschitz constant stays moderate
        assert!(worst < 5.0, "N = {n}: {worst}");
    }
}

#[test]
fn closed_form_and_projected_controls_agree() {
    let disc = Discretization::uniform(1.0, 10, 3).unwrap();
    let part: Arc<Partition> = disc.partition().clone();
    let poly = |t: f64| vec![0.3 - t + 2.0 * t * t];
    let proj = DGFunction::project_l2(poly, part, 2, disc.basis().quadrature());
    let a = solve_state(&LinearLq, &ControlFunction::closed(1, poly), &disc, &newton()).unwrap();
    let b = solve_state(&LinearLq, &ControlFunction::Dg(proj), &disc, &newton()).unwrap();
    for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
        assert!((x - y).abs() < 1e-14);
    }
}
