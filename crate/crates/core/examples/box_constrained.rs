//! Tracking with a bounded control: x' = u, x(0) = 0, cost ½∫((x - 1)² + 0.01 u²),
//! 0 ≤ u ≤ 2. The bound is active early on, then the control releases.
//!
//! `cargo run --example box_constrained`

use dgocp::control::ControlFunction;
use dgocp::ivp::Discretization;
use dgocp::mesh::Side;
use dgocp::optimize::{minimize, Method, OptimizeOptions};
use dgocp::problem::{OcProblem, SecondDerivatives};
use nalgebra::DMatrix;

const ALPHA: f64 = 0.01;

struct Tracking;

impl OcProblem for Tracking {
    fn state_dim(&self) -> usize {
        1
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn horizon(&self) -> f64 {
        2.0
    }
    fn initial_state(&self) -> Vec<f64> {
        vec![0.0]
    }
    fn control_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0], vec![2.0])
    }
    fn f(&self, _t: f64, _x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = u[0];
    }
    fn fx(&self, _t: f64, _x: &[f64], _u: &[f64], out: &mut DMatrix<f64>) {
        out[(0, 0)] = 0.0;
    }
    fn fu(&self, _t: f64, _x: &[f64], _u: &[f64], out: &mut DMatrix<f64>) {
        out[(0, 0)] = 1.0;
    }
    fn g(&self, _t: f64, x: &[f64], u: &[f64]) -> f64 {
        0.5 * ((x[0] - 1.0).powi(2) + ALPHA * u[0] * u[0])
    }
    fn gx(&self, _t: f64, x: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = x[0] - 1.0;
    }
    fn gu(&self, _t: f64, _x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = ALPHA * u[0];
    }
    fn second_derivatives(&self, _t: f64, _x: &[f64], _u: &[f64]) -> Option<SecondDerivatives> {
        let mut s = SecondDerivatives::zeros(1, 1);
        s.gxx[(0, 0)] = 1.0;
        s.guu[(0, 0)] = ALPHA;
        Some(s)
    }
    fn stationary_control(&self, _t: f64, _x: &[f64], lambda: &[f64]) -> Option<Vec<f64>> {
        Some(vec![lambda[0] / ALPHA])
    }
}

fn main() -> dgocp::Result<()> {
    let disc = Discretization::uniform(2.0, 40, 1)?;
    let u0 = ControlFunction::closed(1, |_| vec![0.0]);
    for method in [Method::ProjectedGradient, Method::ForwardBackwardSweep] {
        let opts = OptimizeOptions {
            method,
            grad_tol: 1e-9,
            ..OptimizeOptions::default()
        };
        let rep = minimize(&Tracking, &u0, &disc, 1, &opts)?;
        println!("{method:?}: converged {} after {} iterations, cost {:.10}", rep.converged, rep.iterations, rep.final_cost());
        for t in [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0] {
            let side = if t == 0.0 { Side::Right } else { Side::Left };
            println!("  t={t:<4}  u={:+.5}  x={:.5}", rep.u_star.eval(t, side)?[0], rep.x_star.eval(t, side)?[0]);
        }
        println!("  total variation of u: {:.4}", rep.tv_u);
    }
    Ok(())
}
