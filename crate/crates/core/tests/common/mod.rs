#![allow(dead_code)]

use dgocp::problem::{OcProblem, SecondDerivatives};
use nalgebra::DMatrix;

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// A problem with its control box replaced.
pub struct Boxed<P> {
    pub inner: P,
    pub lo: f64,
    pub hi: f64,
}

impl<P: OcProblem> OcProblem for Boxed<P> {
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }
    fn control_dim(&self) -> usize {
        self.inner.control_dim()
    }
    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }
    fn initial_state(&self) -> Vec<f64> {
        self.inner.initial_state()
    }
    fn control_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![self.lo; self.control_dim()], vec![self.hi; self.control_dim()])
    }
    fn f(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        self.inner.f(t, x, u, out)
    }
    fn fx(&self, t: f64, x: &[f64], u: &[f64], out: &mut DMatrix<f64>) {
        self.inner.fx(t, x, u, out)
    }
    fn fu(&self, t: f64, x: &[f64], u: &[f64], out: &mut DMatrix<f64>) {
        self.inner.fu(t, x, u, out)
    }
    fn g(&self, t: f64, x: &[f64], u: &[f64]) -> f64 {
        self.inner.g(t, x, u)
    }
    fn gx(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        self.inner.gx(t, x, u, out)
    }
    fn gu(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        self.inner.gu(t, x, u, out)
    }
    fn second_derivatives(&self, t: f64, x: &[f64], u: &[f64]) -> Option<SecondDerivatives> {
        self.inner.second_derivatives(t, x, u)
    }
    fn stationary_control(&self, t: f64, x: &[f64], lambda: &[f64]) -> Option<Vec<f64>> {
        self.inner.stationary_control(t, x, lambda)
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
