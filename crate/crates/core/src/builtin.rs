//! Built-in test problems.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::problem::{OcProblem, SecondDerivatives};

/// `min ½∫_0^1 x² + u² dt` s.t. `x' = -x + u`, `x(0) = 1`, no box.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearLq;

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn lq_denominator() -> f64 {
    SQRT2 * SQRT2.cosh() + SQRT2.sinh()
}

impl LinearLq {
    /// Optimal state `x̄`.
    pub fn exact_state(t: f64) -> f64 {
        let s = SQRT2 * (t - 1.0);
        (SQRT2 * s.cosh() - s.sinh()) / lq_denominator()
    }

    /// Optimal control `ū`.
    pub fn exact_control(t: f64) -> f64 {
        (SQRT2 * (t - 1.0)).sinh() / lq_denominator()
    }

    /// Adjoint `λ̄ = ū` in the convention `λ' = -f_x λ + g_x`.
    pub fn exact_adjoint(t: f64) -> f64 {
        Self::exact_control(t)
    }
}

impl OcProblem for LinearLq {
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
        vec![1.0]
    }
    fn f(&self, _t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = -x[0] + u[0];
    }
    fn fx(&self, _t: f64, _x: &[f64], _u: &[f64], out: &mut DMatrix<f64>) {
        out[(0, 0)] = -1.0;
    }
    fn fu(&self, _t: f64, _x: &[f64], _u: &[f64], out: &mut DMatrix<f64>) {
        out[(0, 0)] = 1.0;
    }
    fn g(&self, _t: f64, x: &[f64], u: &[f64]) -> f64 {
        0.5 * (x[0] * x[0] + u[0] * u[0])
    }
    fn gx(&self, _t: f64, x: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = x[0];
    }
    fn gu(&self, _t: f64, _x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = u[0];
    }
    fn second_derivatives(&self, _t: f64, _x: &[f64], _u: &[f64]) -> Option<SecondDerivatives> {
        let mut s = SecondDerivatives::zeros(1, 1);
        s.gxx[(0, 0)] = 1.0;
        s.guu[(0, 0)] = 1.0;
        Some(s)
    }
    fn stationary_control(&self, _t: f64, _x: &[f64], lambda: &[f64]) -> Option<Vec<f64>> {
        Some(vec![lambda[0]])
    }
}

/// `min ½∫_0^{1/5} x² + u² dt` s.t. `x' = x² + u`, `x(0) = 2`, no box.
#[derive(Debug, Clone, Copy, Default)]
pub struct NonlinearQuadratic;

impl OcProblem for NonlinearQuadratic {
    fn state_dim(&self) -> usize {
        1
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn horizon(&self) -> f64 {
        0.2
    }
    fn initial_state(&self) -> Vec<f64> {
        vec![2.0]
    }
    fn f(&self, _t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = x[0] * x[0] + u[0];
    }
    fn fx(&self, _t: f64, x: &[f64], _u: &[f64], out: &mut DMatrix<f64>) {
        out[(0, 0)] = 2.0 * x[0];
    }
    fn fu(&self, _t: f64, _x: &[f64], _u: &[f64], out: &mut DMatrix<f64>) {
        out[(0, 0)] = 1.0;
    }
    fn g(&self, _t: f64, x: &[f64], u: &[f64]) -> f64 {
        0.5 * (x[0] * x[0] + u[0] * u[0])
    }
    fn gx(&self, _t: f64, x: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = x[0];
    }
    fn gu(&self, _t: f64, _x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = u[0];
    }
    fn second_derivatives(&self, _t: f64, _x: &[f64], _u: &[f64]) -> Option<SecondDerivatives> {
        let mut s = SecondDerivatives::zeros(1, 1);
        s.fxx[0][(0, 0)] = 2.0;
        s.gxx[(0, 0)] = 1.0;
        s.guu[(0, 0)] = 1.0;
        Some(s)
    }
    fn stationary_control(&self, _t: f64, _x: &[f64], lambda: &[f64]) -> Option<Vec<f64>> {
        Some(vec![lambda[0]])
    }
}

/// Manufactured problem with a polynomial solution: `x' = u`, `x(0) = 1`,
/// `g = ½(u - 2t)²` on `[0, 1]`. The optimum is `ū = 2t`, `x̄ = 1 + t²`, so
/// DG of degree `r >= 2` reproduces it exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct PolynomialCheck;

impl OcProblem for PolynomialCheck {
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
        vec![1.0]
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
    fn g(&self, t: f64, _x: &[f64], u: &[f64]) -> f64 {
        0.5 * (u[0] - 2.0 * t).powi(2)
    }
    fn gx(&self, _t: f64, _x: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn gu(&self, t: f64, _x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = u[0] - 2.0 * t;
    }
    fn second_derivatives(&self, _t: f64, _x: &[f64], _u: &[f64]) -> Option<SecondDerivatives> {
        let mut s = SecondDerivatives::zeros(1, 1);
        s.guu[(0, 0)] = 1.0;
        Some(s)
    }
    fn stationary_control(&self, t: f64, _x: &[f64], lambda: &[f64]) -> Option<Vec<f64>> {
        Some(vec![2.0 * t + lambda[0]])
    }
}

/// How the errors of a convergence study are measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceProtocol {
    /// Closed-form optimal state and control are known.
    Exact,
    /// Compare against a self-computed solution with `h = h_ref` and degree
    /// `r_ref` (`None`: the largest degree of the study).
    SelfRefined { h_ref: f64, r_ref: Option<usize> },
}

type ScalarFn = fn(f64) -> f64;

/// Entry of the problem registry.
pub struct BuiltinProblem {
    pub name: &'static str,
    pub problem: Box<dyn OcProblem + Send>,
    pub exact_state: Option<ScalarFn>,
    pub exact_control: Option<ScalarFn>,
    pub reference: ReferenceProtocol,
}

impl std::fmt::Debug for BuiltinProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BuiltinProblem")
            .field("name", &self.name)
            .field("reference", &self.reference)
            .finish_non_exhaustive()
    }
}

pub const BUILTIN_NAMES: [&str; 3] = ["linear-lq", "nonlinear-quadratic", "polynomial-check"];

impl BuiltinProblem {
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "linear-lq" => Ok(Self {
                name: "linear-lq",
                problem: Box::new(LinearLq),
                exact_state: Some(LinearLq::exact_state),
                exact_control: Some(LinearLq::exact_control),
                reference: ReferenceProtocol::Exact,
            }),
            "nonlinear-quadratic" => Ok(Self {
                name: "nonlinear-quadratic",
                problem: Box::new(NonlinearQuadratic),
                exact_state: None,
                exact_control: None,
                reference: ReferenceProtocol::SelfRefined {
                    h_ref: 0.1 * 2f64.powi(-9),
                    r_ref: None,
                },
            }),
            "polynomial-check" => Ok(Self {
                name: "polynomial-check",
                problem: Box::new(PolynomialCheck),
                exact_state: Some(|t| 1.0 + t * t),
                exact_control: Some(|t| 2.0 * t),
                reference: ReferenceProtocol::Exact,
            }),
            other => Err(Error::InvalidArgument(format!(
                "unknown problem `{other}` (expected one of {})",
                BUILTIN_NAMES.join(", ")
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::derivative_mismatch;

    fn central_diff(f: impl Fn(f64) -> f64, t: f64) -> f64 {
        let h = 1e-5;
        (f(t + h) - f(t - h)) / (2.0 * h)
    }

    #[test]
    fn linear_lq_closed_forms_satisfy_optimality_system() {
        // x' = -x + u, x(0) = 1; λ' = λ + x (= -f_x λ + g_x), λ(1) = 0; u = λ
        assert!((LinearLq::exact_state(0.0) - 1.0).abs() < 1e-14);
        assert!(LinearLq::exact_adjoint(1.0).abs() < 1e-15);
        for i in 1..20 {
            let t = i as f64 / 20.0;
            let (x, u, l) = (LinearLq::exact_state(t), LinearLq::exact_control(t), LinearLq::exact_adjoint(t));
            assert!((central_diff(LinearLq::exact_state, t) - (-x + u)).abs() < 1e-8);
            assert!((central_diff(LinearLq::exact_adjoint, t) - (l + x)).abs() < 1e-8);
            // opposite-sign multiplier: μ = -λ solves μ' = μ - x and ū = -μ
            let mu = |s: f64| -LinearLq::exact_adjoint(s);
            assert!((central_diff(mu, t) - (mu(t) - x)).abs() < 1e-8);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let probes = vec![(0.1, vec![0.7], vec![-0.3]), (0.15, vec![2.4], vec![1.1])];
        assert!(derivative_mismatch(&LinearLq, &probes) < 1e-5);
        assert!(derivative_mismatch(&NonlinearQuadratic, &probes) < 1e-5);
        assert!(derivative_mismatch(&PolynomialCheck, &probes) < 1e-5);
    }

    #[test]
    fn registry_lookup() {
        for name in BUILTIN_NAMES {
            assert_eq!(BuiltinProblem::by_name(name).unwrap().name, name);
        }
        assert!(BuiltinProblem::by_name("nope").is_err());
    }
}
