//! Finite-difference and residual checks of the discrete derivatives.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::ControlFunction;
use crate::error::Result;
use crate::ivp::{solve_backward, solve_backward_downwind, Discretization, IvpRight, NewtonOptions};
use crate::mesh::{DGFunction, Partition};
use crate::problem::{OcProblem, SecondDerivatives};
use crate::reduced::{adjoint_residual, cost, evaluate, hessian_form_from, solve_state, tangent_solve};

pub const GRADIENT_EPS: f64 = 1e-5;
pub const GRADIENT_TOL: f64 = 1e-6;
pub const TANGENT_TOL: f64 = 1e-6;
pub const HESSIAN_EPS: f64 = 1e-4;
pub const HESSIAN_TOL: f64 = 1e-4;
pub const ADJOINT_TOL: f64 = 1e-10;
pub const REVERSAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub order: usize,
    pub intervals: usize,
    pub seed: u64,
    /// Random `(u, v)` draws per derivative check.
    pub trials: usize,
    pub quad_points: Option<usize>,
    pub newton: NewtonOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            order: 1,
            intervals: 8,
            seed: 42,
            trials: 20,
            quad_points: None,
            newton: NewtonOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    /// Worst measured discrepancy over all trials.
    pub discrepancy: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.discrepancy <= self.tolerance
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<18} {}  discrepancy {:.3e} (tol {:.0e})",
            self.name,
            if self.passed() { "PASS" } else { "FAIL" },
            self.discrepancy,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Draws a DG control of degree `r` with modal coefficients in `[-1, 1]`,
/// damped by `2^{-k}` for mode `k`.
pub fn random_control(rng: &mut impl Rng, partition: &Arc<Partition>, r: usize, m: usize) -> DGFunction {
    let mut f = DGFunction::zeros(partition.clone(), r, m);
    for n in 0..partition.len() {
        for (j, c) in f.interval_coeffs_mut(n).iter_mut().enumerate() {
            *c = rng.gen_range(-1.0..1.0) * 0.5f64.powi((j / m) as i32);
        }
    }
    f
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

fn shifted(u: &DGFunction, v: &DGFunction, s: f64) -> ControlFunction {
    ControlFunction::Dg(u.add_scaled(s, v))
}

fn discretization(p: &(impl OcProblem + ?Sized), opts: &VerifyOptions) -> Result<Discretization> {
    let part = Arc::new(Partition::uniform(p.horizon(), opts.intervals)?);
    match opts.quad_points {
        Some(q) => Discretization::with_quad_points(part, opts.order, q),
        None => Ok(Discretization::new(part, opts.order)),
    }
}

fn j_h<P: OcProblem + ?Sized>(p: &P, u: &ControlFunction, disc: &Discretization, opts: &NewtonOptions) -> Result<f64> {
    let x = solve_state(p, u, disc, opts)?;
    cost(p, u, &x, disc)
}

/// Central difference of `j_h` along `v` against the adjoint gradient.
pub fn gradient_check<P: OcProblem + ?Sized>(p: &P, disc: &Discretization, opts: &VerifyOptions, rng: &mut impl Rng) -> Result<CheckResult> {
    let m = p.control_dim();
    let mut worst: f64 = 0.0;
    for _ in 0..opts.trials {
        let u = random_control(rng, disc.partition(), disc.degree(), m);
        let v = random_control(rng, disc.partition(), disc.degree(), m);
        let eval = evaluate(p, &ControlFunction::Dg(u.clone()), disc, &opts.newton)?;
        let g = eval.grad.directional(&ControlFunction::Dg(v.clone()), disc)?;
        let jp = j_h(p, &shifted(&u, &v, GRADIENT_EPS), disc, &opts.newton)?;
        let jm = j_h(p, &shifted(&u, &v, -GRADIENT_EPS), disc, &opts.newton)?;
        worst = worst.max(relative((jp - jm) / (2.0 * GRADIENT_EPS), g));
    }
    Ok(CheckResult {
        name: "gradient",
        discrepancy: worst,
        tolerance: GRADIENT_TOL,
    })
}

/// Central difference of the control-to-state map against the tangent solve,
/// relative in `L²`.
pub fn tangent_check<P: OcProblem + ?Sized>(p: &P, disc: &Discretization, opts: &VerifyOptions, rng: &mut impl Rng) -> Result<CheckResult> {
    let m = p.control_dim();
    let mut worst: f64 = 0.0;
    for _ in 0..opts.trials {
        let u = random_control(rng, disc.partition(), disc.degree(), m);
        let v = random_control(rng, disc.partition(), disc.degree(), m);
        let uc = ControlFunction::Dg(u.clone());
        let x = solve_state(p, &uc, disc, &opts.newton)?;
        let y = tangent_solve(p, &uc, &x, &ControlFunction::Dg(v.clone()), disc, &opts.newton)?;
        let xp = solve_state(p, &shifted(&u, &v, GRADIENT_EPS), disc, &opts.newton)?;
        let xm = solve_state(p, &shifted(&u, &v, -GRADIENT_EPS), disc, &opts.newton)?;
        let fd = xp.add_scaled(-1.0, &xm).scaled(0.5 / GRADIENT_EPS);
        let err = fd.add_scaled(-1.0, &y).l2_norm();
        worst = worst.max(err / y.l2_norm().max(1e-12));
    }
    Ok(CheckResult {
        name: "tangent",
        discrepancy: worst,
        tolerance: TANGENT_TOL,
    })
}

/// Second central difference of `j_h` along `v` against the Hessian form.
pub fn hessian_check<P: OcProblem + ?Sized>(p: &P, disc: &Discretization, opts: &VerifyOptions, rng: &mut impl Rng) -> Result<CheckResult> {
    let m = p.control_dim();
    let mut worst: f64 = 0.0;
    for _ in 0..opts.trials {
        let u = random_control(rng, disc.partition(), disc.degree(), m);
        let v = random_control(rng, disc.partition(), disc.degree(), m);
        let (uc, vc) = (ControlFunction::Dg(u.clone()), ControlFunction::Dg(v.clone()));
        let eval = evaluate(p, &uc, disc, &opts.newton)?;
        let y = tangent_solve(p, &uc, &eval.x_h, &vc, disc, &opts.newton)?;
        let h = hessian_form_from(p, &uc, &vc, &eval.x_h, &eval.lambda_h, &y, disc)?;
        let jp = j_h(p, &shifted(&u, &v, HESSIAN_EPS), disc, &opts.newton)?;
        let jm = j_h(p, &shifted(&u, &v, -HESSIAN_EPS), disc, &opts.newton)?;
        let fd = (jp - 2.0 * eval.cost + jm) / (HESSIAN_EPS * HESSIAN_EPS);
        worst = worst.max(relative(fd, h));
    }
    Ok(CheckResult {
        name: "hessian",
        discrepancy: worst,
        tolerance: HESSIAN_TOL,
    })
}

/// Max-norm residual of the discrete adjoint equation at random controls.
pub fn adjoint_check<P: OcProblem + ?Sized>(p: &P, disc: &Discretization, opts: &VerifyOptions, rng: &mut impl Rng) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for _ in 0..opts.trials.min(5) {
        let u = ControlFunction::Dg(random_control(rng, disc.partition(), disc.degree(), p.control_dim()));
        let eval = evaluate(p, &u, disc, &opts.newton)?;
        worst = worst.max(adjoint_residual(p, &u, &eval.x_h, &eval.lambda_h, disc)?);
    }
    Ok(CheckResult {
        name: "adjoint residual",
        discrepancy: worst,
        tolerance: ADJOINT_TOL,
    })
}

/// Backward solve through time reversal against a direct downwind sweep, for
/// random linear systems `λ' = A(t) λ + b(t)` of dimension `dim`.
pub fn reversal_check(disc: &Discretization, dim: usize, trials: usize, rng: &mut impl Rng) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let a0 = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
        let a1 = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
        let b: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let terminal: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = move |t: f64| &a0 + &a1 * t;
        let a_jac = a.clone();
        let rhs = IvpRight::new(
            dim,
            move |t, x: &[f64], out: &mut [f64]| {
                let at = a(t);
                for i in 0..dim {
                    out[i] = b[i] * t.cos() + (0..dim).map(|j| at[(i, j)] * x[j]).sum::<f64>();
                }
            },
            move |t, _x: &[f64], jac: &mut DMatrix<f64>| jac.copy_from(&a_jac(t)),
        );
        let opts = NewtonOptions::default();
        let via_reversal = solve_backward(&rhs, &terminal, disc, &opts)?;
        let direct = solve_backward_downwind(&rhs, &terminal, disc, &opts)?;
        let gap = via_reversal
            .coeffs()
            .iter()
            .zip(direct.coeffs())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        worst = worst.max(gap);
    }
    Ok(CheckResult {
        name: "time reversal",
        discrepancy: worst,
        tolerance: REVERSAL_TOL,
    })
}

/// Runs every check with one seeded generator.
pub fn run_checks<P: OcProblem + ?Sized>(p: &P, opts: &VerifyOptions) -> Result<VerifyReport> {
    let disc = discretization(p, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut checks = vec![
        gradient_check(p, &disc, opts, &mut rng)?,
        tangent_check(p, &disc, opts, &mut rng)?,
    ];
    if p.second_derivatives(0.0, &p.initial_state(), &vec![0.0; p.control_dim()]).is_some() {
        checks.push(hessian_check(p, &disc, opts, &mut rng)?);
    }
    checks.push(adjoint_check(p, &disc, opts, &mut rng)?);
    checks.push(reversal_check(&disc, p.state_dim().max(2), 5, &mut rng)?);
    Ok(VerifyReport { checks })
}

/// Deliberate derivative errors, for checking that the harness notices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corruption {
    /// `∂f/∂u` scaled by 1.5.
    Fu,
    /// `∂f/∂u` and `∂g/∂u` negated, so the reduced gradient points uphill.
    GradientSign,
}

/// A problem with one of its derivatives replaced by a wrong one.
pub struct Corrupted<P> {
    pub inner: P,
    pub kind: Corruption,
}

impl<P: OcProblem> Corrupted<P> {
    pub fn new(inner: P, kind: Corruption) -> Self {
        Self { inner, kind }
    }
}

impl<P: OcProblem> OcProblem for Corrupted<P> {
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
        self.inner.control_bounds()
    }
    fn f(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        self.inner.f(t, x, u, out)
    }
    fn fx(&self, t: f64, x: &[f64], u: &[f64], out: &mut DMatrix<f64>) {
        self.inner.fx(t, x, u, out)
    }
    fn fu(&self, t: f64, x: &[f64], u: &[f64], out: &mut DMatrix<f64>) {
        self.inner.fu(t, x, u, out);
        *out *= match self.kind {
            Corruption::Fu => 1.5,
            Corruption::GradientSign => -1.0,
        };
    }
    fn g(&self, t: f64, x: &[f64], u: &[f64]) -> f64 {
        self.inner.g(t, x, u)
    }
    fn gx(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        self.inner.gx(t, x, u, out)
    }
    fn gu(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        self.inner.gu(t, x, u, out);
        if self.kind == Corruption::GradientSign {
            out.iter_mut().for_each(|v| *v = -*v);
        }
    }
    fn second_derivatives(&self, t: f64, x: &[f64], u: &[f64]) -> Option<SecondDerivatives> {
        self.inner.second_derivatives(t, x, u)
    }
}

impl<P: OcProblem + ?Sized> OcProblem for Box<P> {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn control_dim(&self) -> usize {
        (**self).control_dim()
    }
    fn horizon(&self) -> f64 {
        (**self).horizon()
    }
    fn initial_state(&self) -> Vec<f64> {
        (**self).initial_state()
    }
    fn control_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (**self).control_bounds()
    }
    fn f(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        (**self).f(t, x, u, out)
    }
    fn fx(&self, t: f64, x: &[f64], u: &[f64], out: &mut DMatrix<f64>) {
        (**self).fx(t, x, u, out)
    }
    fn fu(&self, t: f64, x: &[f64], u: &[f64], out: &mut DMatrix<f64>) {
        (**self).fu(t, x, u, out)
    }
    fn g(&self, t: f64, x: &[f64], u: &[f64]) -> f64 {
        (**self).g(t, x, u)
    }
    fn gx(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        (**self).gx(t, x, u, out)
    }
    fn gu(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        (**self).gu(t, x, u, out)
    }
    fn second_derivatives(&self, t: f64, x: &[f64], u: &[f64]) -> Option<SecondDerivatives> {
        (**self).second_derivatives(t, x, u)
    }
    fn stationary_control(&self, t: f64, x: &[f64], lambda: &[f64]) -> Option<Vec<f64>> {
        (**self).stationary_control(t, x, lambda)
    }
    fn smoothness_bound(&self) -> Option<f64> {
        (**self).smoothness_bound()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{LinearLq, NonlinearQuadratic};

    #[test]
    fn builtins_pass_all_checks() {
        let opts = VerifyOptions { trials: 4, ..Default::default() };
        let rep = run_checks(&LinearLq, &opts).unwrap();
        assert!(rep.all_passed(), "{rep:#?}");
        let opts = VerifyOptions { order: 2, trials: 4, ..opts };
        let rep = run_checks(&NonlinearQuadratic, &opts).unwrap();
        assert!(rep.all_passed(), "{rep:#?}");
    }

    #[test]
    fn corrupted_fu_fails_gradient_check() {
        let opts = VerifyOptions { trials: 3, ..Default::default() };
        let rep = run_checks(&Corrupted::new(LinearLq, Corruption::Fu), &opts).unwrap();
        assert!(!rep.get("gradient").unwrap().passed());
        assert!(!rep.all_passed());
    }

    #[test]
    fn same_seed_same_discrepancies() {
        let opts = VerifyOptions { trials: 2, ..Default::default() };
        let a = run_checks(&LinearLq, &opts).unwrap();
        let b = run_checks(&LinearLq, &opts).unwrap();
        assert_eq!(a.checks, b.checks);
    }
}
