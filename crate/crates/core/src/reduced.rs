//! Reduced-space primitives: the discrete control-to-state map `G_h`, the
//! discrete adjoint, the reduced gradient, tangent solves and the Hessian
//! quadratic form.
//!
//! Every integral uses the Gauss rule of the [`Discretization`], and the
//! adjoint and tangent equations are solved with the same rule as the state.
//! The derivatives below are therefore the exact derivatives of the
//! quadrature-discretized cost, up to Newton tolerance.

use nalgebra::DMatrix;

use crate::control::ControlFunction;
use crate::error::{Error, Result};
use crate::ivp::{backward_residual, solve_backward, solve_forward, DgRhs, Discretization, NewtonOptions, QuadPoint};
use crate::mesh::{DGFunction, QuadField};
use crate::problem::{check_problem, OcProblem};

struct StateRhs<'a, P: ?Sized> {
    problem: &'a P,
    control: &'a QuadField,
}

impl<P: OcProblem + ?Sized> DgRhs for StateRhs<'_, P> {
    fn dim(&self) -> usize {
        self.problem.state_dim()
    }

    fn eval(&self, p: &QuadPoint, x: &[f64], out: &mut [f64]) {
        self.problem.f(p.t, x, self.control.at(p.interval, p.node), out)
    }

    fn jacobian(&self, p: &QuadPoint, x: &[f64], jac: &mut DMatrix<f64>) {
        self.problem.fx(p.t, x, self.control.at(p.interval, p.node), jac)
    }
}

/// First derivatives of `f` and `g` along a trajectory, at every quadrature node.
struct Linearization {
    n_points: usize,
    fx: Vec<DMatrix<f64>>,
    fu: Vec<DMatrix<f64>>,
    gx: Vec<Vec<f64>>,
    gu: Vec<Vec<f64>>,
}

impl Linearization {
    fn new<P: OcProblem + ?Sized>(p: &P, x: &QuadField, u: &QuadField, disc: &Discretization) -> Self {
        let (d, m) = (p.state_dim(), p.control_dim());
        let nq = disc.n_points();
        let total = disc.partition().len() * nq;
        let mut lin = Self {
            n_points: nq,
            fx: Vec::with_capacity(total),
            fu: Vec::with_capacity(total),
            gx: Vec::with_capacity(total),
            gu: Vec::with_capacity(total),
        };
        for n in 0..disc.partition().len() {
            for q in 0..nq {
                let t = disc.time(n, q);
                let (xq, uq) = (x.at(n, q), u.at(n, q));
                let mut fx = DMatrix::zeros(d, d);
                let mut fu = DMatrix::zeros(d, m);
                let mut gx = vec![0.0; d];
                let mut gu = vec![0.0; m];
                p.fx(t, xq, uq, &mut fx);
                p.fu(t, xq, uq, &mut fu);
                p.gx(t, xq, uq, &mut gx);
                p.gu(t, xq, uq, &mut gu);
                lin.fx.push(fx);
                lin.fu.push(fu);
                lin.gx.push(gx);
                lin.gu.push(gu);
            }
        }
        lin
    }

    #[inline]
    fn idx(&self, p: &QuadPoint) -> usize {
        p.interval * self.n_points + p.node
    }
}

/// `λ' = -f_x^T λ + g_x`
struct AdjointRhs<'a> {
    lin: &'a Linearization,
}

impl DgRhs for AdjointRhs<'_> {
    fn dim(&self) -> usize {
        self.lin.fx[0].nrows()
    }

    fn eval(&self, p: &QuadPoint, lam: &[f64], out: &mut [f64]) {
        let k = self.lin.idx(p);
        let (fx, gx) = (&self.lin.fx[k], &self.lin.gx[k]);
        for (j, o) in out.iter_mut().enumerate() {
            let mut s = gx[j];
            for (i, l) in lam.iter().enumerate() {
                s -= fx[(i, j)] * l;
            }
            *o = s;
        }
    }

    fn jacobian(&self, p: &QuadPoint, _lam: &[f64], jac: &mut DMatrix<f64>) {
        let fx = &self.lin.fx[self.lin.idx(p)];
        jac.copy_from(&(-fx.transpose()));
    }
}

/// `y' = f_x y + f_u v`
struct TangentRhs<'a> {
    lin: &'a Linearization,
    direction: &'a QuadField,
}

impl DgRhs for TangentRhs<'_> {
    fn dim(&self) -> usize {
        self.lin.fx[0].nrows()
    }

    fn eval(&self, p: &QuadPoint, y: &[f64], out: &mut [f64]) {
        let k = self.lin.idx(p);
        let (fx, fu) = (&self.lin.fx[k], &self.lin.fu[k]);
        let v = self.direction.at(p.interval, p.node);
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for (l, yl) in y.iter().enumerate() {
                s += fx[(i, l)] * yl;
            }
            for (l, vl) in v.iter().enumerate() {
                s += fu[(i, l)] * vl;
            }
            *o = s;
        }
    }

    fn jacobian(&self, p: &QuadPoint, _y: &[f64], jac: &mut DMatrix<f64>) {
        jac.copy_from(&self.lin.fx[self.lin.idx(p)]);
    }
}

fn check_control<P: OcProblem + ?Sized>(p: &P, u: &ControlFunction) -> Result<()> {
    if u.dim() != p.control_dim() {
        return Err(Error::InvalidArgument(format!(
            "control has {} components, problem expects {}",
            u.dim(),
            p.control_dim()
        )));
    }
    Ok(())
}

/// `x_h = G_h(u)`: DG solve of `x' = f(t, x, u(t))`, `x(0) = x0`.
pub fn solve_state<P: OcProblem + ?Sized>(p: &P, u: &ControlFunction, disc: &Discretization, opts: &NewtonOptions) -> Result<DGFunction> {
    check_problem(p)?;
    check_control(p, u)?;
    let control = u.sample(disc.partition(), disc.basis())?;
    let rhs = StateRhs { problem: p, control: &control };
    solve_forward(&rhs, &p.initial_state(), disc, opts)
}

/// Discrete adjoint `λ_h`: `B(φ, λ_h) = (φ, f_x^T λ_h - g_x)` for all
/// `φ ∈ X_h^r`, i.e. the backward DG solve of `λ' = -f_x^T λ + g_x`,
/// `λ(T) = 0`.
pub fn solve_adjoint<P: OcProblem + ?Sized>(
    p: &P,
    u: &ControlFunction,
    x_h: &DGFunction,
    disc: &Discretization,
    opts: &NewtonOptions,
) -> Result<DGFunction> {
    check_control(p, u)?;
    let lin = Linearization::new(p, &x_h.sample(disc.basis()), &u.sample(disc.partition(), disc.basis())?, disc);
    solve_backward(&AdjointRhs { lin: &lin }, &vec![0.0; p.state_dim()], disc, opts)
}

/// Max-norm residual of the discrete adjoint equation over a full basis of
/// `X_h^r`, assembled directly from the bilinear form.
pub fn adjoint_residual<P: OcProblem + ?Sized>(
    p: &P,
    u: &ControlFunction,
    x_h: &DGFunction,
    lambda_h: &DGFunction,
    disc: &Discretization,
) -> Result<f64> {
    let lin = Linearization::new(p, &x_h.sample(disc.basis()), &u.sample(disc.partition(), disc.basis())?, disc);
    Ok(backward_residual(&AdjointRhs { lin: &lin }, lambda_h, &vec![0.0; p.state_dim()], disc))
}

/// `j_h(u) = ∫_0^T g(t, x_h, u) dt` by Gauss quadrature.
pub fn cost<P: OcProblem + ?Sized>(p: &P, u: &ControlFunction, x_h: &DGFunction, disc: &Discretization) -> Result<f64> {
    let xs = x_h.sample(disc.basis());
    let us = u.sample(disc.partition(), disc.basis())?;
    Ok(integrate(disc, |n, q, t| p.g(t, xs.at(n, q), us.at(n, q))))
}

fn integrate<F: FnMut(usize, usize, f64) -> f64>(disc: &Discretization, mut f: F) -> f64 {
    let weights = disc.basis().quadrature().weights();
    let mut total = 0.0;
    for n in 0..disc.partition().len() {
        let half = 0.5 * disc.partition().step(n);
        let mut s = 0.0;
        for (q, w) in weights.iter().enumerate() {
            s += w * f(n, q, disc.time(n, q));
        }
        total += half * s;
    }
    total
}

/// The `L²` representative `∂_u g - ∂_u f^T λ_h` of `j_h'(u)`, sampled at the
/// quadrature nodes.
#[derive(Debug, Clone)]
pub struct ReducedGradient {
    values: QuadField,
}

impl ReducedGradient {
    pub fn values(&self) -> &QuadField {
        &self.values
    }

    /// `j_h'(u) v = (∇j_h(u), v)_I`.
    pub fn directional(&self, v: &ControlFunction, disc: &Discretization) -> Result<f64> {
        let vs = v.sample(disc.partition(), disc.basis())?;
        Ok(self.values.inner(&vs, disc.partition(), disc.basis().quadrature()))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.sup_norm()
    }

    /// `L²` projection onto piecewise polynomials of degree `degree`; the
    /// gradient with respect to the `L²` inner product on that control space.
    pub fn project(&self, disc: &Discretization, degree: usize) -> DGFunction {
        DGFunction::project_field(&self.values, disc.partition().clone(), degree, disc.basis())
    }
}

/// Pointwise gradient integrand `∂_u g(t, x, u) - ∂_u f(t, x, u)^T λ`.
pub fn gradient_integrand<P: OcProblem + ?Sized>(p: &P, t: f64, x: &[f64], u: &[f64], lambda: &[f64]) -> Vec<f64> {
    let (d, m) = (p.state_dim(), p.control_dim());
    let mut fu = DMatrix::zeros(d, m);
    let mut gu = vec![0.0; m];
    p.fu(t, x, u, &mut fu);
    p.gu(t, x, u, &mut gu);
    for (l, g) in gu.iter_mut().enumerate() {
        for i in 0..d {
            *g -= fu[(i, l)] * lambda[i];
        }
    }
    gu
}

/// `∇j_h(u)` from a consistent triple `(u, x_h, λ_h)`.
pub fn reduced_gradient<P: OcProblem + ?Sized>(
    p: &P,
    u: &ControlFunction,
    x_h: &DGFunction,
    lambda_h: &DGFunction,
    disc: &Discretization,
) -> Result<ReducedGradient> {
    let xs = x_h.sample(disc.basis());
    let ls = lambda_h.sample(disc.basis());
    let us = u.sample(disc.partition(), disc.basis())?;
    let mut values = QuadField::zeros(disc.partition().len(), disc.n_points(), p.control_dim());
    for n in 0..disc.partition().len() {
        for q in 0..disc.n_points() {
            let g = gradient_integrand(p, disc.time(n, q), xs.at(n, q), us.at(n, q), ls.at(n, q));
            values.at_mut(n, q).copy_from_slice(&g);
        }
    }
    Ok(ReducedGradient { values })
}

/// State, adjoint, cost and gradient at one control.
#[derive(Debug, Clone)]
pub struct ReducedEvaluation {
    pub u: ControlFunction,
    pub x_h: DGFunction,
    pub lambda_h: DGFunction,
    pub cost: f64,
    pub grad: ReducedGradient,
}

pub fn evaluate<P: OcProblem + ?Sized>(p: &P, u: &ControlFunction, disc: &Discretization, opts: &NewtonOptions) -> Result<ReducedEvaluation> {
    let x_h = solve_state(p, u, disc, opts)?;
    let lambda_h = solve_adjoint(p, u, &x_h, disc, opts)?;
    let cost = cost(p, u, &x_h, disc)?;
    let grad = reduced_gradient(p, u, &x_h, &lambda_h, disc)?;
    Ok(ReducedEvaluation {
        u: u.clone(),
        x_h,
        lambda_h,
        cost,
        grad,
    })
}

/// `y_h = G_h'(u) v`: forward DG solve of `y' = f_x y + f_u v`, `y(0) = 0`.
pub fn tangent_solve<P: OcProblem + ?Sized>(
    p: &P,
    u: &ControlFunction,
    x_h: &DGFunction,
    v: &ControlFunction,
    disc: &Discretization,
    opts: &NewtonOptions,
) -> Result<DGFunction> {
    check_control(p, v)?;
    let lin = Linearization::new(p, &x_h.sample(disc.basis()), &u.sample(disc.partition(), disc.basis())?, disc);
    let direction = v.sample(disc.partition(), disc.basis())?;
    let rhs = TangentRhs { lin: &lin, direction: &direction };
    solve_forward(&rhs, &vec![0.0; p.state_dim()], disc, opts)
}

/// `∫ g_x · y_h + g_u · v`, the directional derivative of `j_h` computed from
/// a tangent solve instead of the adjoint.
pub fn tangent_derivative<P: OcProblem + ?Sized>(
    p: &P,
    u: &ControlFunction,
    x_h: &DGFunction,
    y_h: &DGFunction,
    v: &ControlFunction,
    disc: &Discretization,
) -> Result<f64> {
    let xs = x_h.sample(disc.basis());
    let ys = y_h.sample(disc.basis());
    let us = u.sample(disc.partition(), disc.basis())?;
    let vs = v.sample(disc.partition(), disc.basis())?;
    let (d, m) = (p.state_dim(), p.control_dim());
    let mut gx = vec![0.0; d];
    let mut gu = vec![0.0; m];
    Ok(integrate(disc, |n, q, t| {
        p.gx(t, xs.at(n, q), us.at(n, q), &mut gx);
        p.gu(t, xs.at(n, q), us.at(n, q), &mut gu);
        let a: f64 = gx.iter().zip(ys.at(n, q)).map(|(g, y)| g * y).sum();
        let b: f64 = gu.iter().zip(vs.at(n, q)).map(|(g, v)| g * v).sum();
        a + b
    }))
}

/// `j_h''(u)(v, v)` assembled from `x_h`, `λ_h`, `y_h` and the second
/// partials of `f` and `g`:
///
/// ```text
/// -∫ Σ_i λ_i (y^T f_i,xx y + 2 y^T f_i,xu v + v^T f_i,uu v) dt
///  + ∫ (y^T g_xx y + 2 y^T g_xu v + v^T g_uu v) dt
/// ```
pub fn hessian_form<P: OcProblem + ?Sized>(p: &P, u: &ControlFunction, v: &ControlFunction, disc: &Discretization, opts: &NewtonOptions) -> Result<f64> {
    let x_h = solve_state(p, u, disc, opts)?;
    let lambda_h = solve_adjoint(p, u, &x_h, disc, opts)?;
    let y_h = tangent_solve(p, u, &x_h, v, disc, opts)?;
    hessian_form_from(p, u, v, &x_h, &lambda_h, &y_h, disc)
}

/// [`hessian_form`] with state, adjoint and tangent already computed.
pub fn hessian_form_from<P: OcProblem + ?Sized>(
    p: &P,
    u: &ControlFunction,
    v: &ControlFunction,
    x_h: &DGFunction,
    lambda_h: &DGFunction,
    y_h: &DGFunction,
    disc: &Discretization,
) -> Result<f64> {
    let xs = x_h.sample(disc.basis());
    let ls = lambda_h.sample(disc.basis());
    let ys = y_h.sample(disc.basis());
    let us = u.sample(disc.partition(), disc.basis())?;
    let vs = v.sample(disc.partition(), disc.basis())?;
    let mut missing = false;
    let value = integrate(disc, |n, q, t| {
        let Some(s) = p.second_derivatives(t, xs.at(n, q), us.at(n, q)) else {
            missing = true;
            return 0.0;
        };
        let (y, v, lam) = (ys.at(n, q), vs.at(n, q), ls.at(n, q));
        let quad = |a: &DMatrix<f64>, l: &[f64], r: &[f64]| -> f64 {
            let mut s = 0.0;
            for (i, li) in l.iter().enumerate() {
                for (j, rj) in r.iter().enumerate() {
                    s += li * a[(i, j)] * rj;
                }
            }
            s
        };
        let mut total = quad(&s.gxx, y, y) + 2.0 * quad(&s.gxu, y, v) + quad(&s.guu, v, v);
        for (i, li) in lam.iter().enumerate() {
            total -= li * (quad(&s.fxx[i], y, y) + 2.0 * quad(&s.fxu[i], y, v) + quad(&s.fuu[i], v, v));
        }
        total
    });
    if missing {
        return Err(Error::MissingDerivative("second partials of f and g"));
    }
    Ok(value)
}
