//! DG time stepping for `x' = F(t, x)`.
//!
//! The scheme marches interval by interval: on `I_n` it finds the degree-`r`
//! polynomial with
//!
//! ```text
//! (x' - F(·, x), φ)_{I_n} + (x_{n-1}^+ - x_{n-1}^-) · φ_{n-1}^+ = 0   for all φ ∈ P^r(I_n)
//! ```
//!
//! where `x_0^- = x_0`. The upwind jump only couples an interval to its
//! predecessor, so the global system is block lower-triangular and each block
//! is a small `(r+1)d` Newton system.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::basis::{default_quad_points, ReferenceBasis};
use crate::error::{Error, Result};
use crate::mesh::{DGFunction, Partition};

/// A partition together with the polynomial degree and quadrature used on it.
#[derive(Debug, Clone)]
pub struct Discretization {
    partition: Arc<Partition>,
    basis: ReferenceBasis,
}

impl Discretization {
    /// Degree `r` with the default `r + 3` Gauss points per interval.
    pub fn new(partition: Arc<Partition>, degree: usize) -> Self {
        Self {
            partition,
            basis: ReferenceBasis::new(degree),
        }
    }

    pub fn with_quad_points(partition: Arc<Partition>, degree: usize, q: usize) -> Result<Self> {
        Ok(Self {
            partition,
            basis: ReferenceBasis::with_quadrature(degree, q)?,
        })
    }

    pub fn uniform(horizon: f64, intervals: usize, degree: usize) -> Result<Self> {
        Ok(Self::new(Arc::new(Partition::uniform(horizon, intervals)?), degree))
    }

    pub fn partition(&self) -> &Arc<Partition> {
        &self.partition
    }

    pub fn basis(&self) -> &ReferenceBasis {
        &self.basis
    }

    pub fn degree(&self) -> usize {
        self.basis.order()
    }

    pub fn n_points(&self) -> usize {
        self.basis.n_points()
    }

    /// Time of quadrature node `q` on interval `n`.
    pub fn time(&self, n: usize, q: usize) -> f64 {
        self.partition.to_time(n, self.basis.quadrature().points()[q])
    }

    /// Same degree and quadrature on the reversed partition.
    pub fn reversed(&self) -> Self {
        Self {
            partition: Arc::new(self.partition.reversed()),
            basis: self.basis.clone(),
        }
    }

    pub fn is_default_quadrature(&self) -> bool {
        self.n_points() == default_quad_points(self.degree())
    }
}

/// Location of a quadrature node: time, interval index and node index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub t: f64,
    pub interval: usize,
    pub node: usize,
}

/// Right-hand side of `x' = F(t, x)` as seen by the DG solver.
///
/// The solver only ever evaluates `F` at quadrature nodes, and passes their
/// indices so that right-hand sides built from sampled data (adjoint and
/// tangent equations) can look values up instead of re-evaluating.
pub trait DgRhs {
    fn dim(&self) -> usize;

    fn eval(&self, p: &QuadPoint, x: &[f64], out: &mut [f64]);

    /// `∂F/∂x`, a `dim × dim` matrix.
    fn jacobian(&self, p: &QuadPoint, x: &[f64], jac: &mut DMatrix<f64>);

    /// Global Lipschitz constant `L` of `F` in `x`, when known.
    fn lipschitz_bound(&self) -> Option<f64> {
        None
    }
}

/// Closure-backed right-hand side.
pub struct IvpRight<F, J> {
    dim: usize,
    f: F,
    jac: J,
    lipschitz: Option<f64>,
}

impl<F, J> IvpRight<F, J>
where
    F: Fn(f64, &[f64], &mut [f64]),
    J: Fn(f64, &[f64], &mut DMatrix<f64>),
{
    pub fn new(dim: usize, f: F, jac: J) -> Self {
        Self {
            dim,
            f,
            jac,
            lipschitz: None,
        }
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    /// Largest relative mismatch between the supplied Jacobian and central
    /// differences of `F` at the given probes.
    pub fn jacobian_mismatch(&self, probes: &[(f64, Vec<f64>)]) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        let mut jac = DMatrix::zeros(d, d);
        let (mut fp, mut fm) = (vec![0.0; d], vec![0.0; d]);
        for (t, x) in probes {
            (self.jac)(*t, x, &mut jac);
            for j in 0..d {
                let eps = 1e-6 * (1.0 + x[j].abs());
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += eps;
                xm[j] -= eps;
                (self.f)(*t, &xp, &mut fp);
                (self.f)(*t, &xm, &mut fm);
                for i in 0..d {
                    let fd = (fp[i] - fm[i]) / (2.0 * eps);
                    let rel = (fd - jac[(i, j)]).abs() / (1.0 + jac[(i, j)].abs());
                    worst = worst.max(rel);
                }
            }
        }
        worst
    }
}

impl<F, J> DgRhs for IvpRight<F, J>
where
    F: Fn(f64, &[f64], &mut [f64]),
    J: Fn(f64, &[f64], &mut DMatrix<f64>),
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, p: &QuadPoint, x: &[f64], out: &mut [f64]) {
        (self.f)(p.t, x, out)
    }

    fn jacobian(&self, p: &QuadPoint, x: &[f64], jac: &mut DMatrix<f64>) {
        (self.jac)(p.t, x, jac)
    }

    fn lipschitz_bound(&self) -> Option<f64> {
        self.lipschitz
    }
}

/// `G(s, W) = -F(T - s, W)`: the time-reversed system on the reversed
/// partition. Quadrature node `q` of reversed interval `n` is node `Q-1-q` of
/// original interval `N-1-n` (Gauss nodes are mirror-symmetric).
pub struct Reversed<'a, R: ?Sized> {
    inner: &'a R,
    horizon: f64,
    n_intervals: usize,
    n_points: usize,
}

impl<'a, R: DgRhs + ?Sized> Reversed<'a, R> {
    pub fn new(inner: &'a R, disc: &Discretization) -> Self {
        Self {
            inner,
            horizon: disc.partition().horizon(),
            n_intervals: disc.partition().len(),
            n_points: disc.n_points(),
        }
    }

    #[inline]
    fn map(&self, p: &QuadPoint) -> QuadPoint {
        QuadPoint {
            t: self.horizon - p.t,
            interval: self.n_intervals - 1 - p.interval,
            node: self.n_points - 1 - p.node,
        }
    }
}

impl<R: DgRhs + ?Sized> DgRhs for Reversed<'_, R> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, p: &QuadPoint, x: &[f64], out: &mut [f64]) {
        self.inner.eval(&self.map(p), x, out);
        out.iter_mut().for_each(|v| *v = -*v);
    }

    fn jacobian(&self, p: &QuadPoint, x: &[f64], jac: &mut DMatrix<f64>) {
        self.inner.jacobian(&self.map(p), x, jac);
        jac.neg_mut();
    }

    fn lipschitz_bound(&self) -> Option<f64> {
        self.inner.lipschitz_bound()
    }
}

/// Settings for the per-interval Newton iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Max-norm residual tolerance, relative to `max(1, |incoming trace|)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial step factor; halved while the residual grows.
    pub damping: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 50,
            damping: 1.0,
        }
    }
}

const DAMPING_FLOOR: f64 = 1.0 / 1024.0;

impl NewtonOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 || !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument(format!("invalid Newton options {self:?}")));
        }
        Ok(())
    }
}

/// Scratch buffers for one interval solve.
struct IntervalWork {
    x_q: Vec<f64>,
    f_q: Vec<f64>,
    jac_q: DMatrix<f64>,
    residual: DVector<f64>,
    matrix: DMatrix<f64>,
}

impl IntervalWork {
    fn new(nb: usize, d: usize) -> Self {
        Self {
            x_q: vec![0.0; d],
            f_q: vec![0.0; d],
            jac_q: DMatrix::zeros(d, d),
            residual: DVector::zeros(nb * d),
            matrix: DMatrix::zeros(nb * d, nb * d),
        }
    }
}

/// Residual (and optionally Jacobian) of the interval system for coefficients
/// `c` (layout `k * d + i`).
#[allow(clippy::too_many_arguments)]
fn assemble<R: DgRhs + ?Sized>(
    rhs: &R,
    disc: &Discretization,
    n: usize,
    c: &[f64],
    incoming: &[f64],
    work: &mut IntervalWork,
    with_jacobian: bool,
) {
    let basis = disc.basis();
    let nb = basis.n_basis();
    let d = rhs.dim();
    let half = 0.5 * disc.partition().step(n);
    let weights = basis.quadrature().weights();

    work.residual.fill(0.0);
    if with_jacobian {
        work.matrix.fill(0.0);
    }

    // (x', P_j) + (x^+ - x^-) P_j(-1)
    let mut right_trace = vec![0.0; d];
    for k in 0..nb {
        let s = ReferenceBasis::left_value(k);
        for i in 0..d {
            right_trace[i] += s * c[k * d + i];
        }
    }
    for j in 0..nb {
        let pj = ReferenceBasis::left_value(j);
        for i in 0..d {
            let mut r = pj * (right_trace[i] - incoming[i]);
            for k in 0..nb {
                r += basis.stiffness(j, k) * c[k * d + i];
            }
            work.residual[j * d + i] = r;
        }
        if with_jacobian {
            for k in 0..nb {
                let v = basis.stiffness(j, k) + pj * ReferenceBasis::left_value(k);
                for i in 0..d {
                    work.matrix[(j * d + i, k * d + i)] += v;
                }
            }
        }
    }

    // - (F(t, x), P_j)
    for q in 0..disc.n_points() {
        work.x_q.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..nb {
            let pk = basis.value(q, k);
            for i in 0..d {
                work.x_q[i] += c[k * d + i] * pk;
            }
        }
        let p = QuadPoint {
            t: disc.time(n, q),
            interval: n,
            node: q,
        };
        rhs.eval(&p, &work.x_q, &mut work.f_q);
        let wq = half * weights[q];
        for j in 0..nb {
            let s = wq * basis.value(q, j);
            for i in 0..d {
                work.residual[j * d + i] -= s * work.f_q[i];
            }
        }
        if with_jacobian {
            rhs.jacobian(&p, &work.x_q, &mut work.jac_q);
            for j in 0..nb {
                let sj = wq * basis.value(q, j);
                for k in 0..nb {
                    let s = sj * basis.value(q, k);
                    for i in 0..d {
                        for l in 0..d {
                            work.matrix[(j * d + i, k * d + l)] -= s * work.jac_q[(i, l)];
                        }
                    }
                }
            }
        }
    }
}

fn max_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Damped Newton on one interval system; `c` holds the initial guess and
/// receives the solution.
fn newton_interval<A>(
    n: usize,
    c: &mut Vec<f64>,
    trial: &mut Vec<f64>,
    tol: f64,
    opts: &NewtonOptions,
    work: &mut IntervalWork,
    mut assemble: A,
) -> Result<()>
where
    A: FnMut(&[f64], &mut IntervalWork, bool),
{
    assemble(c, work, true);
    let mut res = max_norm(&work.residual);
    let mut iter = 0;
    while res > tol {
        if iter == opts.max_iter {
            return Err(Error::SolverFailure {
                interval: n,
                iterations: iter,
                residual: res,
            });
        }
        iter += 1;
        let step = work.matrix.clone().lu().solve(&work.residual).ok_or(Error::SolverFailure {
            interval: n,
            iterations: iter,
            residual: res,
        })?;
        let mut alpha = opts.damping;
        loop {
            for (t, (ci, si)) in trial.iter_mut().zip(c.iter().zip(step.iter())) {
                *t = ci - alpha * si;
            }
            assemble(trial, work, false);
            let new_res = max_norm(&work.residual);
            if new_res <= res || alpha <= DAMPING_FLOOR {
                res = new_res;
                break;
            }
            alpha *= 0.5;
        }
        std::mem::swap(c, trial);
        if res > tol {
            assemble(c, work, true);
        }
    }
    Ok(())
}

/// Forward DG solve of `x' = F(t, x)`, `x(0) = x0`.
pub fn solve_forward<R: DgRhs + ?Sized>(rhs: &R, x0: &[f64], disc: &Discretization, opts: &NewtonOptions) -> Result<DGFunction> {
    opts.validate()?;
    let d = rhs.dim();
    if x0.len() != d {
        return Err(Error::InvalidArgument(format!(
            "initial value has {} components, system has {d}",
            x0.len()
        )));
    }
    let partition = disc.partition();
    if let Some(l) = rhs.lipschitz_bound() {
        let hl = partition.max_step() * l;
        if hl >= 1.0 {
            log::warn!("h * L = {hl:.3} >= 1; unique solvability of the DG system is not guaranteed");
        }
    }
    let nb = disc.basis().n_basis();
    let mut out = DGFunction::zeros(partition.clone(), disc.degree(), d);
    let mut work = IntervalWork::new(nb, d);
    let mut incoming = x0.to_vec();
    let mut c = vec![0.0; nb * d];
    let mut trial = vec![0.0; nb * d];

    for n in 0..partition.len() {
        // constant extension of the incoming trace
        c.iter_mut().for_each(|v| *v = 0.0);
        c[..d].copy_from_slice(&incoming);
        let scale = incoming.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let tol = opts.tol * scale;

        newton_interval(n, &mut c, &mut trial, tol, opts, &mut work, |c, work, jac| {
            assemble(rhs, disc, n, c, &incoming, work, jac)
        })?;
        out.interval_coeffs_mut(n).copy_from_slice(&c);
        incoming = out.left_trace(n + 1);
    }
    Ok(out)
}

/// Backward DG solve of `λ' = F(t, λ)`, `λ(T) = xT`.
///
/// Solves the reversed system `W' = -F(T - s, W)`, `W(0) = xT`, forward on the
/// reversed partition and maps back with `λ(t) = W(T - t)`. The result
/// satisfies the downwind DG form `B(φ, λ) + (φ, F(·, λ)) = (φ_N^-, xT)` for
/// all `φ ∈ X_h^r`.
pub fn solve_backward<R: DgRhs + ?Sized>(rhs: &R, x_terminal: &[f64], disc: &Discretization, opts: &NewtonOptions) -> Result<DGFunction> {
    let rev_disc = disc.reversed();
    let reversed = Reversed::new(rhs, disc);
    let w = solve_forward(&reversed, x_terminal, &rev_disc, opts).map_err(|e| match e {
        Error::SolverFailure {
            interval,
            iterations,
            residual,
        } => Error::SolverFailure {
            interval: disc.partition().len() - 1 - interval,
            iterations,
            residual,
        },
        other => other,
    })?;
    let mut lambda = w.reversed();
    // reuse the caller's partition so that downstream operations see one space
    lambda = DGFunction::from_coeffs(disc.partition().clone(), lambda.degree(), lambda.dim(), lambda.coeffs().to_vec())?;
    Ok(lambda)
}

/// Backward DG solve of `λ' = F(t, λ)`, `λ(T) = xT`, by a direct downwind
/// sweep from the last interval to the first.
///
/// Mathematically identical to [`solve_backward`] but shares none of its time
/// reversal machinery, so comparing the two checks the reversal.
pub fn solve_backward_downwind<R: DgRhs + ?Sized>(
    rhs: &R,
    x_terminal: &[f64],
    disc: &Discretization,
    opts: &NewtonOptions,
) -> Result<DGFunction> {
    opts.validate()?;
    let d = rhs.dim();
    if x_terminal.len() != d {
        return Err(Error::InvalidArgument(format!(
            "terminal value has {} components, system has {d}",
            x_terminal.len()
        )));
    }
    let partition = disc.partition();
    let nb = disc.basis().n_basis();
    let mut out = DGFunction::zeros(partition.clone(), disc.degree(), d);
    let mut work = IntervalWork::new(nb, d);
    let mut incoming = x_terminal.to_vec();
    let mut c = vec![0.0; nb * d];
    let mut trial = vec![0.0; nb * d];
    for n in (0..partition.len()).rev() {
        c.iter_mut().for_each(|v| *v = 0.0);
        c[..d].copy_from_slice(&incoming);
        let scale = incoming.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        newton_interval(n, &mut c, &mut trial, opts.tol * scale, opts, &mut work, |c, work, jac| {
            assemble_downwind(rhs, disc, n, c, &incoming, work, jac)
        })?;
        out.interval_coeffs_mut(n).copy_from_slice(&c);
        incoming = out.right_trace(n);
    }
    Ok(out)
}

/// Interval system of the downwind form tested with `P_j`:
/// `(λ^-_{n+1} - incoming) P_j(1) - (λ', P_j) + (F(λ), P_j)`.
fn assemble_downwind<R: DgRhs + ?Sized>(
    rhs: &R,
    disc: &Discretization,
    n: usize,
    c: &[f64],
    incoming: &[f64],
    work: &mut IntervalWork,
    with_jacobian: bool,
) {
    let basis = disc.basis();
    let nb = basis.n_basis();
    let d = rhs.dim();
    let half = 0.5 * disc.partition().step(n);
    let weights = basis.quadrature().weights();
    work.residual.fill(0.0);
    if with_jacobian {
        work.matrix.fill(0.0);
    }
    // -(λ', P_j) + (λ(1) - incoming) P_j(1), with P_j(1) = 1
    let mut end = vec![0.0; d];
    for k in 0..nb {
        for i in 0..d {
            end[i] += c[k * d + i];
        }
    }
    for j in 0..nb {
        for i in 0..d {
            let mut r = end[i] - incoming[i];
            for k in 0..nb {
                r -= basis.stiffness(j, k) * c[k * d + i];
            }
            work.residual[j * d + i] = r;
        }
        if with_jacobian {
            for k in 0..nb {
                let v = 1.0 - basis.stiffness(j, k);
                for i in 0..d {
                    work.matrix[(j * d + i, k * d + i)] += v;
                }
            }
        }
    }
    // + (F(t, λ), P_j)
    for q in 0..disc.n_points() {
        work.x_q.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..nb {
            let pk = basis.value(q, k);
            for i in 0..d {
                work.x_q[i] += c[k * d + i] * pk;
            }
        }
        let p = QuadPoint {
            t: disc.time(n, q),
            interval: n,
            node: q,
        };
        rhs.eval(&p, &work.x_q, &mut work.f_q);
        let wq = half * weights[q];
        for j in 0..nb {
            let s = wq * basis.value(q, j);
            for i in 0..d {
                work.residual[j * d + i] += s * work.f_q[i];
            }
        }
        if with_jacobian {
            rhs.jacobian(&p, &work.x_q, &mut work.jac_q);
            for j in 0..nb {
                let sj = wq * basis.value(q, j);
                for k in 0..nb {
                    let s = sj * basis.value(q, k);
                    for i in 0..d {
                        for l in 0..d {
                            work.matrix[(j * d + i, k * d + l)] += s * work.jac_q[(i, l)];
                        }
                    }
                }
            }
        }
    }
}

/// Max-norm residual of the downwind DG form of `λ' = F(t, λ)`, `λ(T) = xT`:
/// `B(φ, λ) + (φ, F(·, λ)) - (φ_N^-, xT)` over the full basis of `X_h^r`.
///
/// `B(φ, λ)` is assembled in its integrated-by-parts form, so this check is
/// independent of how `λ` was computed.
pub fn backward_residual<R: DgRhs + ?Sized>(rhs: &R, lambda: &DGFunction, x_terminal: &[f64], disc: &Discretization) -> f64 {
    let basis = disc.basis();
    let nb = basis.n_basis();
    let d = lambda.dim();
    let partition = disc.partition();
    let n_int = partition.len();
    let mut lam_q = vec![0.0; d];
    let mut f_q = vec![0.0; d];
    let mut worst: f64 = 0.0;
    for n in 0..n_int {
        let c = lambda.interval_coeffs(n);
        let half = 0.5 * partition.step(n);
        let own_left = lambda.right_trace(n);
        let next_left = if n + 1 < n_int {
            lambda.right_trace(n + 1)
        } else {
            x_terminal.to_vec()
        };
        let mut res = vec![0.0; nb * d];
        for j in 0..nb {
            let pj_left = ReferenceBasis::left_value(j);
            for i in 0..d {
                // (φ', λ) = Σ_k S[k][j] c_k
                let mut r = 0.0;
                for k in 0..nb {
                    r += basis.stiffness(k, j) * c[k * d + i];
                }
                // [φ]_{n} λ^+_{n} at the left node, -φ^-_{n+1} λ^+_{n+1} at the right node
                r += pj_left * own_left[i] - next_left[i];
                res[j * d + i] = r;
            }
        }
        for q in 0..disc.n_points() {
            lam_q.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..nb {
                for i in 0..d {
                    lam_q[i] += c[k * d + i] * basis.value(q, k);
                }
            }
            let p = QuadPoint {
                t: disc.time(n, q),
                interval: n,
                node: q,
            };
            rhs.eval(&p, &lam_q, &mut f_q);
            let wq = half * basis.quadrature().weights()[q];
            for j in 0..nb {
                for i in 0..d {
                    res[j * d + i] += wq * basis.value(q, j) * f_q[i];
                }
            }
        }
        worst = res.iter().fold(worst, |m, v| m.max(v.abs()));
    }
    worst
}
