//! Optimal control problem definition.
//!
//! Minimize `J(u, x) = ∫_0^T g(t, x, u) dt` subject to `x' = f(t, x, u)`,
//! `x(0) = x0` and the box `u_lo <= u(t) <= u_hi`.

use nalgebra::DMatrix;

/// Second partial derivatives of `f` and `g` at one point.
///
/// `fxx[i]` is the `d × d` Hessian of component `f_i` in `x`; likewise
/// `fxu[i]` (`d × m`) and `fuu[i]` (`m × m`).
#[derive(Debug, Clone)]
pub struct SecondDerivatives {
    pub fxx: Vec<DMatrix<f64>>,
    pub fxu: Vec<DMatrix<f64>>,
    pub fuu: Vec<DMatrix<f64>>,
    pub gxx: DMatrix<f64>,
    pub gxu: DMatrix<f64>,
    pub guu: DMatrix<f64>,
}

impl SecondDerivatives {
    pub fn zeros(d: usize, m: usize) -> Self {
        Self {
            fxx: vec![DMatrix::zeros(d, d); d],
            fxu: vec![DMatrix::zeros(d, m); d],
            fuu: vec![DMatrix::zeros(m, m); d],
            gxx: DMatrix::zeros(d, d),
            gxu: DMatrix::zeros(d, m),
            guu: DMatrix::zeros(m, m),
        }
    }
}

/// An optimal control problem with its first (and optionally second)
/// derivatives.
///
/// Implementations must be reentrant: the library may evaluate one problem
/// from several threads at once.
pub trait OcProblem: Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn horizon(&self) -> f64;
    fn initial_state(&self) -> Vec<f64>;

    /// Component-wise control bounds; `±∞` when unconstrained.
    fn control_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.control_dim();
        (vec![f64::NEG_INFINITY; m], vec![f64::INFINITY; m])
    }

    fn f(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]);
    /// `∂f/∂x`, `d × d`.
    fn fx(&self, t: f64, x: &[f64], u: &[f64], out: &mut DMatrix<f64>);
    /// `∂f/∂u`, `d × m`.
    fn fu(&self, t: f64, x: &[f64], u: &[f64], out: &mut DMatrix<f64>);

    fn g(&self, t: f64, x: &[f64], u: &[f64]) -> f64;
    fn gx(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]);
    fn gu(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]);

    /// Needed only by the Hessian form and the Newton fallback of the sweep.
    fn second_derivatives(&self, _t: f64, _x: &[f64], _u: &[f64]) -> Option<SecondDerivatives> {
        None
    }

    /// Closed-form solution `u` of `∂_u g(t, x, u) = ∂_u f(t, x, u)^T λ`, if one
    /// is available.
    fn stationary_control(&self, _t: f64, _x: &[f64], _lambda: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Bound `M` on the `W^{3,∞}` norms of `f` and `g`, if known.
    fn smoothness_bound(&self) -> Option<f64> {
        None
    }
}

/// Compares the supplied first and second derivatives of a problem against
/// central differences at the given probe points. Returns the largest relative
/// mismatch.
pub fn derivative_mismatch<P: OcProblem + ?Sized>(p: &P, probes: &[(f64, Vec<f64>, Vec<f64>)]) -> f64 {
    let d = p.state_dim();
    let m = p.control_dim();
    let mut worst: f64 = 0.0;
    let rel = |fd: f64, exact: f64| (fd - exact).abs() / (1.0 + exact.abs());
    let mut fx = DMatrix::zeros(d, d);
    let mut fu = DMatrix::zeros(d, m);
    let mut gx = vec![0.0; d];
    let mut gu = vec![0.0; m];
    let (mut fp, mut fm) = (vec![0.0; d], vec![0.0; d]);
    for (t, x, u) in probes {
        p.fx(*t, x, u, &mut fx);
        p.fu(*t, x, u, &mut fu);
        p.gx(*t, x, u, &mut gx);
        p.gu(*t, x, u, &mut gu);
        let second = p.second_derivatives(*t, x, u);
        for j in 0..d + m {
            let (mut xp, mut xm, mut up, mut um) = (x.clone(), x.clone(), u.clone(), u.clone());
            let eps;
            if j < d {
                eps = 1e-6 * (1.0 + x[j].abs());
                xp[j] += eps;
                xm[j] -= eps;
            } else {
                eps = 1e-6 * (1.0 + u[j - d].abs());
                up[j - d] += eps;
                um[j - d] -= eps;
            }
            p.f(*t, &xp, &up, &mut fp);
            p.f(*t, &xm, &um, &mut fm);
            for i in 0..d {
                let fd = (fp[i] - fm[i]) / (2.0 * eps);
                let exact = if j < d { fx[(i, j)] } else { fu[(i, j - d)] };
                worst = worst.max(rel(fd, exact));
            }
            let gd = (p.g(*t, &xp, &up) - p.g(*t, &xm, &um)) / (2.0 * eps);
            let exact = if j < d { gx[j] } else { gu[j - d] };
            worst = worst.max(rel(gd, exact));

            if let Some(s) = &second {
                let (mut fxp, mut fxm) = (DMatrix::zeros(d, d), DMatrix::zeros(d, d));
                let (mut fup, mut fum) = (DMatrix::zeros(d, m), DMatrix::zeros(d, m));
                let (mut gxp, mut gxm) = (vec![0.0; d], vec![0.0; d]);
                let (mut gup, mut gum) = (vec![0.0; m], vec![0.0; m]);
                p.fx(*t, &xp, &up, &mut fxp);
                p.fx(*t, &xm, &um, &mut fxm);
                p.fu(*t, &xp, &up, &mut fup);
                p.fu(*t, &xm, &um, &mut fum);
                p.gx(*t, &xp, &up, &mut gxp);
                p.gx(*t, &xm, &um, &mut gxm);
                p.gu(*t, &xp, &up, &mut gup);
                p.gu(*t, &xm, &um, &mut gum);
                for i in 0..d {
                    for l in 0..d {
                        let fd = (fxp[(i, l)] - fxm[(i, l)]) / (2.0 * eps);
                        let exact = if j < d { s.fxx[i][(l, j)] } else { s.fxu[i][(l, j - d)] };
                        worst = worst.max(rel(fd, exact));
                    }
                    for l in 0..m {
                        let fd = (fup[(i, l)] - fum[(i, l)]) / (2.0 * eps);
                        let exact = if j < d { s.fxu[i][(j, l)] } else { s.fuu[i][(l, j - d)] };
                        worst = worst.max(rel(fd, exact));
                    }
                }
                for l in 0..d {
                    let fd = (gxp[l] - gxm[l]) / (2.0 * eps);
                    let exact = if j < d { s.gxx[(l, j)] } else { s.gxu[(l, j - d)] };
                    worst = worst.max(rel(fd, exact));
                }
                for l in 0..m {
                    let fd = (gup[l] - gum[l]) / (2.0 * eps);
                    let exact = if j < d { s.gxu[(j, l)] } else { s.guu[(l, j - d)] };
                    worst = worst.max(rel(fd, exact));
                }
            }
        }
    }
    worst
}

/// Validates dimensions and the box of a problem.
pub(crate) fn check_problem<P: OcProblem + ?Sized>(p: &P) -> crate::Result<()> {
    let (lo, hi) = p.control_bounds();
    if lo.len() != p.control_dim() || hi.len() != p.control_dim() {
        return Err(crate::Error::InvalidArgument("control bounds have the wrong length".into()));
    }
    if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
        return Err(crate::Error::InvalidArgument("control bounds must satisfy u_lo <= u_hi".into()));
    }
    if p.initial_state().len() != p.state_dim() {
        return Err(crate::Error::InvalidArgument("initial state has the wrong length".into()));
    }
    if !(p.horizon() > 0.0) {
        return Err(crate::Error::InvalidArgument("horizon must be positive".into()));
    }
    Ok(())
}
