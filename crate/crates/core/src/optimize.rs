//! Box-constrained minimization of the discrete reduced cost `j_h`.
//!
//! Controls live in the DG space of degree `r_control` on the state partition.
//! Their degrees of freedom for box projection are the values at the
//! `r_control + 1` Gauss nodes of each interval: clamping those values is an
//! exact projection for piecewise constants and a consistent one for higher
//! degrees.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

use crate::basis::{gauss_rule, legendre_values, QuadratureRule, ReferenceBasis};
use crate::control::ControlFunction;
use crate::error::{Error, Result};
use crate::ivp::{Discretization, NewtonOptions};
use crate::mesh::{DGFunction, Partition};
use crate::problem::{check_problem, OcProblem};
use crate::reduced::{evaluate, gradient_integrand, ReducedEvaluation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Projected gradient descent with Armijo backtracking.
    ProjectedGradient,
    /// Forward-backward sweep: state, adjoint, pointwise control update.
    ForwardBackwardSweep,
}

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    pub method: Method,
    /// Stop when the projected-gradient sup norm drops below this.
    pub grad_tol: f64,
    pub max_outer: usize,
    pub step0: f64,
    pub armijo_c: f64,
    /// Sweep relaxation `θ ∈ (0, 1]`, halved whenever the cost increases.
    pub fbs_relax: f64,
    pub newton: NewtonOptions,
    /// When set, iteration rows `iter,cost,stationarity,step` are written here.
    pub log_path: Option<PathBuf>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            method: Method::ProjectedGradient,
            grad_tol: 1e-10,
            max_outer: 10_000,
            step0: 1.0,
            armijo_c: 1e-4,
            fbs_relax: 1.0,
            newton: NewtonOptions::default(),
            log_path: None,
        }
    }
}

impl OptimizeOptions {
    fn validate(&self) -> Result<()> {
        let ok = self.grad_tol > 0.0
            && self.step0 > 0.0
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0
            && self.fbs_relax > 0.0
            && self.fbs_relax <= 1.0;
        if !ok {
            return Err(Error::InvalidArgument(format!("invalid optimizer options {self:?}")));
        }
        Ok(())
    }
}

/// Outcome of [`minimize`].
#[derive(Debug, Clone)]
pub struct OptimizeReport {
    pub u_star: DGFunction,
    pub x_star: DGFunction,
    pub lambda_star: DGFunction,
    pub cost_history: Vec<f64>,
    pub stationarity_history: Vec<f64>,
    pub step_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Total variation of `u_star`; reported, not constrained.
    pub tv_u: f64,
}

impl OptimizeReport {
    pub fn final_cost(&self) -> f64 {
        *self.cost_history.last().expect("at least one evaluation")
    }

    pub fn final_stationarity(&self) -> f64 {
        *self.stationarity_history.last().expect("at least one evaluation")
    }
}

/// Nodal view of the control space `X_h^{r_control}` (values at Gauss nodes).
struct ControlSpace {
    partition: Arc<Partition>,
    degree: usize,
    dim: usize,
    nodes: QuadratureRule,
    /// `vander[i * nb + k] = P_k(ξ_i)`
    vander: Vec<f64>,
}

impl ControlSpace {
    fn new(partition: Arc<Partition>, degree: usize, dim: usize) -> Self {
        let nodes = gauss_rule(degree + 1).expect("positive node count");
        let nb = degree + 1;
        let mut vander = vec![0.0; nb * nb];
        for (i, &xi) in nodes.points().iter().enumerate() {
            legendre_values(xi, &mut vander[i * nb..(i + 1) * nb]);
        }
        Self {
            partition,
            degree,
            dim,
            nodes,
            vander,
        }
    }

    fn nb(&self) -> usize {
        self.degree + 1
    }

    fn to_nodal(&self, f: &DGFunction) -> Vec<f64> {
        let (nb, m) = (self.nb(), self.dim);
        let mut out = vec![0.0; self.partition.len() * nb * m];
        for n in 0..self.partition.len() {
            let c = f.interval_coeffs(n);
            for i in 0..nb {
                for k in 0..nb {
                    let p = self.vander[i * nb + k];
                    for l in 0..m {
                        out[(n * nb + i) * m + l] += p * c[k * m + l];
                    }
                }
            }
        }
        out
    }

    fn to_modal(&self, v: &[f64]) -> DGFunction {
        let (nb, m) = (self.nb(), self.dim);
        let mut f = DGFunction::zeros(self.partition.clone(), self.degree, m);
        for n in 0..self.partition.len() {
            let c = f.interval_coeffs_mut(n);
            for k in 0..nb {
                let scale = 1.0 / ReferenceBasis::mass(k);
                for i in 0..nb {
                    let s = scale * self.nodes.weights()[i] * self.vander[i * nb + k];
                    for l in 0..m {
                        c[k * m + l] += s * v[(n * nb + i) * m + l];
                    }
                }
            }
        }
        f
    }

    fn clamp(&self, v: &mut [f64], lo: &[f64], hi: &[f64]) {
        for (j, x) in v.iter_mut().enumerate() {
            let l = j % self.dim;
            *x = x.clamp(lo[l], hi[l]);
        }
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let (nb, m) = (self.nb(), self.dim);
        let mut total = 0.0;
        for n in 0..self.partition.len() {
            let half = 0.5 * self.partition.step(n);
            for i in 0..nb {
                let w = half * self.nodes.weights()[i];
                for l in 0..m {
                    let j = (n * nb + i) * m + l;
                    total += w * a[j] * b[j];
                }
            }
        }
        total
    }

    fn node_time(&self, n: usize, i: usize) -> f64 {
        self.partition.to_time(n, self.nodes.points()[i])
    }
}

/// `max |u - Π(u - g)|` over nodal values.
fn projected_gradient_norm(u: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let m = lo.len();
    u.iter()
        .zip(g)
        .enumerate()
        .map(|(j, (ui, gi))| (ui - (ui - gi).clamp(lo[j % m], hi[j % m])).abs())
        .fold(0.0, f64::max)
}

struct IterationLog {
    out: Option<BufWriter<File>>,
}

impl IterationLog {
    fn open(path: &Option<PathBuf>) -> Result<Self> {
        let out = match path {
            Some(p) => {
                let mut w = BufWriter::new(File::create(p)?);
                writeln!(w, "iter,cost,stationarity,step")?;
                Some(w)
            }
            None => None,
        };
        Ok(Self { out })
    }

    fn row(&mut self, iter: usize, cost: f64, stat: f64, step: f64) -> Result<()> {
        if let Some(w) = &mut self.out {
            writeln!(w, "{iter},{cost:.16e},{stat:.6e},{step:.6e}")?;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        if let Some(w) = &mut self.out {
            w.flush()?;
        }
        Ok(())
    }
}

/// Cost values closer than this are indistinguishable in floating point.
fn cost_noise(cost: f64) -> f64 {
    64.0 * f64::EPSILON * cost.abs().max(f64::MIN_POSITIVE)
}

/// Minimizes `j_h` over the box-constrained DG control space of degree
/// `r_control` on the partition of `disc` (whose degree is the state degree).
pub fn minimize<P: OcProblem + ?Sized>(
    p: &P,
    u0: &ControlFunction,
    disc: &Discretization,
    r_control: usize,
    opts: &OptimizeOptions,
) -> Result<OptimizeReport> {
    check_problem(p)?;
    opts.validate()?;
    if r_control > disc.degree() {
        return Err(Error::InvalidArgument(format!(
            "control degree {r_control} exceeds state degree {}",
            disc.degree()
        )));
    }
    let m = p.control_dim();
    if u0.dim() != m {
        return Err(Error::InvalidArgument("initial control has the wrong dimension".into()));
    }
    let (lo, hi) = p.control_bounds();
    let space = ControlSpace::new(disc.partition().clone(), r_control, m);

    let u0_dg = match u0 {
        ControlFunction::Dg(f) if f.degree() == r_control && **f.partition() == **disc.partition() => f.clone(),
        other => {
            let field = other.sample(disc.partition(), disc.basis())?;
            DGFunction::project_field(&field, disc.partition().clone(), r_control, disc.basis())
        }
    };
    let mut u_nodal = space.to_nodal(&u0_dg);
    let infeasible = u_nodal
        .iter()
        .enumerate()
        .any(|(j, v)| *v < lo[j % m] - 1e-12 || *v > hi[j % m] + 1e-12);
    if infeasible {
        return Err(Error::InvalidArgument("initial control violates the box".into()));
    }
    space.clamp(&mut u_nodal, &lo, &hi);

    let newton = &opts.newton;
    let mut current = evaluate(p, &ControlFunction::Dg(space.to_modal(&u_nodal)), disc, newton)?;
    let mut log = IterationLog::open(&opts.log_path)?;
    let mut cost_history = Vec::new();
    let mut stationarity_history = Vec::new();
    let mut step_history = Vec::new();
    let mut step = opts.step0;
    let mut relax = opts.fbs_relax;
    let mut converged = false;
    let mut iterations = 0;

    loop {
        let grad = space.to_nodal(&current.grad.project(disc, r_control));
        let stat = projected_gradient_norm(&u_nodal, &grad, &lo, &hi);
        cost_history.push(current.cost);
        stationarity_history.push(stat);
        log.row(iterations, current.cost, stat, if iterations == 0 { 0.0 } else { *step_history.last().unwrap() })?;
        if stat <= opts.grad_tol {
            converged = true;
            break;
        }
        if iterations == opts.max_outer {
            break;
        }
        iterations += 1;

        let stall = |cost: f64| Error::Stall {
            iteration: iterations,
            cost,
            stationarity: stat,
        };

        let sweep_target = match opts.method {
            Method::ForwardBackwardSweep => sweep_control(p, &space, &current, &lo, &hi),
            Method::ProjectedGradient => None,
        };

        match sweep_target {
            Some(target) => {
                // relaxed sweep: u ← (1-θ)u + θ Π(û)
                loop {
                    let trial: Vec<f64> = u_nodal.iter().zip(&target).map(|(u, t)| (1.0 - relax) * u + relax * t).collect();
                    let next = evaluate(p, &ControlFunction::Dg(space.to_modal(&trial)), disc, newton)?;
                    if next.cost <= current.cost + cost_noise(current.cost) {
                        u_nodal = trial;
                        current = next;
                        step_history.push(relax);
                        break;
                    }
                    relax *= 0.5;
                    if relax < 1.0 / 1024.0 {
                        log.finish()?;
                        return Err(stall(current.cost));
                    }
                }
            }
            None => {
                step = (2.0 * step).min(opts.step0);
                loop {
                    let mut trial: Vec<f64> = u_nodal.iter().zip(&grad).map(|(u, g)| u - step * g).collect();
                    space.clamp(&mut trial, &lo, &hi);
                    let delta: Vec<f64> = trial.iter().zip(&u_nodal).map(|(a, b)| a - b).collect();
                    let predicted = space.inner(&grad, &delta);
                    let next = evaluate(p, &ControlFunction::Dg(space.to_modal(&trial)), disc, newton)?;
                    if next.cost <= current.cost + opts.armijo_c * predicted + cost_noise(current.cost) {
                        u_nodal = trial;
                        current = next;
                        step_history.push(step);
                        break;
                    }
                    step *= 0.5;
                    if step < opts.step0 * 2f64.powi(-30) {
                        log.finish()?;
                        return Err(stall(current.cost));
                    }
                }
            }
        }
    }
    log.finish()?;

    let u_star = space.to_modal(&u_nodal);
    let tv_u = u_star.total_variation();
    Ok(OptimizeReport {
        u_star,
        x_star: current.x_h,
        lambda_star: current.lambda_h,
        cost_history,
        stationarity_history,
        step_history,
        iterations,
        converged,
        tv_u,
    })
}

/// Pointwise minimizer `Π(û)` of the Hamiltonian at every control node, or
/// `None` when it cannot be computed (the caller then takes a gradient step).
fn sweep_control<P: OcProblem + ?Sized>(p: &P, space: &ControlSpace, eval: &ReducedEvaluation, lo: &[f64], hi: &[f64]) -> Option<Vec<f64>> {
    let (d, m, nb) = (p.state_dim(), space.dim, space.nb());
    let u_dg = eval.u.as_dg()?;
    let mut out = vec![0.0; space.partition.len() * nb * m];
    let (mut x, mut lam, mut u) = (vec![0.0; d], vec![0.0; d], vec![0.0; m]);
    for n in 0..space.partition.len() {
        for i in 0..nb {
            let xi = space.nodes.points()[i];
            eval.x_h.eval_local(n, xi, &mut x);
            eval.lambda_h.eval_local(n, xi, &mut lam);
            u_dg.eval_local(n, xi, &mut u);
            let t = space.node_time(n, i);
            let target = match p.stationary_control(t, &x, &lam) {
                Some(v) => v,
                None => newton_stationary(p, t, &x, &lam, &u)?,
            };
            let slot = &mut out[(n * nb + i) * m..(n * nb + i + 1) * m];
            for l in 0..m {
                slot[l] = target[l].clamp(lo[l], hi[l]);
            }
        }
    }
    Some(out)
}

/// Guarded Newton for `∂_u g(t, x, u) - ∂_u f^T λ = 0`.
fn newton_stationary<P: OcProblem + ?Sized>(p: &P, t: f64, x: &[f64], lam: &[f64], u0: &[f64]) -> Option<Vec<f64>> {
    let m = u0.len();
    let mut u = u0.to_vec();
    for _ in 0..50 {
        let r = gradient_integrand(p, t, x, &u, lam);
        if r.iter().all(|v| v.abs() <= 1e-12) {
            return Some(u);
        }
        let s = p.second_derivatives(t, x, &u)?;
        let mut h = s.guu.clone();
        for (i, li) in lam.iter().enumerate() {
            h -= &s.fuu[i] * *li;
        }
        let du = h.lu().solve(&nalgebra::DVector::from_vec(r))?;
        for l in 0..m {
            u[l] -= du[l];
        }
        if u.iter().any(|v| !v.is_finite()) {
            return None;
        }
    }
    None
}

/// Sup over quadrature nodes of `|u - Π(u - ∇j_h(u))|`.
pub fn stationarity<P: OcProblem + ?Sized>(p: &P, u: &ControlFunction, disc: &Discretization, opts: &NewtonOptions) -> Result<f64> {
    let (lo, hi) = p.control_bounds();
    let eval = evaluate(p, u, disc, opts)?;
    let us = u.sample(disc.partition(), disc.basis())?;
    Ok(projected_gradient_norm(us.as_slice(), eval.grad.values().as_slice(), &lo, &hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    /// `x' = 0`, `g = ½(u - c)²`: decoupled quadratic with optimum `u = c`.
    struct Decoupled {
        c: f64,
        lo: f64,
        hi: f64,
    }

    impl OcProblem for Decoupled {
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
            vec![0.0]
        }
        fn control_bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![self.lo], vec![self.hi])
        }
        fn f(&self, _: f64, _: &[f64], _: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
        }
        fn fx(&self, _: f64, _: &[f64], _: &[f64], out: &mut DMatrix<f64>) {
            out[(0, 0)] = 0.0;
        }
        fn fu(&self, _: f64, _: &[f64], _: &[f64], out: &mut DMatrix<f64>) {
            out[(0, 0)] = 0.0;
        }
        fn g(&self, _: f64, _: &[f64], u: &[f64]) -> f64 {
            0.5 * (u[0] - self.c).powi(2)
        }
        fn gx(&self, _: f64, _: &[f64], _: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
        }
        fn gu(&self, _: f64, _: &[f64], u: &[f64], out: &mut [f64]) {
            out[0] = u[0] - self.c;
        }
    }

    fn zero_control() -> ControlFunction {
        ControlFunction::closed(1, |_| vec![0.0])
    }

    #[test]
    fn decoupled_quadratic_solved_in_one_step() {
        let p = Decoupled { c: 0.3, lo: -1.0, hi: 1.0 };
        let disc = Discretization::uniform(1.0, 4, 1).unwrap();
        let rep = minimize(&p, &zero_control(), &disc, 1, &OptimizeOptions::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        for n in 0..4 {
            assert!((rep.u_star.interval_coeffs(n)[0] - 0.3).abs() < 1e-15);
            assert!(rep.u_star.interval_coeffs(n)[1].abs() < 1e-15);
        }
    }

    #[test]
    fn active_bound_is_stationary() {
        // optimum c = 2 lies outside [−1, 1]; the solution sits on the upper bound
        let p = Decoupled { c: 2.0, lo: -1.0, hi: 1.0 };
        let disc = Discretization::uniform(1.0, 3, 0).unwrap();
        let rep = minimize(&p, &zero_control(), &disc, 0, &OptimizeOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.u_star.coeffs().iter().all(|&c| c == 1.0));
        let s = stationarity(&p, &ControlFunction::Dg(rep.u_star.clone()), &disc, &NewtonOptions::default()).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn sweep_uses_newton_fallback_or_gradient_step() {
        // no closed form and no second derivatives: the sweep falls back to PGD
        let p = Decoupled { c: 0.5, lo: -1.0, hi: 1.0 };
        let disc = Discretization::uniform(1.0, 2, 1).unwrap();
        let opts = OptimizeOptions {
            method: Method::ForwardBackwardSweep,
            ..Default::default()
        };
        let rep = minimize(&p, &zero_control(), &disc, 1, &opts).unwrap();
        assert!(rep.converged);
        assert!((rep.u_star.coeffs()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_infeasible_start_and_bad_degree() {
        let p = Decoupled { c: 0.0, lo: -1.0, hi: 1.0 };
        let disc = Discretization::uniform(1.0, 2, 1).unwrap();
        let far = ControlFunction::closed(1, |_| vec![3.0]);
        assert!(minimize(&p, &far, &disc, 1, &OptimizeOptions::default()).is_err());
        assert!(minimize(&p, &zero_control(), &disc, 2, &OptimizeOptions::default()).is_err());
    }

    #[test]
    fn nodal_modal_round_trip() {
        let part = Arc::new(Partition::uniform(1.0, 3).unwrap());
        let space = ControlSpace::new(part.clone(), 2, 1);
        let f = DGFunction::from_coeffs(part, 2, 1, (0..9).map(|i| i as f64 * 0.1 - 0.3).collect()).unwrap();
        let back = space.to_modal(&space.to_nodal(&f));
        for (a, b) in f.coeffs().iter().zip(back.coeffs()) {
            assert!((a - b).abs() < 1e-14);
        }
        let nodal = space.to_nodal(&f);
        assert!((space.inner(&nodal, &nodal) - f.inner(&f)).abs() < 1e-14);
    }

    #[test]
    fn writes_iteration_log() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let p = Decoupled { c: 0.3, lo: -1.0, hi: 1.0 };
        let disc = Discretization::uniform(1.0, 2, 0).unwrap();
        let opts = OptimizeOptions {
            log_path: Some(path.clone()),
            ..Default::default()
        };
        minimize(&p, &zero_control(), &disc, 0, &opts).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("iter,cost,stationarity,step"));
        assert_eq!(lines.count(), 2);
    }
}
