//! Mesh-refinement studies for the built-in problems.

use std::fmt::Write as _;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::builtin::{BuiltinProblem, ReferenceProtocol};
use crate::control::ControlFunction;
use crate::error::{Error, Result};
use crate::ivp::Discretization;
use crate::mesh::{DGFunction, Partition, Side};
use crate::optimize::{minimize, OptimizeOptions, OptimizeReport};

/// Errors at or below this are treated as exact and get no rate.
pub const RATE_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct ConvergenceOptions {
    pub orders: Vec<usize>,
    /// `h = h0 · 2^{-k}` for `k = 0..levels`.
    pub levels: usize,
    pub h0: f64,
    pub optimizer: OptimizeOptions,
    /// Quadrature points per interval; `None` uses the default for each degree.
    pub quad_points: Option<usize>,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self {
            orders: vec![1, 2, 3],
            levels: 6,
            h0: 0.1,
            optimizer: OptimizeOptions {
                grad_tol: 1e-15,
                ..OptimizeOptions::default()
            },
            quad_points: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub r: usize,
    pub h: f64,
    pub err_x: f64,
    pub err_u: f64,
    pub rate_x: Option<f64>,
    pub rate_u: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
}

/// A study that stopped early; `partial` holds every row computed before the
/// first failing `(r, k)` in row order.
#[derive(Debug)]
pub struct ConvergenceFailure {
    pub partial: ConvergenceReport,
    pub error: Error,
}

/// `log₂(coarse / fine)`, or `None` when either error is at round-off level.
pub fn rate(coarse: f64, fine: f64) -> Option<f64> {
    (coarse > RATE_FLOOR && fine > RATE_FLOOR).then(|| (coarse / fine).log2())
}

/// Scientific notation with 5 significant digits and a two-digit exponent,
/// e.g. `1.9455e-03`.
pub fn format_sci(x: f64) -> String {
    let s = format!("{x:.4e}");
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

impl ConvergenceReport {
    pub fn block(&self, r: usize) -> impl Iterator<Item = &ConvergenceRow> {
        self.rows.iter().filter(move |row| row.r == r)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,h,err_x,err_u,rate_x,rate_u\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_default();
        for row in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{},{}",
                row.r,
                row.h,
                format_sci(row.err_x),
                format_sci(row.err_u),
                opt(row.rate_x),
                opt(row.rate_u)
            )
            .expect("writing to a String");
        }
        s
    }

    fn fill_rates(&mut self) {
        for i in 1..self.rows.len() {
            let (prev, cur) = (&self.rows[i - 1], &self.rows[i]);
            if prev.r == cur.r {
                let (rx, ru) = (rate(prev.err_x, cur.err_x), rate(prev.err_u, cur.err_u));
                self.rows[i].rate_x = rx;
                self.rows[i].rate_u = ru;
            }
        }
    }
}

fn intervals_for(horizon: f64, h: f64) -> Result<usize> {
    let n = (horizon / h).round();
    if n < 1.0 || ((n * h - horizon).abs() > 1e-9 * horizon) {
        return Err(Error::InvalidArgument(format!("h = {h} does not divide the horizon {horizon}")));
    }
    Ok(n as usize)
}

fn discretization(horizon: f64, h: f64, r: usize, quad_points: Option<usize>) -> Result<Discretization> {
    let part = Arc::new(Partition::uniform(horizon, intervals_for(horizon, h)?)?);
    match quad_points {
        Some(q) => Discretization::with_quad_points(part, r, q),
        None => Ok(Discretization::new(part, r)),
    }
}

/// Solves the discrete problem for one `(h, r)` pair from a zero initial control.
pub fn solve_level(b: &BuiltinProblem, h: f64, r: usize, opts: &ConvergenceOptions) -> Result<OptimizeReport> {
    let p = b.problem.as_ref();
    let disc = discretization(p.horizon(), h, r, opts.quad_points)?;
    let u0 = ControlFunction::closed(p.control_dim(), |_| vec![0.0]);
    let rep = minimize(p, &u0, &disc, r, &opts.optimizer)?;
    if !rep.converged {
        return Err(Error::Stall {
            iteration: rep.iterations,
            cost: rep.final_cost(),
            stationarity: rep.final_stationarity(),
        });
    }
    Ok(rep)
}

enum Reference {
    Exact(fn(f64) -> f64, fn(f64) -> f64),
    Computed(DGFunction, DGFunction),
}

impl Reference {
    fn errors(&self, rep: &OptimizeReport) -> (f64, f64) {
        match self {
            Reference::Exact(x, u) => (
                rep.x_star.nodal_l2_error(|t, _| vec![x(t)]),
                rep.u_star.nodal_l2_error(|t, _| vec![u(t)]),
            ),
            Reference::Computed(x, u) => {
                let at = |f: &DGFunction, t: f64, side: Side| f.eval(t, side).expect("reference covers the horizon");
                (
                    rep.x_star.nodal_l2_error(|t, s| at(x, t, s)),
                    rep.u_star.nodal_l2_error(|t, s| at(u, t, s)),
                )
            }
        }
    }
}

fn reference(b: &BuiltinProblem, opts: &ConvergenceOptions) -> Result<Reference> {
    match b.reference {
        ReferenceProtocol::Exact => match (b.exact_state, b.exact_control) {
            (Some(x), Some(u)) => Ok(Reference::Exact(x, u)),
            _ => Err(Error::InvalidArgument(format!("{} has no closed-form solution", b.name))),
        },
        ReferenceProtocol::SelfRefined { h_ref, r_ref } => {
            let r = r_ref.or_else(|| opts.orders.iter().copied().max()).unwrap_or(1);
            let rep = solve_level(b, h_ref, r, opts)?;
            Ok(Reference::Computed(rep.x_star, rep.u_star))
        }
    }
}

/// Runs the `(r, k)` grid. Levels run concurrently; rows come out ordered by
/// `(r, k)` as given in `opts.orders`.
pub fn run_study(b: &BuiltinProblem, opts: &ConvergenceOptions) -> std::result::Result<ConvergenceReport, ConvergenceFailure> {
    let fail = |error| ConvergenceFailure {
        partial: ConvergenceReport::default(),
        error,
    };
    if opts.orders.is_empty() || opts.levels == 0 || !(opts.h0 > 0.0) {
        return Err(fail(Error::InvalidArgument("empty convergence study".into())));
    }
    let reference = reference(b, opts).map_err(fail)?;

    let grid: Vec<(usize, usize)> = opts
        .orders
        .iter()
        .flat_map(|&r| (0..opts.levels).map(move |k| (r, k)))
        .collect();
    let results: Vec<Result<ConvergenceRow>> = grid
        .par_iter()
        .map(|&(r, k)| {
            let h = opts.h0 * 2f64.powi(-(k as i32));
            let rep = solve_level(b, h, r, opts)?;
            let (err_x, err_u) = reference.errors(&rep);
            Ok(ConvergenceRow {
                r,
                h,
                err_x,
                err_u,
                rate_x: None,
                rate_u: None,
            })
        })
        .collect();

    let mut report = ConvergenceReport::default();
    for res in results {
        match res {
            Ok(row) => report.rows.push(row),
            Err(error) => {
                report.fill_rates();
                return Err(ConvergenceFailure { partial: report, error });
            }
        }
    }
    report.fill_rates();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sci_format() {
        assert_eq!(format_sci(1.9455e-3), "1.9455e-03");
        assert_eq!(format_sci(8.4657e-14), "8.4657e-14");
        assert_eq!(format_sci(12.5), "1.2500e+01");
    }

    #[test]
    fn rate_arithmetic() {
        assert!((rate(4.0e-3, 1.0e-3).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(rate(1e-16, 1e-17), None);
    }

    #[test]
    fn intervals_must_divide_horizon() {
        assert_eq!(intervals_for(0.2, 0.1).unwrap(), 2);
        assert_eq!(intervals_for(1.0, 0.1 / 32.0).unwrap(), 320);
        assert!(intervals_for(1.0, 0.3).is_err());
    }

    #[test]
    fn polynomial_problem_is_reproduced() {
        let b = BuiltinProblem::by_name("polynomial-check").unwrap();
        let opts = ConvergenceOptions {
            orders: vec![2],
            levels: 2,
            ..Default::default()
        };
        let rep = run_study(&b, &opts).unwrap();
        assert_eq!(rep.rows.len(), 2);
        for row in &rep.rows {
            assert!(row.err_x < 1e-12 && row.err_u < 1e-12, "{row:?}");
            assert_eq!(row.rate_x, None);
        }
    }
}
