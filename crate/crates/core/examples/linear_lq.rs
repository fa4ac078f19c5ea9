//! Linear-quadratic problem with a closed-form optimum: x' = x + u, x(0) = 1,
//! cost ½∫(x² + u²). Solves once and compares with the exact state and control.
//!
//! `cargo run --example linear_lq -- 2 20`   (degree, intervals)

use dgocp::builtin::LinearLq;
use dgocp::control::ControlFunction;
use dgocp::ivp::Discretization;
use dgocp::optimize::{minimize, OptimizeOptions};

fn main() -> dgocp::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>());
    let r = args.next().transpose().ok().flatten().unwrap_or(2);
    let n = args.next().transpose().ok().flatten().unwrap_or(20);

    let disc = Discretization::uniform(1.0, n, r)?;
    let u0 = ControlFunction::closed(1, |_| vec![0.0]);
    let rep = minimize(&LinearLq, &u0, &disc, r, &OptimizeOptions::default())?;

    println!("r={r} N={n}: {} iterations, converged {}", rep.iterations, rep.converged);
    println!("cost        {:.12}", rep.final_cost());
    println!("err_x       {:.4e}", rep.x_star.nodal_l2_error(|t, _| vec![LinearLq::exact_state(t)]));
    println!("err_u       {:.4e}", rep.u_star.nodal_l2_error(|t, _| vec![LinearLq::exact_control(t)]));
    println!("err_lambda  {:.4e}", rep.lambda_star.nodal_l2_error(|t, _| vec![LinearLq::exact_adjoint(t)]));
    Ok(())
}
