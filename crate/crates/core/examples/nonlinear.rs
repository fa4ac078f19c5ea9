//! Nonlinear problem x' = x² + u, x(0) = 1 on [0, 0.2] with cost ½∫(x² + u²),
//! solved with projected gradient and with the forward-backward sweep.
//!
//! `cargo run --example nonlinear`

use dgocp::builtin::NonlinearQuadratic;
use dgocp::control::ControlFunction;
use dgocp::ivp::Discretization;
use dgocp::mesh::Side;
use dgocp::optimize::{minimize, Method, OptimizeOptions};

fn main() -> dgocp::Result<()> {
    let disc = Discretization::uniform(0.2, 20, 2)?;
    let u0 = ControlFunction::closed(1, |_| vec![0.0]);
    let mut solutions = Vec::new();
    for method in [Method::ProjectedGradient, Method::ForwardBackwardSweep] {
        let opts = OptimizeOptions {
            method,
            grad_tol: 1e-12,
            ..OptimizeOptions::default()
        };
        let rep = minimize(&NonlinearQuadratic, &u0, &disc, 2, &opts)?;
        println!(
            "{method:?}: {} iterations, cost {:.12}, stationarity {:.1e}, x(T) = {:.8}",
            rep.iterations,
            rep.final_cost(),
            rep.final_stationarity(),
            rep.x_star.eval(0.2, Side::Left)?[0]
        );
        solutions.push(rep.u_star);
    }
    let gap = solutions[0].add_scaled(-1.0, &solutions[1]).l2_norm();
    println!("L2 distance between the two controls: {gap:.1e}");
    Ok(())
}
