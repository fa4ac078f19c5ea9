//! Finite-difference checks of the adjoint gradient, the tangent solve and the
//! Hessian form, plus a deliberately wrong derivative that the checks catch.
//!
//! `cargo run --example gradient_check`

use dgocp::builtin::{LinearLq, NonlinearQuadratic};
use dgocp::verify::{run_checks, Corrupted, Corruption, VerifyOptions};

fn main() -> dgocp::Result<()> {
    let opts = VerifyOptions {
        order: 2,
        ..VerifyOptions::default()
    };
    println!("linear-lq");
    for c in run_checks(&LinearLq, &opts)?.checks {
        println!("  {c}");
    }
    println!("nonlinear-quadratic");
    for c in run_checks(&NonlinearQuadratic, &opts)?.checks {
        println!("  {c}");
    }
    println!("nonlinear-quadratic with f_u scaled by 1.5");
    for c in run_checks(&Corrupted::new(NonlinearQuadratic, Corruption::Fu), &opts)?.checks {
        println!("  {c}");
    }
    Ok(())
}
