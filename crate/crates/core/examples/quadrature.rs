//! Gauss-Legendre rules, the modal basis and L² projection onto a DG space.
//!
//! `cargo run --example quadrature`

use std::sync::Arc;

use dgocp::basis::{gauss_rule, legendre_eval};
use dgocp::mesh::{DGFunction, Partition};

fn main() -> dgocp::Result<()> {
    // a q-point rule integrates x^(2q-1) exactly, x^(2q) only approximately
    for q in 1..=5 {
        let rule = gauss_rule(q)?;
        let even = rule.integrate(|x| x.powi(2 * q as i32));
        let exact = 2.0 / (2 * q + 1) as f64;
        println!("q={q}  points {:?}  error on x^{} = {:.2e}", rule.points(), 2 * q, (even - exact).abs());
    }

    let rule = gauss_rule(6)?;
    let orth = rule.integrate(|x| legendre_eval(2, x).unwrap() * legendre_eval(4, x).unwrap());
    println!("∫ P2 P4 = {orth:.1e}");

    // projecting sin onto piecewise polynomials: the error drops like h^(r+1)
    for r in 0..=3 {
        let mut prev = None;
        for n in [4, 8, 16, 32] {
            let part = Arc::new(Partition::uniform(std::f64::consts::PI, n)?);
            let quad = gauss_rule(r + 2)?;
            let f = DGFunction::project_l2(|t| vec![t.sin()], part, r, &quad);
            let err = f.l2_error(|t| vec![t.sin()], &gauss_rule(8)?);
            let rate = prev.map(|p: f64| format!("{:.2}", (p / err).log2())).unwrap_or_default();
            println!("r={r} N={n:<3} L2 error {err:.4e}  rate {rate}");
            prev = Some(err);
        }
    }
    Ok(())
}
