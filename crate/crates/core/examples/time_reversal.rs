//! Backward problems λ' = F(t, λ), λ(T) = λ_T: the time-reversed forward solve
//! against a direct sweep from the last interval down.
//!
//! `cargo run --example time_reversal`

use dgocp::ivp::{backward_residual, solve_backward, solve_backward_downwind, Discretization, IvpRight, NewtonOptions};
use nalgebra::DMatrix;

fn main() -> dgocp::Result<()> {
    // λ' = λ - cos t, λ(1) = 0 has the solution (cos t - sin t)/2 - e^{t-1}(cos 1 - sin 1)/2
    let exact = |t: f64| 0.5 * (t.cos() - t.sin()) - 0.5 * (t - 1.0).exp() * (1f64.cos() - 1f64.sin());
    let rhs = IvpRight::new(
        1,
        |t, l: &[f64], o: &mut [f64]| o[0] = l[0] - t.cos(),
        |_, _, j: &mut DMatrix<f64>| j[(0, 0)] = 1.0,
    );
    let opts = NewtonOptions::default();
    for r in 0..=3 {
        let disc = Discretization::uniform(1.0, 16, r)?;
        let reversed = solve_backward(&rhs, &[0.0], &disc, &opts)?;
        let direct = solve_backward_downwind(&rhs, &[0.0], &disc, &opts)?;
        let gap = reversed.coeffs().iter().zip(direct.coeffs()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        println!(
            "r={r}  coefficient gap {gap:.1e}  weak-form residual {:.1e}  error {:.3e}",
            backward_residual(&rhs, &reversed, &[0.0], &disc),
            reversed.nodal_l2_error(|t, _| vec![exact(t)])
        );
    }
    Ok(())
}
