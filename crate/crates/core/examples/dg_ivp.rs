//! Forward DG solve of the logistic equation x' = x(1 - x), x(0) = 0.1.
//!
//! `cargo run --example dg_ivp`

use dgocp::ivp::{solve_forward, Discretization, IvpRight, NewtonOptions};
use dgocp::mesh::Side;
use nalgebra::DMatrix;

fn exact(t: f64) -> f64 {
    0.1 / (0.1 + 0.9 * (-t).exp())
}

fn main() -> dgocp::Result<()> {
    let rhs = IvpRight::new(
        1,
        |_, x: &[f64], o: &mut [f64]| o[0] = x[0] * (1.0 - x[0]),
        |_, x: &[f64], j: &mut DMatrix<f64>| j[(0, 0)] = 1.0 - 2.0 * x[0],
    );
    let horizon = 5.0;
    println!("r  N    nodal L2 error   end-point error");
    for r in 0..=3 {
        for n in [10, 20, 40] {
            let disc = Discretization::uniform(horizon, n, r)?;
            let x = solve_forward(&rhs, &[0.1], &disc, &NewtonOptions::default())?;
            let err = x.nodal_l2_error(|t, _| vec![exact(t)]);
            let end = (x.eval(horizon, Side::Left)?[0] - exact(horizon)).abs();
            println!("{r}  {n:<3}  {err:.4e}       {end:.4e}");
        }
    }
    // end-point values superconverge (order 2r+1), while the L² error drops like h^(r+1)
    Ok(())
}
