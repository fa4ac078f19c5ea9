//! Mesh-refinement study for a built-in problem, printed as CSV.
//!
//! `cargo run --release --example convergence_table -- linear-lq`

use dgocp::builtin::BuiltinProblem;
use dgocp::convergence::{run_study, ConvergenceOptions};

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "linear-lq".into());
    let problem = BuiltinProblem::by_name(&name).unwrap_or_else(|e| {
        eprintln!("{e}");
        std::process::exit(2);
    });
    let t = std::time::Instant::now();
    match run_study(&problem, &ConvergenceOptions::default()) {
        Ok(rep) => print!("{}", rep.to_csv()),
        Err(fail) => {
            print!("{}", fail.partial.to_csv());
            eprintln!("stopped: {}", fail.error);
        }
    }
    eprintln!("{:.1} s", t.elapsed().as_secs_f64());
}
