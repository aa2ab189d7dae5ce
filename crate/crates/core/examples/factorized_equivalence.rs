// Solve the truncated hierarchy with Picard iteration and compare it with
// tensor powers of the one-body solution.
//
// `cargo run --example factorized_equivalence -- quintic` for the quintic case.

use gp_hierarchy::picard::oracle_closure;
use gp_hierarchy::{make_grid, Budget, Hierarchy, ModelSpec, PicardSolver, Representation, TimeGrid, WaveFunction};
use num_complex::Complex64 as C64;

pub fn compare(model: ModelSpec, steps: usize) -> gp_hierarchy::Result<Vec<f64>> {
    let budget = Budget::default();
    let grid = make_grid(1, 16)?;
    let phi0 = WaveFunction::from_modes(&grid, &[(vec![0], C64::new(0.4, 0.0)), (vec![1], C64::new(0.2, 0.0))])?;
    let gamma0 = Hierarchy::factorized(&phi0, model, 2, Representation::Dense, &budget)?;
    let time = TimeGrid::new(0.1, steps)?;
    let closure = oracle_closure(&gamma0, &time, 4096)?;
    let solver = PicardSolver::new(&gamma0, time, &closure, &budget)?;
    let solution = solver.solve(1e-12, 12)?;
    let reference = gp_hierarchy::split_step(&phi0, &model, 0.1, 4096)?
        .resample(&time)?
        .factorized_hierarchy(2, Representation::Dense, &budget)?;
    solution.trajectory.max_relative_error(&reference, &budget)
}

pub fn run_example() -> gp_hierarchy::Result<()> {
    let quintic = std::env::args().any(|a| a == "quintic");
    let model = if quintic { ModelSpec::quintic(1, 1.0)? } else { ModelSpec::cubic(1, 1.0)? };
    println!("{:?}, K = 2, T = 0.1", model.interaction());
    let coarse = compare(model, 64)?;
    let fine = compare(model, 128)?;
    for (k, (c, f)) in coarse.iter().zip(&fine).enumerate() {
        println!(
            "level {}: error M=64 {c:.3e}  M=128 {f:.3e}  reduction {:.2}",
            k + 1,
            c / f
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
