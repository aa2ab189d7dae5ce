// Picard increments against the binomial envelope at the local existence time.

use gp_hierarchy::estimates::{convergence_report, estimate_constant};
use gp_hierarchy::hierarchy::DEFAULT_REL_TOL;
use gp_hierarchy::picard::{oracle_closure, theorem_horizon};
use gp_hierarchy::{make_grid, Budget, Hierarchy, ModelSpec, PicardSolver, Representation, TimeGrid, WaveFunction};
use num_complex::Complex64 as C64;

pub fn run_example() -> gp_hierarchy::Result<()> {
    let budget = Budget::default();
    let model = ModelSpec::cubic(1, 1.0)?;
    let grid = make_grid(1, 4)?;
    let c_hat = estimate_constant(&model, &grid, 10, 42, &[1, 2, 3], &budget)?.c_hat;
    let phi0 = WaveFunction::from_modes(&grid, &[(vec![0], C64::new(0.4, 0.0)), (vec![1], C64::new(0.2, 0.0))])?;
    // K = 4 on a coarse grid keeps the iteration going for several steps.
    let gamma0 = Hierarchy::factorized(&phi0, model, 4, Representation::Dense, &budget)?;
    let q_hat = gamma0.quasi_norm(DEFAULT_REL_TOL)?.value;
    let horizon = theorem_horizon(model.interaction(), c_hat, q_hat).unwrap_or(0.1) / 2.0;
    println!("Ĉ = {c_hat:.4}, q̂ = {q_hat:.4}, T = {horizon:.4}");

    let time = TimeGrid::new(horizon, 32)?;
    let closure = oracle_closure(&gamma0, &time, 256)?;
    let solver = PicardSolver::new(&gamma0, time, &closure, &budget)?;
    println!("depth  increment   ratio    iterate    envelope");
    for r in convergence_report(&solver, c_hat, 8)? {
        let ratio = r.ratio.map_or("     -".to_string(), |x| format!("{x:.4}"));
        println!(
            "{:>5}  {:.3e}  {ratio:>6}  {:.6}  {:.3e}",
            r.depth, r.increment, r.iterate_norm, r.envelope
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
