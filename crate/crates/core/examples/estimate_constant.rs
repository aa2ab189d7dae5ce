// Ensemble estimate of the collision constant and its grid refinement.

use gp_hierarchy::estimates::{estimate_constant, refinement_table};
use gp_hierarchy::{make_grid, Budget, ModelSpec};

pub fn run_example() -> gp_hierarchy::Result<()> {
    let model = ModelSpec::cubic(1, 1.0)?;
    let budget = Budget::default();
    let grid = make_grid(1, 8)?;
    let e = estimate_constant(&model, &grid, 10, 42, &[1, 2], &budget)?;
    println!("N = 8, 10 samples, seed 42: Ĉ = {:.6}", e.c_hat);
    for s in &e.per_slot {
        println!("  k = {} j = {}: max ratio {:.6}", s.k, s.j, s.max_ratio);
    }
    if let Some(w) = &e.warning {
        println!("  warning: {w}");
    }

    // α = 1/2 sits at n/2, where the estimate carries a warning.
    let edge = estimate_constant(&ModelSpec::cubic(1, 0.5)?, &grid, 10, 42, &[1], &budget)?;
    println!("α = 0.5: Ĉ = {:.6}, warning: {}", edge.c_hat, edge.warning.is_some());

    for row in refinement_table(&model, 1, &[4, 8], 10, 42, &[1], &budget)? {
        match row.ratio {
            Some(r) => println!("refinement N = {:>2}: Ĉ = {:.6}  ratio {:.3}", row.points, row.c_hat, r),
            None => println!("refinement N = {:>2}: Ĉ = {:.6}", row.points, row.c_hat),
        }
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
