// The Duhamel expansion of a Picard iterate, and the Ξ recursion.

use gp_hierarchy::picard::Family;
use gp_hierarchy::{make_grid, Budget, Closure, Hierarchy, ModelSpec, PicardSolver, Representation, TimeGrid, WaveFunction};
use num_complex::Complex64 as C64;

pub fn run_example() -> gp_hierarchy::Result<()> {
    let budget = Budget::default();
    let grid = make_grid(1, 4)?;
    let phi = WaveFunction::from_modes(&grid, &[(vec![0], C64::new(0.4, 0.0)), (vec![1], C64::new(0.2, 0.1))])?;
    let model = ModelSpec::cubic(-1, 1.0)?;
    let gamma0 = Hierarchy::factorized(&phi, model, 4, Representation::Dense, &budget)?;
    let solver = PicardSolver::new(&gamma0, TimeGrid::new(0.2, 16)?, &Closure::Zero, &budget)?;

    for depth in 0..=3 {
        let iterate = solver.iterate(depth)?;
        let expansion = solver.duhamel_expansion(1, depth)?;
        let gap = expansion
            .iter()
            .enumerate()
            .map(|(i, d)| d.sub(iterate.level(i, 1).as_dense().expect("dense iterate")).map(|x| x.max_abs()))
            .collect::<gp_hierarchy::Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let free = solver.duhamel_term(1, depth, Family::Free)?;
        println!(
            "depth {depth}: |expansion - iterate| = {gap:.2e}, ‖Ξ_free‖ at T = {:.3e}",
            free.last().map_or(0.0, |k| k.h_alpha_norm(1.0))
        );
    }
    match solver.duhamel_expansion(1, 5) {
        Err(e) => println!("depth 5 at level 1: {e}"),
        Ok(_) => println!("depth 5 at level 1 accepted"),
    }

    let depth = 6;
    let rho = solver.xi(depth)?;
    let hat = solver.hat_b(&solver.iterate(depth)?)?;
    let mut gap: f64 = 0.0;
    for i in 0..=16 {
        for k in 1..=4 {
            let a = rho.level(i, k).as_dense().expect("dense");
            let b = hat.level(i, k).as_dense().expect("dense");
            gap = gap.max(a.sub(b)?.max_abs());
        }
    }
    println!("Ξ at depth {depth} vs B̃ of the iterate: {gap:.2e}");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
