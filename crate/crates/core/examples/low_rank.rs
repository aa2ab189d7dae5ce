// Separable kernels: inner products without densifying, and rank growth
// under the collision operator.

use gp_hierarchy::collision::CollisionSpec;
use gp_hierarchy::{make_grid, Budget, Kernel, SeparableKernel, SeparableTerm, WaveFunction};
use num_complex::Complex64 as C64;

pub fn run_example() -> gp_hierarchy::Result<()> {
    let budget = Budget::default();
    let grid = make_grid(1, 8)?;
    let wave = |p: i64, c: f64| WaveFunction::from_modes(&grid, &[(vec![p], C64::new(c, 0.0))]);
    let (a, b) = (wave(0, 0.5)?, wave(1, 0.3)?);
    let term = |x: &WaveFunction, y: &WaveFunction, c: f64| SeparableTerm {
        coeff: C64::new(c, 0.0),
        left: vec![x.values().to_vec(), y.values().to_vec()],
        right: vec![x.values().to_vec(), y.values().to_vec()],
    };
    let s = SeparableKernel::from_terms(&grid, 2, 64, vec![term(&a, &b, 0.5), term(&b, &a, 0.5)])?;
    let dense = s.to_dense(&budget)?;
    println!("rank {} level {}", s.rank(), s.particles());
    println!("norm (Gram)  {:.14}", s.gram_norm(1.0)?);
    println!("norm (dense) {:.14}", dense.h_alpha_norm(1.0));

    let moved = Kernel::from(s.clone()).propagate(0.3);
    println!("norm after propagation {:.14}", moved.h_alpha_norm(1.0)?);

    let top = SeparableKernel::from_terms(&grid, 3, 64, vec![SeparableTerm {
        coeff: C64::new(1.0, 0.0),
        left: vec![a.values().to_vec(), b.values().to_vec(), a.values().to_vec()],
        right: vec![a.values().to_vec(), a.values().to_vec(), b.values().to_vec()],
    }])?;
    let spec = CollisionSpec::new(gp_hierarchy::Interaction::Cubic, 1)?;
    let collided = spec.apply_separable(&top)?;
    let check = spec.apply(&top.to_dense(&budget)?)?;
    let diff = collided.to_dense(&budget)?.sub(&check)?.max_abs();
    println!("collision: rank {} -> {}, separable vs dense {diff:.2e}", top.rank(), collided.rank());

    // A cap that is too small is an error, not a silent truncation.
    match spec.apply_separable(&top.with_rank_cap(1)?) {
        Err(e) => println!("rank cap 1: {e}"),
        Ok(k) => println!("rank cap 1: unexpectedly fit rank {}", k.rank()),
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
