// The hierarchy quasi-norm: bisection on the geometric weighting of level norms.
//
// Run with `cargo run --example quasi_norm`.

use gp_hierarchy::hierarchy::DEFAULT_REL_TOL;
use gp_hierarchy::{make_grid, quasi_norm, Budget, Hierarchy, ModelSpec, NormSequence, Representation, WaveFunction};
use num_complex::Complex64 as C64;

pub fn run_example() -> gp_hierarchy::Result<()> {
    // One level: the root of a/λ = 1 halved.
    let single = quasi_norm(&NormSequence::new(vec![4.0])?, DEFAULT_REL_TOL)?;
    println!("a = (4)         -> {:.12}", single.value);

    // Not homogeneous: doubling the sequence does not double the value.
    let a = NormSequence::new(vec![1.0, 1.0])?;
    let a2 = NormSequence::new(vec![2.0, 2.0])?;
    let q1 = quasi_norm(&a, DEFAULT_REL_TOL)?.value;
    let q2 = quasi_norm(&a2, DEFAULT_REL_TOL)?.value;
    println!("a = (1, 1)      -> {q1:.10}");
    println!("a = (2, 2)      -> {q2:.10}  (2x the first would be {:.10})", 2.0 * q1);

    // Factorized data: a_k = ‖φ‖^{2k}, so the value approaches ‖φ‖² as K grows.
    let grid = make_grid(1, 16)?;
    let phi = WaveFunction::from_modes(&grid, &[(vec![0], C64::new(0.4, 0.0)), (vec![1], C64::new(0.2, 0.0))])?;
    let model = ModelSpec::cubic(1, 1.0)?;
    let target = phi.h_alpha_norm(1.0).powi(2);
    for k in [1, 2, 4, 8, 32] {
        let h = Hierarchy::factorized(&phi, model, k, Representation::Separable, &Budget::default())?;
        let r = h.quasi_norm(DEFAULT_REL_TOL)?;
        println!(
            "K = {k:>2}: value {:.12}  ‖φ‖² {:.12}  bisection steps {}",
            r.value, target, r.iterations
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
