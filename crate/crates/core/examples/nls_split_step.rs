// Strang splitting for the one-body equation, with mass and order checks.

use gp_hierarchy::{make_grid, split_step, ModelSpec, WaveFunction};
use num_complex::Complex64 as C64;

pub fn run_example() -> gp_hierarchy::Result<()> {
    let grid = make_grid(1, 32)?;
    let phi0 = WaveFunction::from_modes(&grid, &[(vec![0], C64::new(0.6, 0.0)), (vec![2], C64::new(0.0, 0.3))])?;
    for (name, model) in [("cubic", ModelSpec::cubic(1, 1.0)?), ("quintic", ModelSpec::quintic(-1, 1.0)?)] {
        let reference = split_step(&phi0, &model, 0.5, 8192)?;
        println!("{name}: mass drift over 8192 steps {:.2e}", reference.max_mass_drift());
        let mut prev: Option<f64> = None;
        for m in [32, 64, 128] {
            let traj = split_step(&phi0, &model, 0.5, m)?;
            let err = traj
                .last()
                .values()
                .iter()
                .zip(reference.last().values())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            match prev {
                Some(p) => println!("  M = {m:>3}: max error {err:.3e}  reduction {:.2}", p / err),
                None => println!("  M = {m:>3}: max error {err:.3e}"),
            }
            prev = Some(err);
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
