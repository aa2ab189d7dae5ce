// Write kernels and trajectories to disk and read them back.

use gp_hierarchy::picard::picard_iterate;
use gp_hierarchy::snapshot::{decode_any, encode_any, load_trajectory, save_kernel, save_trajectory};
use gp_hierarchy::{make_grid, Budget, Closure, Hierarchy, ModelSpec, Representation, TimeGrid, WaveFunction};
use num_complex::Complex64 as C64;

pub fn run_example() -> gp_hierarchy::Result<()> {
    let budget = Budget::default();
    let grid = make_grid(1, 8)?;
    let phi = WaveFunction::from_modes(&grid, &[(vec![0], C64::new(0.5, 0.0)), (vec![-1], C64::new(0.0, 0.2))])?;
    let model = ModelSpec::cubic(1, 1.0)?;
    let dir = std::env::temp_dir().join(format!("gph-snapshots-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    for repr in [Representation::Dense, Representation::Separable] {
        let h = Hierarchy::factorized(&phi, model, 2, repr, &budget)?;
        let bytes = encode_any(&h.levels()[1]);
        let back = decode_any(&bytes)?;
        println!(
            "{repr:?} level 2: {} bytes, magic {:?}, round trip exact: {}",
            bytes.len(),
            std::str::from_utf8(&bytes[..4]).unwrap_or("?"),
            back == h.levels()[1]
        );
        save_kernel(dir.join(format!("{repr:?}.bin")), &back)?;
    }

    let gamma0 = Hierarchy::factorized(&phi, model, 2, Representation::Dense, &budget)?;
    let traj = picard_iterate(&gamma0, TimeGrid::new(0.05, 8)?, &Closure::Zero, 3, &budget)?;
    let path = dir.join("trajectory.gpht");
    save_trajectory(&path, &traj)?;
    let back = load_trajectory(&path)?;
    println!("trajectory: {} nodes, round trip exact: {}", back.nodes().len(), back == traj);

    // Damage the version field and look at the diagnostic.
    let mut bytes = std::fs::read(&path)?;
    bytes[4] = 99;
    match gp_hierarchy::snapshot::decode_trajectory(&bytes) {
        Err(e) => println!("corrupted file: {e}"),
        Ok(_) => println!("corrupted file decoded?"),
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
