// Drive the config-based runner in-process: run, re-read the snapshots, verify.

use gp_hierarchy::cli;
use gp_hierarchy::config::{hash_text, parse_config, LoadedConfig};

const CONFIG: &str = r#"
[grid]
n = 1
points = 8

[model]
interaction = "cubic"
mu = 1
alpha = 1.0

[initial]
modes = [{ p = [0], re = 0.4 }, { p = [1], re = 0.2 }]

[truncation]
K = 2

[time]
horizon = 0.1
steps = 16

[closure]
kind = "oracle"
oracle_steps = 1024
"#;

pub fn run_example() -> gp_hierarchy::Result<()> {
    let exp = LoadedConfig {
        config: parse_config(CONFIG)?,
        hash: hash_text(CONFIG),
        base_dir: std::env::current_dir()?,
    };
    let out = std::env::temp_dir().join(format!("gph-experiment-{}", std::process::id()));
    let report = cli::run(&exp, &out)?;
    println!("config {}", &report.provenance.config_hash[..16]);
    println!(
        "depth {:?}, converged {}, residual {:.2e}",
        report.solver.depth, report.solver.converged, report.residual.max_residual
    );
    println!("oracle error per level {:?}", report.oracle_error);
    let files: Vec<_> = report.final_level_files.iter().map(|f| out.join(f)).collect();
    let q = cli::quasinorm_files(&files, 1.0, 1e-12)?;
    println!("final quasi-norm {:.12}, re-read {:.12}", report.final_quasi_norm, q.result.value);
    let v = cli::verify(&exp, &out.join("trajectory.gpht"), &out)?;
    println!("verify passed: {}", v.passed);
    std::fs::remove_dir_all(&out)?;
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
