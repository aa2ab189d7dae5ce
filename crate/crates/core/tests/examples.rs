// The runnable examples double as smoke tests.

macro_rules! example {
    ($module:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(quasi_norm, "quasi_norm.rs");
example!(low_rank, "low_rank.rs");
example!(snapshots, "snapshots.rs");
example!(duhamel, "duhamel.rs");
example!(experiment, "experiment.rs");
example!(factorized_equivalence, "factorized_equivalence.rs");

#[test]
fn quasi_norm_example_runs() {
    quasi_norm::run_example().unwrap();
}

#[test]
fn low_rank_example_runs() {
    low_rank::run_example().unwrap();
}

#[test]
fn snapshots_example_runs() {
    snapshots::run_example().unwrap();
}

#[test]
fn duhamel_example_runs() {
    duhamel::run_example().unwrap();
}

#[test]
fn experiment_example_runs() {
    experiment::run_example().unwrap();
}

#[test]
fn factorized_equivalence_helper_matches_the_oracle() {
    let model = gp_hierarchy::ModelSpec::cubic(1, 1.0).unwrap();
    let errors = factorized_equivalence::compare(model, 32).unwrap();
    assert!(errors.iter().all(|&e| e < 1e-6), "{errors:?}");
}
