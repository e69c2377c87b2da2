//! Monte Carlo comparison driven by the same spec format as the
//! `benchmark` subcommand.

use spcavrp::cli::{parse_results, run_benchmark, ExperimentSpec};

const SPEC: &str = r#"{
    "model_id": "single-spike-p50",
    "model": {"kind": "single-spike", "p": 50, "k": 7, "theta": 1.0},
    "n_grid": [250, 1000],
    "reps": 5,
    "seed": 2024,
    "estimators": [
        {"id": "A100-B50", "kind": "rp", "A": 100, "B": 50, "l": 7},
        {"id": "A5000-B1", "kind": "rp", "A": 5000, "B": 1, "l": 7},
        {"id": "diag", "kind": "diagonal-threshold", "k": 7},
        {"id": "pca", "kind": "vanilla-pca"}
    ]
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec: ExperimentSpec = serde_json::from_str(SPEC)?;
    let text = run_benchmark(&spec, true).map_err(|e| e.message)?;
    let rows = parse_results(&text).map_err(|e| e.message)?;
    println!("{:<10} {:>6} {:>8} {:>9}", "estimator", "n", "loss", "recovery");
    for r in rows.iter().filter(|r| r.rep.is_none()) {
        println!("{:<10} {:>6} {:>8.4} {:>9.3}", r.estimator_id, r.n, r.loss, r.support_recovery);
    }
    Ok(())
}
