//! With every d-subset in a single group the estimator solves the
//! combinatorial sparse PCA problem exactly.

use spcavrp::covariance::{CovarianceSource, DataMatrix, Strategy};
use spcavrp::estimator::{fit_source, SpcavrpConfig};
use spcavrp::evaluation::{brute_force_sparse_pc, vector_loss};
use spcavrp::model::{make_single_spike, sample_gaussian, Profile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = make_single_spike(12, 3, 2.0, Profile::Linear)?;
    let x: DataMatrix = sample_gaussian(&model, 40, 4)?;
    let src = CovarianceSource::from_data(&x, Strategy::Precomputed, false);

    let est = fit_source(&src, &SpcavrpConfig::new(1, 1, 3).exhaustive(true))?;
    let oracle = brute_force_sparse_pc(&src, 3)?;
    println!("exhaustive support {:?}", est.support);
    println!("brute force        {:?}  value {:.6}", oracle.support, oracle.value);
    println!("loss between them  {:.2e}", vector_loss(&est.vector(0), &oracle.direction)?);
    Ok(())
}
