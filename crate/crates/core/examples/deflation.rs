//! Two sparse components with overlapping supports: deflation versus the
//! joint eigenspace estimator.

use spcavrp::deflation::{deflate_source, DeflationConfig};
use spcavrp::estimator::{fit_source, SpcavrpConfig};
use spcavrp::evaluation::subspace_loss;
use spcavrp::linalg::OrthonormalFrame;
use spcavrp::model::{make_two_spike_comparison, sample_gaussian};
use spcavrp::covariance::{CovarianceSource, Strategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = make_two_spike_comparison(true);
    let truth = OrthonormalFrame::new(model.truth())?;
    let x = sample_gaussian(&model, 150, 11)?;
    let src = CovarianceSource::from_data(&x, Strategy::Precomputed, false);

    let start = std::time::Instant::now();
    let cfg = DeflationConfig::new(300, 150, 14, vec![14, 14]).with_seed(5);
    let defl = deflate_source(&src, &cfg)?;
    let v = defl.components.as_matrix();
    println!(
        "deflation  loss {:.4}  |v1.v2| {:.1e}  ({:.2?})",
        subspace_loss(&defl.components, &truth)?,
        v.column(0).dot(&v.column(1)).abs(),
        start.elapsed()
    );

    let start = std::time::Instant::now();
    let cfg = SpcavrpConfig::new(300, 150, 20).with_proj_dim(14).with_components(2).with_seed(5);
    let joint = fit_source(&src, &cfg)?;
    println!(
        "eigenspace loss {:.4}  support {:?}  ({:.2?})",
        subspace_loss(&joint.vectors, &truth)?,
        joint.support,
        start.elapsed()
    );
    Ok(())
}
