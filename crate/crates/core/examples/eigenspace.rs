//! Estimating a two-dimensional sparse eigenspace in one pass.

use spcavrp::estimator::{fit, SpcavrpConfig};
use spcavrp::evaluation::subspace_loss;
use spcavrp::linalg::OrthonormalFrame;
use spcavrp::model::{make_b_tradeoff_model, sample_gaussian};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = make_b_tradeoff_model();
    let truth = OrthonormalFrame::new(model.truth())?;
    let x = sample_gaussian(&model, 500, 3)?;

    for (a, b) in [(600, 1), (200, 3), (20, 30)] {
        let cfg = SpcavrpConfig::new(a, b, 10).with_proj_dim(7).with_components(2).with_seed(8);
        let est = fit(&x, &cfg)?;
        println!(
            "A={a:<4} B={b:<3} loss {:.4}  support {:?}",
            subspace_loss(&est.vectors, &truth)?,
            est.support
        );
    }
    Ok(())
}
