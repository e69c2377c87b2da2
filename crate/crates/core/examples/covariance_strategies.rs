//! The full covariance can be formed once or each projected block can be
//! computed from the data; both give the same estimate.

use std::time::Instant;

use spcavrp::covariance::{choose_strategy, Strategy};
use spcavrp::estimator::{fit, SpcavrpConfig};
use spcavrp::evaluation::subspace_loss;
use spcavrp::model::{make_single_spike, sample_gaussian, Profile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = make_single_spike(400, 8, 3.0, Profile::Homogeneous)?;
    let x = sample_gaussian(&model, 150, 9)?;
    println!("auto picks {:?}", choose_strategy(x.n(), x.p(), 200, 50, 8));

    let mut fits = Vec::new();
    for strategy in [Strategy::Precomputed, Strategy::OnDemand] {
        let cfg = SpcavrpConfig::new(200, 50, 8).with_seed(3).with_strategy(strategy);
        let start = Instant::now();
        let est = fit(&x, &cfg)?;
        println!("{strategy:?}: support {:?} in {:.2?}", est.support, start.elapsed());
        fits.push(est);
    }
    println!("difference {:.2e}", subspace_loss(&fits[0].vectors, &fits[1].vectors)?);
    Ok(())
}
