//! Picking the sparsity level from the explained-variance curve: it rises
//! while true coordinates are added and flattens afterwards.

use spcavrp::covariance::CovarianceSource;
use spcavrp::estimator::{fit, SpcavrpConfig};
use spcavrp::evaluation::var_curve;
use spcavrp::model::{make_single_spike, sample_gaussian, Profile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = make_single_spike(100, 10, 5.0, Profile::Homogeneous)?;
    let x = sample_gaussian(&model, 500, 6)?;
    let cfg = SpcavrpConfig::new(300, 100, 20).with_proj_dim(10).with_seed(1);
    let est = fit(&x, &cfg)?;
    let src = CovarianceSource::from_data(&x, cfg.resolved_strategy(x.n(), x.p()), false);

    let grid: Vec<usize> = (2..=20).collect();
    let curve = var_curve(&est.scores, &src, &grid)?;
    for (l, v) in curve.l_grid.iter().zip(&curve.values) {
        println!("{l:>3} {v:8.4} {}", "#".repeat((v * 5.0) as usize));
    }
    Ok(())
}
