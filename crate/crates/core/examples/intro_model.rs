//! A covariance that is not spiked: the signal block has the smallest
//! variances, so methods that start from the diagonal miss it.

use spcavrp::baselines::{diagonal_threshold, vanilla_pca};
use spcavrp::covariance::CovarianceSource;
use spcavrp::estimator::{fit, SpcavrpConfig};
use spcavrp::evaluation::{support_metrics, vector_loss};
use spcavrp::model::{make_intro_model, sample_gaussian};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = make_intro_model();
    let v1 = model.truth().column(0).into_owned();
    let truth: Vec<usize> = (0..10).collect();
    let x = sample_gaussian(&model, 2000, 1)?;

    let cfg = SpcavrpConfig::new(300, 150, 10).with_seed(2);
    let est = fit(&x, &cfg)?;
    println!(
        "random projections  loss {:.3}  recovery {:.2}",
        vector_loss(&est.vector(0), &v1)?,
        support_metrics(&est.support, &truth).recovery_rate
    );

    let src = CovarianceSource::from_data(&x, cfg.resolved_strategy(x.n(), x.p()), false);
    let (support, dt) = diagonal_threshold(&src, 10, 1)?;
    println!(
        "diagonal threshold  loss {:.3}  recovery {:.2}",
        vector_loss(&dt.column(0), &v1)?,
        support_metrics(&support, &truth).recovery_rate
    );
    let pca = vanilla_pca(&src, 1)?;
    println!("vanilla pca         loss {:.3}", vector_loss(&pca.column(0), &v1)?);
    Ok(())
}
