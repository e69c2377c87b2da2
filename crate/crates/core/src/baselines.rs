//! Reference estimators: ordinary PCA and diagonal thresholding.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceSource;
use crate::error::{invalid, Result};
use crate::linalg::{eig_top, OrthonormalFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaselineKind {
    VanillaPca,
    DiagonalThreshold { k: usize },
}

/// Top `m` eigenvectors of the full sample covariance.
pub fn vanilla_pca(src: &CovarianceSource, m: usize) -> Result<OrthonormalFrame> {
    let sigma = src.full();
    let sys = eig_top(&sigma, m)?;
    OrthonormalFrame::new(sys.vectors)
}

/// Keeps the `k` largest diagonal entries (ties to the smaller index) and
/// returns the top `m` eigenvectors of that submatrix, zero-padded.
pub fn diagonal_threshold(src: &CovarianceSource, k: usize, m: usize) -> Result<(Vec<usize>, OrthonormalFrame)> {
    let p = src.p();
    if k == 0 || k > p {
        return Err(invalid(format!("k={k} must lie in 1..={p}")));
    }
    if m == 0 || m > k {
        return Err(invalid(format!("m={m} must lie in 1..={k}")));
    }
    let diag = src.diagonal();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| diag[b].total_cmp(&diag[a]).then(a.cmp(&b)));
    let mut support: Vec<usize> = order.into_iter().take(k).collect();
    support.sort_unstable();

    let sys = eig_top(&src.submatrix(&support), m)?;
    let mut frame = DMatrix::zeros(p, m);
    for r in 0..m {
        for (row, &j) in support.iter().enumerate() {
            frame[(j, r)] = sys.vectors[(row, r)];
        }
    }
    Ok((support, OrthonormalFrame::new(frame)?))
}
