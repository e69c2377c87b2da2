//! Sample covariance and the two ways of obtaining projected covariances:
//! extract a principal submatrix from a precomputed `p x p` matrix, or form
//! the covariance of the projected data on demand.

use std::borrow::Cow;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{eigenvalues_desc, SymMatrix};
use crate::projections::AxisProjection;

/// Smallest eigenvalue accepted for a precomputed covariance.
pub const PSD_TOL: f64 = -1e-8;

/// `n x p` observations, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    data: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(invalid(format!(
                "data matrix must be at least 1x1, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            let (r, c) = (pos % data.nrows(), pos / data.nrows());
            return Err(invalid(format!("non-finite entry at row {r}, column {c}")));
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(invalid(format!("row {i} has {} entries, expected {p}", rows[i].len())));
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }

    /// Applies a `p x p` linear map to every observation: `x_i -> M x_i`.
    pub fn transform(&self, m: &SymMatrix) -> DataMatrix {
        // rows are observations, so X -> X M^T = X M
        DataMatrix {
            data: &self.data * m.as_matrix(),
        }
    }
}

/// Subtracts each column's mean.
pub fn center_columns(x: &DataMatrix) -> DataMatrix {
    let mut data = x.data.clone();
    let n = data.nrows() as f64;
    for mut col in data.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    DataMatrix { data }
}

/// `n^{-1} sum_i x_i x_i^T`. No mean is subtracted.
pub fn sample_covariance(x: &DataMatrix) -> SymMatrix {
    let n = x.n() as f64;
    let gram = x.data.tr_mul(&x.data);
    SymMatrix::from_upper_fn(x.p(), |i, j| gram[(i, j)] / n)
}

/// How projected covariances are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    Auto,
    Precomputed,
    OnDemand,
}

/// Picks the cheaper of the two strategies from their operation counts:
/// precompute costs `n p^2 + A B d^2`, on-demand costs `A B n d^2`.
/// Ties go to precomputation.
pub fn choose_strategy(n: usize, p: usize, groups: usize, group_size: usize, d: usize) -> Strategy {
    let (n, p, a, b, d) = (n as u128, p as u128, groups as u128, group_size as u128, d as u128);
    let precompute = n * p * p + a * b * d * d;
    let on_demand = a * b * n * d * d;
    if precompute <= on_demand {
        Strategy::Precomputed
    } else {
        Strategy::OnDemand
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Source {
    Precomputed(SymMatrix),
    OnDemand(DataMatrix),
}

/// Read-only provider of (sub)covariance matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSource {
    source: Source,
    centered: bool,
}

impl CovarianceSource {
    /// Wraps a covariance matrix, checking it is positive semidefinite.
    pub fn precomputed(sigma: SymMatrix) -> Result<Self> {
        if !sigma.is_finite() {
            return Err(invalid("covariance has non-finite entries"));
        }
        let smallest = *eigenvalues_desc(&sigma)?.last().expect("dim >= 1");
        if smallest < PSD_TOL {
            return Err(invalid(format!(
                "covariance is not positive semidefinite (smallest eigenvalue {smallest:e})"
            )));
        }
        Ok(Self {
            source: Source::Precomputed(sigma),
            centered: false,
        })
    }

    /// Builds a source from data. `Strategy::Auto` is treated as precomputed;
    /// use [`choose_strategy`] first to resolve it against a workload.
    pub fn from_data(x: &DataMatrix, strategy: Strategy, center: bool) -> Self {
        let data = if center { center_columns(x) } else { x.clone() };
        let source = match strategy {
            Strategy::OnDemand => Source::OnDemand(data),
            Strategy::Auto | Strategy::Precomputed => Source::Precomputed(sample_covariance(&data)),
        };
        Self {
            source,
            centered: center,
        }
    }

    pub fn p(&self) -> usize {
        match &self.source {
            Source::Precomputed(s) => s.dim(),
            Source::OnDemand(x) => x.p(),
        }
    }

    pub fn strategy(&self) -> Strategy {
        match self.source {
            Source::Precomputed(_) => Strategy::Precomputed,
            Source::OnDemand(_) => Strategy::OnDemand,
        }
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// The data behind an on-demand source.
    pub fn data(&self) -> Option<&DataMatrix> {
        match &self.source {
            Source::OnDemand(x) => Some(x),
            Source::Precomputed(_) => None,
        }
    }

    /// `Sigma^{(S,S)}`.
    pub fn projected_covariance(&self, s: &AxisProjection) -> Result<SymMatrix> {
        if s.p() != self.p() {
            return Err(invalid(format!(
                "projection is over p={} but the covariance has p={}",
                s.p(),
                self.p()
            )));
        }
        Ok(self.submatrix(s.indices()))
    }

    /// Principal submatrix on sorted, in-range indices (unchecked beyond
    /// debug assertions).
    pub(crate) fn submatrix(&self, indices: &[usize]) -> SymMatrix {
        debug_assert!(indices.iter().all(|&j| j < self.p()));
        match &self.source {
            Source::Precomputed(sigma) => sigma.principal_submatrix(indices),
            Source::OnDemand(x) => {
                let n = x.n() as f64;
                let m = x.as_matrix();
                SymMatrix::from_upper_fn(indices.len(), |i, j| {
                    m.column(indices[i]).dot(&m.column(indices[j])) / n
                })
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        match &self.source {
            Source::Precomputed(sigma) => sigma.diagonal(),
            Source::OnDemand(x) => {
                let n = x.n() as f64;
                x.as_matrix().column_iter().map(|c| c.norm_squared() / n).collect()
            }
        }
    }

    /// The full `p x p` covariance, computed if necessary.
    pub fn full(&self) -> Cow<'_, SymMatrix> {
        match &self.source {
            Source::Precomputed(sigma) => Cow::Borrowed(sigma),
            Source::OnDemand(x) => Cow::Owned(sample_covariance(x)),
        }
    }

    /// Source for the transformed observations `H x_i`, in the same mode.
    pub(crate) fn transformed(&self, h: &SymMatrix) -> CovarianceSource {
        let source = match &self.source {
            Source::Precomputed(sigma) => Source::Precomputed(sigma.congruence(h)),
            Source::OnDemand(x) => Source::OnDemand(x.transform(h)),
        };
        Self {
            source,
            centered: self.centered,
        }
    }
}
