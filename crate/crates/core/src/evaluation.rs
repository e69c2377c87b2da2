//! Losses, support metrics, tuning curves for `l`, the hypergeometric rule
//! for `B`, incoherence diagnostics and an exhaustive sparse-PC oracle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::covariance::CovarianceSource;
use crate::error::{invalid, Error, Result};
use crate::estimator::{top_l_support, ImportanceScores};
use crate::linalg::{eig_top, eigenvalues_desc, principal_angle_sines, OrthonormalFrame, ZERO_TOL};
use crate::projections::{binomial, Combinations};

/// Cap on the number of supports [`brute_force_sparse_pc`] will visit.
pub const BRUTE_FORCE_CAP: u128 = 100_000;

/// `||sin Theta(U, V)||_F`.
pub fn subspace_loss(u: &OrthonormalFrame, v: &OrthonormalFrame) -> Result<f64> {
    let sines = principal_angle_sines(u, v)?;
    Ok(sines.iter().map(|s| s * s).sum::<f64>().sqrt())
}

/// Sine of the angle between two unit vectors.
pub fn vector_loss(u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    subspace_loss(&OrthonormalFrame::from_vector(u)?, &OrthonormalFrame::from_vector(v)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportMetrics {
    /// `|est ∩ true| / |true|` (1 when the true support is empty).
    pub recovery_rate: f64,
    /// `|est \ true|`.
    pub false_inclusions: usize,
}

pub fn support_metrics(estimated: &[usize], truth: &[usize]) -> SupportMetrics {
    let hits = estimated.iter().filter(|j| truth.contains(j)).count();
    let recovery_rate = if truth.is_empty() {
        1.0
    } else {
        hits as f64 / truth.len() as f64
    };
    SupportMetrics {
        recovery_rate,
        false_inclusions: estimated.len() - hits,
    }
}

/// Explained variance of the leading eigenvector restricted to the top-`l`
/// scored coordinates, for each `l` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarCurve {
    pub l_grid: Vec<usize>,
    pub values: Vec<f64>,
    pub supports: Vec<Vec<usize>>,
}

pub fn var_curve(scores: &ImportanceScores, src: &CovarianceSource, l_grid: &[usize]) -> Result<VarCurve> {
    let p = src.p();
    if scores.len() != p {
        return Err(invalid(format!("{} scores for p={p}", scores.len())));
    }
    if l_grid.is_empty() || l_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("l grid must be nonempty and strictly increasing"));
    }
    if let Some(&bad) = l_grid.iter().find(|&&l| l == 0 || l > p) {
        return Err(invalid(format!("l={bad} must lie in 1..={p}")));
    }
    let mut values = Vec::with_capacity(l_grid.len());
    let mut supports = Vec::with_capacity(l_grid.len());
    for &l in l_grid {
        let support = top_l_support(scores, l)?;
        let sub = src.submatrix(&support);
        let sys = eig_top(&sub, 1)?;
        let v = sys.vector(0);
        values.push(v.dot(&(sub.as_matrix() * &v)));
        supports.push(support);
    }
    Ok(VarCurve {
        l_grid: l_grid.to_vec(),
        values,
        supports,
    })
}

/// `HyperGeom(d, k, p)`: white balls among `d` draws without replacement from
/// `p` balls of which `k` are white.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypergeomParams {
    pub d: usize,
    pub k: usize,
    pub p: usize,
}

impl HypergeomParams {
    pub fn new(d: usize, k: usize, p: usize) -> Result<Self> {
        if k > p || d > p {
            return Err(invalid(format!("HyperGeom needs k <= p and d <= p (d={d}, k={k}, p={p})")));
        }
        Ok(Self { d, k, p })
    }

    /// Smallest and largest attainable counts.
    pub fn support(&self) -> (usize, usize) {
        ((self.d + self.k).saturating_sub(self.p), self.d.min(self.k))
    }

    fn mode(&self) -> usize {
        let (lo, hi) = self.support();
        let m = ((self.d as u128 + 1) * (self.k as u128 + 1) / (self.p as u128 + 2)) as usize;
        m.clamp(lo, hi)
    }

    /// `log P(X = x)` from log-gamma.
    pub fn ln_pmf(&self, x: usize) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return f64::NEG_INFINITY;
        }
        ln_choose(self.k, x) + ln_choose(self.p - self.k, self.d - x) - ln_choose(self.p, self.d)
    }

    /// Probabilities over `lo..=hi`. The log-gamma value at the mode anchors a
    /// ratio recursion outwards, and the result is normalised to sum to one,
    /// which cancels the rounding of the anchor.
    fn pmf_table(&self) -> (usize, Vec<f64>) {
        let (lo, hi) = self.support();
        let mode = self.mode();
        let (d, k, p) = (self.d as f64, self.k as f64, self.p as f64);
        // P(x + 1) / P(x)
        let ratio = |x: f64| (k - x) * (d - x) / ((x + 1.0) * (p - k - d + x + 1.0));
        let mut w = vec![0.0; hi - lo + 1];
        w[mode - lo] = self.ln_pmf(mode).exp();
        for x in mode..hi {
            w[x + 1 - lo] = w[x - lo] * ratio(x as f64);
        }
        for x in (lo..mode).rev() {
            w[x - lo] = w[x + 1 - lo] / ratio(x as f64);
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        (lo, w)
    }

    pub fn pmf(&self, x: usize) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        let (lo, w) = self.pmf_table();
        w[x - lo]
    }

    /// `P(X <= t)`, summing whichever tail is shorter.
    pub fn cdf(&self, t: i64) -> f64 {
        let (lo, hi) = self.support();
        if t < lo as i64 {
            return 0.0;
        }
        if t >= hi as i64 {
            return 1.0;
        }
        let t = t as usize;
        let (lo, w) = self.pmf_table();
        if t < self.mode() {
            w[..=t - lo].iter().sum::<f64>().min(1.0)
        } else {
            (1.0 - w[t + 1 - lo..].iter().sum::<f64>()).max(0.0)
        }
    }

    /// `P(X >= t) = 1 - P(X <= t - 1)`, summed directly for accuracy.
    pub fn survival(&self, t: i64) -> f64 {
        let (lo, hi) = self.support();
        if t <= lo as i64 {
            return 1.0;
        }
        if t > hi as i64 {
            return 0.0;
        }
        let t = t as usize;
        let (lo, w) = self.pmf_table();
        if t > self.mode() {
            w[t - lo..].iter().sum::<f64>().min(1.0)
        } else {
            (1.0 - w[..t - lo].iter().sum::<f64>()).max(0.0)
        }
    }
}

fn ln_choose(n: usize, k: usize) -> f64 {
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `F_HG(t; d, k, p)`.
pub fn hypergeom_cdf(t: i64, params: &HypergeomParams) -> f64 {
    params.cdf(t)
}

/// `B = ceil( 1 / (2 (1 - F_HG(t - 1; d, k, p))) )`.
///
/// Quotients within `1e-9` (relative) of an integer are snapped to it, so
/// that exactly representable answers are not pushed up by rounding.
pub fn choose_b(t: usize, d: usize, k: usize, p: usize) -> Result<u64> {
    let params = HypergeomParams::new(d, k, p)?;
    if t == 0 || t > k {
        return Err(invalid(format!("t={t} must lie in 1..={k}")));
    }
    let tail = params.survival(t as i64);
    if !(tail > 0.0) {
        return Err(Error::Unreachable { t, d, k, p });
    }
    let x = 0.5 / tail;
    let nearest = x.round();
    let b = if (x - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    Ok(b.max(1.0) as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Incoherence {
    /// Rows with Euclidean norm above `1e-12`.
    pub nnzr: usize,
    /// Largest over smallest nonzero row norm.
    pub mu: f64,
}

pub fn incoherence(v: &DMatrix<f64>) -> Result<Incoherence> {
    let norms: Vec<f64> = v.row_iter().map(|r| r.norm()).filter(|&n| n > ZERO_TOL).collect();
    if norms.is_empty() {
        return Err(invalid("all rows are zero"));
    }
    let max = norms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = norms.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(Incoherence {
        nnzr: norms.len(),
        mu: max / min,
    })
}

/// Exact `k`-sparse leading eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePc {
    pub support: Vec<usize>,
    pub direction: DVector<f64>,
    pub value: f64,
}

/// Maximises `v^T Sigma v` over `k`-sparse unit vectors by visiting every
/// `k x k` principal submatrix. Ties keep the lexicographically first support.
pub fn brute_force_sparse_pc(src: &CovarianceSource, k: usize) -> Result<SparsePc> {
    let p = src.p();
    if k == 0 || k > p {
        return Err(invalid(format!("k={k} must lie in 1..={p}")));
    }
    let count = binomial(p, k);
    if count > BRUTE_FORCE_CAP {
        return Err(Error::TooLarge {
            count,
            cap: BRUTE_FORCE_CAP,
        });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for support in Combinations::new(p, k) {
        let lead = eigenvalues_desc(&src.submatrix(&support))?[0];
        if best.as_ref().is_none_or(|(_, v)| lead > *v) {
            best = Some((support, lead));
        }
    }
    let (support, value) = best.expect("at least one support");
    let sys = eig_top(&src.submatrix(&support), 1)?;
    let mut direction = DVector::zeros(p);
    for (row, &j) in support.iter().enumerate() {
        direction[j] = sys.vectors[(row, 0)];
    }
    Ok(SparsePc {
        support,
        direction,
        value,
    })
}
