//! The random-projection ensemble estimator for sparse principal subspaces.
//!
//! For each of `A` groups, `B` axis-aligned projections of dimension `d` are
//! drawn and the one whose principal submatrix has the largest sum of its top
//! `m` eigenvalues is kept. Each kept projection contributes to a per
//! coordinate importance score
//!
//! ```text
//! w_j = (1/A) sum_a sum_{r<=m} (lambda_{a,r} - lambda_{a,m+1}) * v_{a,r}[j]^2
//! ```
//!
//! where `lambda_{a,d+1} = 0` when `m = d`. The `l` highest-scoring
//! coordinates form the support, and the output is the top `m` eigenvectors of
//! the covariance restricted to that support. With `m = 1` this is the single
//! component estimator.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{choose_strategy, CovarianceSource, DataMatrix, Strategy};
use crate::error::{invalid, Error, Result};
use crate::linalg::{eig_top, eigenvalues_desc, OrthonormalFrame};
use crate::projections::{binomial, cell_projection, AxisProjection, Combinations, SubsetSampler, DEFAULT_ENUMERATION_CAP};

/// Inputs of the estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpcavrpConfig {
    /// Number of groups `A`.
    #[serde(rename = "A")]
    pub groups: usize,
    /// Projections per group `B`.
    #[serde(rename = "B")]
    pub group_size: usize,
    /// Projection dimension `d`.
    #[serde(rename = "d")]
    pub proj_dim: usize,
    /// Output sparsity `l`.
    #[serde(rename = "l")]
    pub sparsity: usize,
    /// Number of components `m`.
    #[serde(rename = "m", default = "one")]
    pub components: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub strategy: Strategy,
    /// Replace the random groups by a single group holding every `d`-subset.
    #[serde(default)]
    pub exhaustive: bool,
    #[serde(default)]
    pub center: bool,
}

fn one() -> usize {
    1
}

impl SpcavrpConfig {
    /// Single-component configuration with `d = l`.
    pub fn new(groups: usize, group_size: usize, sparsity: usize) -> Self {
        Self {
            groups,
            group_size,
            proj_dim: sparsity,
            sparsity,
            components: 1,
            seed: 0,
            strategy: Strategy::Auto,
            exhaustive: false,
            center: false,
        }
    }

    pub fn with_proj_dim(mut self, d: usize) -> Self {
        self.proj_dim = d;
        self
    }

    pub fn with_components(mut self, m: usize) -> Self {
        self.components = m;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn exhaustive(mut self, on: bool) -> Self {
        self.exhaustive = on;
        self
    }

    pub fn centered(mut self, on: bool) -> Self {
        self.center = on;
        self
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let (a, b, d, l, m) = (self.groups, self.group_size, self.proj_dim, self.sparsity, self.components);
        if a == 0 || b == 0 {
            return Err(invalid(format!("A and B must be positive (A={a}, B={b})")));
        }
        if d == 0 || d > p {
            return Err(invalid(format!("d={d} must lie in 1..={p}")));
        }
        if l == 0 || l > p {
            return Err(invalid(format!("l={l} must lie in 1..={p}")));
        }
        if m == 0 || m > d {
            return Err(invalid(format!("m={m} must lie in 1..={d}")));
        }
        if l < m {
            return Err(invalid(format!("l={l} is smaller than m={m}")));
        }
        Ok(())
    }

    /// Resolves `Strategy::Auto` with the operation-count model.
    pub fn resolved_strategy(&self, n: usize, p: usize) -> Strategy {
        match self.strategy {
            Strategy::Auto if self.exhaustive => {
                let cells = binomial(p, self.proj_dim).min(usize::MAX as u128) as usize;
                choose_strategy(n, p, 1, cells, self.proj_dim)
            }
            Strategy::Auto => choose_strategy(n, p, self.groups, self.group_size, self.proj_dim),
            s => s,
        }
    }
}

/// The projection kept for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSelection {
    pub group: usize,
    /// Zero-based index of the kept projection within its group.
    pub b_star: usize,
    /// Top `m + 1` eigenvalues of the kept submatrix (`0` pads beyond `d`).
    pub eigenvalues: Vec<f64>,
    /// `d x m` top eigenvectors of the kept submatrix.
    pub eigenvectors: DMatrix<f64>,
    pub support: AxisProjection,
    /// Sum of the top `m` eigenvalues, the selection criterion.
    pub eigen_sum: f64,
}

fn top_sum(values: &[f64], m: usize) -> f64 {
    values.iter().take(m).sum()
}

/// Keeps the first candidate with the largest top-`m` eigenvalue sum.
fn select_best(
    src: &CovarianceSource,
    candidates: impl Iterator<Item = AxisProjection>,
    m: usize,
) -> Result<(usize, AxisProjection, f64)> {
    let mut best: Option<(usize, AxisProjection, f64)> = None;
    for (b, proj) in candidates.enumerate() {
        let values = eigenvalues_desc(&src.submatrix(proj.indices()))?;
        let sum = top_sum(&values, m);
        if best.as_ref().is_none_or(|(_, _, s)| sum > *s) {
            best = Some((b, proj, sum));
        }
    }
    best.ok_or_else(|| invalid("empty group of projections"))
}

fn finish_selection(
    src: &CovarianceSource,
    group: usize,
    b_star: usize,
    support: AxisProjection,
    eigen_sum: f64,
    m: usize,
) -> Result<GroupSelection> {
    let sub = src.submatrix(support.indices());
    let d = sub.dim();
    let sys = eig_top(&sub, (m + 1).min(d))?;
    let mut eigenvalues = sys.values;
    if m == d {
        eigenvalues.push(0.0);
    }
    Ok(GroupSelection {
        group,
        b_star,
        eigenvalues,
        eigenvectors: sys.vectors.columns(0, m).into_owned(),
        support,
        eigen_sum,
    })
}

/// Selects within one group of projections.
pub fn select_in_group(src: &CovarianceSource, group: &[AxisProjection], m: usize) -> Result<GroupSelection> {
    if let Some(bad) = group.iter().find(|s| s.p() != src.p()) {
        return Err(invalid(format!("projection over p={} for covariance with p={}", bad.p(), src.p())));
    }
    if let Some(bad) = group.iter().find(|s| m > s.d()) {
        return Err(invalid(format!("m={m} exceeds projection dimension {}", bad.d())));
    }
    let (b_star, support, sum) = select_best(src, group.iter().cloned(), m)?;
    finish_selection(src, 0, b_star, support, sum, m)
}

/// Importance scores, one per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImportanceScores {
    values: Vec<f64>,
}

impl ImportanceScores {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coordinates ordered by decreasing score, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        let w = &self.values;
        let mut order: Vec<usize> = (0..w.len()).collect();
        order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
        order
    }

    pub fn nonzero_count(&self) -> usize {
        self.values.iter().filter(|&&x| x != 0.0).count()
    }
}

/// Eigengap-weighted average of squared eigenvector entries over the kept
/// projections, accumulated in group order.
pub fn accumulate_scores(selections: &[GroupSelection], m: usize, p: usize) -> Result<ImportanceScores> {
    if selections.is_empty() {
        return Err(invalid("no group selections to aggregate"));
    }
    let mut w = vec![0.0; p];
    for sel in selections {
        if sel.support.p() != p || sel.eigenvectors.ncols() < m || sel.eigenvalues.len() < m + 1 {
            return Err(invalid(format!("selection for group {} does not match p={p}, m={m}", sel.group)));
        }
        let floor = sel.eigenvalues[m];
        for r in 0..m {
            let gap = sel.eigenvalues[r] - floor;
            for (row, &j) in sel.support.indices().iter().enumerate() {
                let v = sel.eigenvectors[(row, r)];
                w[j] += gap * v * v;
            }
        }
    }
    let a = selections.len() as f64;
    w.iter_mut().for_each(|x| *x /= a);
    Ok(ImportanceScores::new(w))
}

/// The `l` highest-scoring coordinates (ties to the smaller index), sorted.
pub fn top_l_support(scores: &ImportanceScores, l: usize) -> Result<Vec<usize>> {
    if l > scores.len() {
        return Err(invalid(format!("l={l} exceeds p={}", scores.len())));
    }
    let mut support: Vec<usize> = scores.ranking().into_iter().take(l).collect();
    support.sort_unstable();
    Ok(support)
}

/// Output of [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    /// `p x m`, zero outside `support`.
    pub vectors: OrthonormalFrame,
    pub support: Vec<usize>,
    pub eigenvalues: Vec<f64>,
    pub scores: ImportanceScores,
    /// Per-group top-`m` eigenvalue sum of the kept projection.
    pub group_eigen_sums: Vec<f64>,
    pub b_stars: Vec<usize>,
    /// Fewer than `l` coordinates received a nonzero score, so part of the
    /// support was filled by index order.
    pub underdetermined_support: bool,
}

impl Estimate {
    pub fn vector(&self, r: usize) -> nalgebra::DVector<f64> {
        self.vectors.column(r)
    }
}

/// Runs the estimator on raw observations.
pub fn fit(x: &DataMatrix, cfg: &SpcavrpConfig) -> Result<Estimate> {
    cfg.validate(x.p())?;
    let strategy = cfg.resolved_strategy(x.n(), x.p());
    let src = CovarianceSource::from_data(x, strategy, cfg.center);
    fit_source(&src, cfg)
}

/// Runs the estimator on an existing covariance source. `cfg.center` and
/// `cfg.strategy` are ignored here; they are properties of the source.
pub fn fit_source(src: &CovarianceSource, cfg: &SpcavrpConfig) -> Result<Estimate> {
    let p = src.p();
    cfg.validate(p)?;
    let m = cfg.components;
    let d = cfg.proj_dim;

    let selections: Vec<GroupSelection> = if cfg.exhaustive {
        let count = binomial(p, d);
        if count > DEFAULT_ENUMERATION_CAP {
            return Err(Error::TooLarge {
                count,
                cap: DEFAULT_ENUMERATION_CAP,
            });
        }
        let candidates = Combinations::new(p, d).map(|idx| AxisProjection::new(idx, p).expect("valid subset"));
        let (b, proj, sum) = select_best(src, candidates, m)?;
        vec![finish_selection(src, 0, b, proj, sum, m)?]
    } else {
        (0..cfg.groups)
            .into_par_iter()
            .map_init(
                || SubsetSampler::new(p),
                |sampler, a| {
                    let candidates: Vec<AxisProjection> = (0..cfg.group_size)
                        .map(|b| cell_projection(sampler, d, cfg.seed, a, b))
                        .collect();
                    let (b, proj, sum) = select_best(src, candidates.into_iter(), m)?;
                    finish_selection(src, a, b, proj, sum, m)
                },
            )
            .collect::<Result<Vec<_>>>()?
    };

    let scores = accumulate_scores(&selections, m, p)?;
    let support = top_l_support(&scores, cfg.sparsity)?;
    let underdetermined_support = scores.nonzero_count() < cfg.sparsity;

    let sub = src.submatrix(&support);
    let sys = eig_top(&sub, m)?;
    let mut vectors = DMatrix::zeros(p, m);
    for r in 0..m {
        for (row, &j) in support.iter().enumerate() {
            vectors[(j, r)] = sys.vectors[(row, r)];
        }
    }

    Ok(Estimate {
        vectors: OrthonormalFrame::new(vectors)?,
        support,
        eigenvalues: sys.values,
        scores,
        group_eigen_sums: selections.iter().map(|s| s.eigen_sum).collect(),
        b_stars: selections.iter().map(|s| s.b_star).collect(),
        underdetermined_support,
    })
}
