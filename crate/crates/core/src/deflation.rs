//! Deflation that keeps sparse components exactly orthogonal.
//!
//! Component `r >= 2` is found in two stages. First the single-component
//! estimator runs on the observations projected away from the components
//! found so far, `H_r x_i` with `H_r = Proj⊥(V_{r-1})`, which yields a support
//! `S_r`. Then the component is the leading eigenvector of
//! `H_S P_S Sigma P_S H_S`, where `Sigma` is the covariance of the original
//! data and `H_S` projects away from the span of `P_S V_{r-1}`. That vector is
//! supported on `S_r` and orthogonal to every `P_S v_q`, hence to every `v_q`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::{choose_strategy, CovarianceSource, DataMatrix, Strategy};
use crate::error::{invalid, Error, Result};
use crate::estimator::{fit_source, ImportanceScores, SpcavrpConfig};
use crate::linalg::{apply_sign_convention, eig_top, proj_orth_complement, proj_orth_complement_span, OrthonormalFrame};
use crate::rng::{derive_seed, DOMAIN_DEFLATION};

/// Leading eigenvalues at or below this make a deflation step degenerate.
pub const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflationConfig {
    #[serde(rename = "A")]
    pub groups: usize,
    #[serde(rename = "B")]
    pub group_size: usize,
    #[serde(rename = "d")]
    pub proj_dim: usize,
    /// `l_1, ..., l_m`; its length is the number of components.
    #[serde(rename = "l_per_component")]
    pub sparsities: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default)]
    pub center: bool,
}

impl DeflationConfig {
    pub fn new(groups: usize, group_size: usize, proj_dim: usize, sparsities: Vec<usize>) -> Self {
        Self {
            groups,
            group_size,
            proj_dim,
            sparsities,
            seed: 0,
            strategy: Strategy::Auto,
            center: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn components(&self) -> usize {
        self.sparsities.len()
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let m = self.components();
        if m == 0 || m > p {
            return Err(invalid(format!("number of components {m} must lie in 1..={p}")));
        }
        for r in 0..m {
            self.step_config(r + 1).validate(p)?;
        }
        Ok(())
    }

    /// Seed of step `r` (1-based). The first step uses the master seed so that
    /// a one-component run equals the plain estimator.
    pub fn step_seed(&self, r: usize) -> u64 {
        if r == 1 {
            self.seed
        } else {
            derive_seed(self.seed, &[DOMAIN_DEFLATION, r as u64])
        }
    }

    fn step_config(&self, r: usize) -> SpcavrpConfig {
        SpcavrpConfig::new(self.groups, self.group_size, self.sparsities[r - 1])
            .with_proj_dim(self.proj_dim)
            .with_seed(self.step_seed(r))
            .with_strategy(self.strategy)
            .centered(self.center)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeflationResult {
    /// `p x m`, mutually orthogonal unit columns.
    pub components: OrthonormalFrame,
    /// `S_r`: nonzero pattern of the intermediate direction at step `r`.
    pub supports: Vec<Vec<usize>>,
    /// Single-component estimates on the deflated data, one per step.
    pub intermediate: Vec<DVector<f64>>,
    /// Leading eigenvalue of each final (deflated, restricted) eigenproblem.
    pub eigenvalues: Vec<f64>,
    /// Importance scores of each step.
    pub scores: Vec<ImportanceScores>,
}

fn nonzero_pattern(v: &DVector<f64>) -> Vec<usize> {
    (0..v.len()).filter(|&j| v[j] != 0.0).collect()
}

pub fn deflate_fit(x: &DataMatrix, cfg: &DeflationConfig) -> Result<DeflationResult> {
    cfg.validate(x.p())?;
    let strategy = match cfg.strategy {
        Strategy::Auto => choose_strategy(x.n(), x.p(), cfg.groups, cfg.group_size, cfg.proj_dim),
        s => s,
    };
    let src = CovarianceSource::from_data(x, strategy, cfg.center);
    deflate_source(&src, cfg)
}

pub fn deflate_source(src: &CovarianceSource, cfg: &DeflationConfig) -> Result<DeflationResult> {
    let p = src.p();
    cfg.validate(p)?;
    let m = cfg.components();

    let first = fit_source(src, &cfg.step_config(1))?;
    let v1 = first.vector(0);
    let mut found: Vec<DVector<f64>> = vec![v1.clone()];
    let mut supports = vec![nonzero_pattern(&v1)];
    let mut intermediate = vec![v1];
    let mut eigenvalues = vec![first.eigenvalues[0]];
    let mut scores = vec![first.scores];

    for r in 2..=m {
        let previous = DMatrix::from_columns(&found);
        let h = proj_orth_complement(&previous)?;
        let deflated = src.transformed(&h);
        let step = fit_source(&deflated, &cfg.step_config(r))?;
        let tilde = step.vector(0);
        scores.push(step.scores);
        let support = nonzero_pattern(&tilde);

        let restricted = previous.select_rows(support.iter());
        let h_s = proj_orth_complement_span(&restricted);
        let problem = src.submatrix(&support).congruence(&h_s);
        let sys = eig_top(&problem, 1)?;
        if sys.values[0] <= DEGENERATE_TOL {
            return Err(Error::DegenerateDeflation { step: r });
        }
        // re-apply H_S so the vector lies in its range to working precision
        let mut local = h_s.as_matrix() * sys.vector(0);
        local /= local.norm();
        let mut v = DVector::zeros(p);
        for (row, &j) in support.iter().enumerate() {
            v[j] = local[row];
        }
        apply_sign_convention(v.as_mut_slice());

        eigenvalues.push(sys.values[0]);
        supports.push(support);
        intermediate.push(tilde);
        found.push(v);
    }

    Ok(DeflationResult {
        components: OrthonormalFrame::new(DMatrix::from_columns(&found))?,
        supports,
        intermediate,
        eigenvalues,
        scores,
    })
}
