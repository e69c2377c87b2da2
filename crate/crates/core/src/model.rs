//! Spiked covariance models and Gaussian sampling.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::DataMatrix;
use crate::error::{invalid, Result};
use crate::linalg::SymMatrix;
use crate::rng::{substream, DOMAIN_GAUSSIAN};

const UNIT_TOL: f64 = 1e-10;
const CLIP_TOL: f64 = -1e-8;

/// One rank-one term `theta * v v^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spike {
    pub theta: f64,
    pub vector: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Base {
    Identity,
    Explicit(SymMatrix),
}

/// `Sigma = base + sum_r theta_r v_r v_r^T` with `theta_1 >= ... >= theta_m > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikedModel {
    p: usize,
    spikes: Vec<Spike>,
    base: Base,
    relaxed: bool,
}

impl SpikedModel {
    /// Checks unit norms, ordering of the strengths and (unless `relaxed`)
    /// mutual orthogonality of the spike directions.
    pub fn new(p: usize, spikes: Vec<Spike>, base: Base, relaxed: bool) -> Result<Self> {
        if p == 0 {
            return Err(invalid("model dimension must be positive"));
        }
        if let Base::Explicit(m) = &base {
            if m.dim() != p {
                return Err(invalid(format!("base is {}x{} but p={p}", m.dim(), m.dim())));
            }
        }
        for (r, s) in spikes.iter().enumerate() {
            if s.vector.len() != p {
                return Err(invalid(format!("spike {r} has length {} but p={p}", s.vector.len())));
            }
            if !(s.theta > 0.0) || !s.theta.is_finite() {
                return Err(invalid(format!("spike {r} has non-positive strength {}", s.theta)));
            }
            if (s.vector.norm() - 1.0).abs() > UNIT_TOL {
                return Err(invalid(format!("spike {r} is not unit-norm")));
            }
        }
        if spikes.windows(2).any(|w| w[0].theta < w[1].theta) {
            return Err(invalid("spike strengths must be nonincreasing"));
        }
        if !relaxed {
            for r in 0..spikes.len() {
                for q in 0..r {
                    let ip = spikes[r].vector.dot(&spikes[q].vector);
                    if ip.abs() > UNIT_TOL {
                        return Err(invalid(format!("spikes {q} and {r} are not orthogonal (inner product {ip:e})")));
                    }
                }
            }
        }
        Ok(Self { p, spikes, base, relaxed })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn spikes(&self) -> &[Spike] {
        &self.spikes
    }

    pub fn base(&self) -> &Base {
        &self.base
    }

    pub fn is_relaxed(&self) -> bool {
        self.relaxed
    }

    pub fn covariance(&self) -> SymMatrix {
        let mut sigma = match &self.base {
            Base::Identity => DMatrix::identity(self.p, self.p),
            Base::Explicit(m) => m.as_matrix().clone(),
        };
        for s in &self.spikes {
            sigma.ger(s.theta, &s.vector, &s.vector, 1.0);
        }
        SymMatrix::from_upper(&sigma).expect("square")
    }

    /// `p x m` matrix of the spike directions.
    pub fn truth(&self) -> DMatrix<f64> {
        let mut v = DMatrix::zeros(self.p, self.spikes.len());
        for (r, s) in self.spikes.iter().enumerate() {
            v.set_column(r, &s.vector);
        }
        v
    }

    /// Union of the spike supports, sorted.
    pub fn support(&self) -> Vec<usize> {
        (0..self.p)
            .filter(|&j| self.spikes.iter().any(|s| s.vector[j] != 0.0))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// `k^{-1/2} (1, ..., 1, 0, ..., 0)`.
    #[default]
    Homogeneous,
    /// Proportional to `(k, k-1, ..., 1, 0, ..., 0)`.
    Linear,
}

fn block_indicator(p: usize, start: usize, len: usize) -> DVector<f64> {
    let mut v = DVector::zeros(p);
    let x = 1.0 / (len as f64).sqrt();
    for j in start..start + len {
        v[j] = x;
    }
    v
}

/// Adds `scale * J_len` on the diagonal block starting at `start`, where
/// `J_q = 1 1^T / q`.
fn add_j_block(m: &mut SymMatrix, start: usize, len: usize, scale: f64) {
    let x = scale / len as f64;
    for j in start..start + len {
        for i in start..=j {
            m.set(i, j, m.get(i, j) + x);
        }
    }
}

pub fn make_single_spike(p: usize, k: usize, theta: f64, profile: Profile) -> Result<SpikedModel> {
    if k == 0 || k > p {
        return Err(invalid(format!("sparsity k={k} must lie in 1..={p}")));
    }
    let vector = match profile {
        Profile::Homogeneous => block_indicator(p, 0, k),
        Profile::Linear => {
            let mut v = DVector::zeros(p);
            for j in 0..k {
                v[j] = (k - j) as f64;
            }
            v.normalize()
        }
    };
    SpikedModel::new(p, vec![Spike { theta, vector }], Base::Identity, false)
}

/// `blockdiag(2 J_k, J_k, 0) + I_p`: two homogeneous spikes of strength 2 and 1.
pub fn make_sigma1(p: usize, k: usize) -> Result<SpikedModel> {
    if k == 0 || 2 * k > p {
        return Err(invalid(format!("sigma1 needs 1 <= k and 2k <= p (k={k}, p={p})")));
    }
    let spikes = vec![
        Spike {
            theta: 2.0,
            vector: block_indicator(p, 0, k),
        },
        Spike {
            theta: 1.0,
            vector: block_indicator(p, k, k),
        },
    ];
    SpikedModel::new(p, spikes, Base::Identity, false)
}

/// `blockdiag(k J_k, 0.99 k J_{3k}, I_{p-4k}) + 0.01 I_p`, written as the
/// `k J_k` spike on top of the remaining blocks.
pub fn make_sigma2(p: usize, k: usize) -> Result<SpikedModel> {
    if k == 0 || 4 * k > p {
        return Err(invalid(format!("sigma2 needs 1 <= k and 4k <= p (k={k}, p={p})")));
    }
    let mut base = SymMatrix::diag(&vec![0.01; p]);
    add_j_block(&mut base, k, 3 * k, 0.99 * k as f64);
    for j in 4 * k..p {
        base.set(j, j, base.get(j, j) + 1.0);
    }
    let spike = Spike {
        theta: k as f64,
        vector: block_indicator(p, 0, k),
    };
    SpikedModel::new(p, vec![spike], Base::Explicit(base), false)
}

/// The 400-dimensional model `blockdiag(10 J_10, 8.9 J_390 + I_390) + 0.01 I`,
/// whose leading eigenvector is not visible on the diagonal.
pub fn make_intro_model() -> SpikedModel {
    let p = 400;
    let mut base = SymMatrix::diag(&vec![0.01; p]);
    add_j_block(&mut base, 10, 390, 8.9);
    for j in 10..p {
        base.set(j, j, base.get(j, j) + 1.0);
    }
    let spike = Spike {
        theta: 10.0,
        vector: block_indicator(p, 0, 10),
    };
    SpikedModel::new(p, vec![spike], Base::Explicit(base), false).expect("fixed model is valid")
}

/// Spikes with homogeneous magnitudes on the given (zero-based) supports.
/// `signs[r][i]` multiplies the `i`-th entry of support `r`.
pub fn make_multi_spike(
    p: usize,
    supports: &[Vec<usize>],
    thetas: &[f64],
    signs: Option<&[Vec<f64>]>,
    relaxed: bool,
) -> Result<SpikedModel> {
    if supports.len() != thetas.len() || supports.is_empty() {
        return Err(invalid("need one strength per support and at least one spike"));
    }
    if let Some(signs) = signs {
        if signs.len() != supports.len() || signs.iter().zip(supports).any(|(s, sup)| s.len() != sup.len()) {
            return Err(invalid("sign patterns must match the supports"));
        }
    }
    let mut spikes = Vec::with_capacity(supports.len());
    for (r, (sup, &theta)) in supports.iter().zip(thetas).enumerate() {
        if sup.is_empty() {
            return Err(invalid(format!("support {r} is empty")));
        }
        let mut sorted = sup.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != sup.len() || sorted.last().is_some_and(|&j| j >= p) {
            return Err(invalid(format!("support {r} has repeated or out-of-range indices")));
        }
        let mut v = DVector::zeros(p);
        for (i, &j) in sup.iter().enumerate() {
            let s = signs.map_or(1.0, |s| s[r][i]);
            if s.abs() != 1.0 {
                return Err(invalid(format!("sign {s} in pattern {r} is not +-1")));
            }
            v[j] = s;
        }
        spikes.push(Spike {
            theta,
            vector: v / (sup.len() as f64).sqrt(),
        });
    }
    SpikedModel::new(p, spikes, Base::Identity, relaxed)
}

/// The two-spike `m = 2` comparison model: `p = 200`, strengths `(50, 30)`,
/// `S_1 = {0..13}` and either `S_2 = {6..19}` (overlapping, with alternating
/// signs on the overlap so that `v_1` and `v_2` are orthogonal) or
/// `S_2 = {14..27}`.
pub fn make_two_spike_comparison(overlapping: bool) -> SpikedModel {
    let s1: Vec<usize> = (0..14).collect();
    let (s2, signs2): (Vec<usize>, Vec<f64>) = if overlapping {
        let s2: Vec<usize> = (6..20).collect();
        let signs = s2
            .iter()
            .map(|&j| if j < 14 && (j - 6) % 2 == 1 { -1.0 } else { 1.0 })
            .collect();
        (s2, signs)
    } else {
        ((14..28).collect(), vec![1.0; 14])
    };
    let signs = vec![vec![1.0; 14], signs2];
    make_multi_spike(200, &[s1, s2], &[50.0, 30.0], Some(&signs), false).expect("fixed model is valid")
}

/// `I + 10 v_1 v_1^T + 9 v_2 v_2^T` with `p = 50`, `k = 7`,
/// `v_1 = 7^{-1/2} (1_7, 0)` and `v_2 = 7^{-1/2} (0_3, -1, 1, -1, 1, -1, 1, 1, 0)`.
pub fn make_b_tradeoff_model() -> SpikedModel {
    let s1: Vec<usize> = (0..7).collect();
    let s2: Vec<usize> = (3..10).collect();
    let signs = vec![vec![1.0; 7], vec![-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 1.0]];
    make_multi_spike(50, &[s1, s2], &[10.0, 9.0], Some(&signs), false).expect("fixed model is valid")
}

/// Serializable description of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    SingleSpike {
        p: usize,
        k: usize,
        theta: f64,
        #[serde(default)]
        profile: Profile,
    },
    Sigma1 {
        p: usize,
        k: usize,
    },
    Sigma2 {
        p: usize,
        k: usize,
    },
    Intro,
    MultiSpike {
        p: usize,
        supports: Vec<Vec<usize>>,
        thetas: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        signs: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        relaxed: bool,
    },
    TwoSpikeComparison {
        overlapping: bool,
    },
    BTradeoff,
}

impl ModelSpec {
    pub fn build(&self) -> Result<SpikedModel> {
        match self {
            ModelSpec::SingleSpike { p, k, theta, profile } => make_single_spike(*p, *k, *theta, *profile),
            ModelSpec::Sigma1 { p, k } => make_sigma1(*p, *k),
            ModelSpec::Sigma2 { p, k } => make_sigma2(*p, *k),
            ModelSpec::Intro => Ok(make_intro_model()),
            ModelSpec::MultiSpike {
                p,
                supports,
                thetas,
                signs,
                relaxed,
            } => make_multi_spike(*p, supports, thetas, signs.as_deref(), *relaxed),
            ModelSpec::TwoSpikeComparison { overlapping } => Ok(make_two_spike_comparison(*overlapping)),
            ModelSpec::BTradeoff => Ok(make_b_tradeoff_model()),
        }
    }
}

/// Draws `N_p(0, Sigma)` observations as `x = Sigma^{1/2} z` with the
/// symmetric square root. Row `i` of a sample uses its own substream of the
/// seed, and `z` is filled with ziggurat standard normals.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    root: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(model: &SpikedModel) -> Result<Self> {
        Self::from_covariance(&model.covariance())
    }

    pub fn from_covariance(sigma: &SymMatrix) -> Result<Self> {
        if !sigma.is_finite() {
            return Err(invalid("covariance has non-finite entries"));
        }
        let eig = SymmetricEigen::new(sigma.as_matrix().clone());
        let mut roots = Vec::with_capacity(sigma.dim());
        for &lam in eig.eigenvalues.iter() {
            if lam < CLIP_TOL {
                return Err(invalid(format!("covariance has negative eigenvalue {lam:e}")));
            }
            roots.push(lam.max(0.0).sqrt());
        }
        let q = &eig.eigenvectors;
        let scaled = q * DMatrix::from_diagonal(&DVector::from_vec(roots));
        let root = &scaled * q.transpose();
        let root = SymMatrix::from_upper_fn(sigma.dim(), |i, j| 0.5 * (root[(i, j)] + root[(j, i)])).into_matrix();
        Ok(Self { root })
    }

    pub fn p(&self) -> usize {
        self.root.nrows()
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<DataMatrix> {
        if n == 0 {
            return Err(invalid("need at least one observation"));
        }
        let p = self.p();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(seed, &[DOMAIN_GAUSSIAN, i as u64]);
                (0..p).map(|_| StandardNormal.sample(&mut rng)).collect()
            })
            .collect();
        let z = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        // rows are observations: X = Z Sigma^{1/2}
        DataMatrix::new(z * &self.root)
    }
}

/// `n` i.i.d. draws from `N_p(0, Sigma)`.
pub fn sample_gaussian(model: &SpikedModel, n: usize, seed: u64) -> Result<DataMatrix> {
    GaussianSampler::new(model)?.sample(n, seed)
}
