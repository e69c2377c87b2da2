//! Generated-input checks of the library invariants, shared by the
//! `properties` and `acceptance` test targets.

#![allow(dead_code)]

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use spcavrp::baselines::diagonal_threshold;
use spcavrp::cli::{self, Cli, ExperimentSpec};
use spcavrp::covariance::{center_columns, sample_covariance, CovarianceSource, DataMatrix, Strategy as Cov};
use spcavrp::deflation::{deflate_fit, DeflationConfig};
use spcavrp::estimator::{fit, SpcavrpConfig};
use spcavrp::evaluation::{
    brute_force_sparse_pc, choose_b, hypergeom_cdf, subspace_loss, support_metrics, var_curve, vector_loss, HypergeomParams,
};
use spcavrp::linalg::{eig_top, eigenvalues_desc, principal_angle_sines, proj_orth_complement, OrthonormalFrame, SymMatrix};
use spcavrp::model::{make_sigma2, sample_gaussian, ModelSpec, Profile};
use spcavrp::projections::{binomial, enumerate_all, sample_grid, Combinations};

pub const CASES: u32 = 128;

pub type Invariant = (&'static str, fn() -> Result<(), String>);

pub fn check<S>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
{
    let config = Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

/// Correlated Gaussian-looking data with uneven column scales.
pub fn random_data(n: usize, p: usize, seed: u64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..2.0)).collect();
    let loading: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut m = DMatrix::zeros(n, p);
    for i in 0..n {
        let common: f64 = rng.sample(StandardNormal);
        for j in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            m[(i, j)] = scales[j] * z + loading[j] * common;
        }
    }
    DataMatrix::new(m).unwrap()
}

fn random_frame(p: usize, m: usize, seed: u64) -> OrthonormalFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(p, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    OrthonormalFrame::new(g.qr().q()).unwrap()
}

fn random_rotation(m: usize, seed: u64) -> DMatrix<f64> {
    random_frame(m, m, seed).into_matrix()
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

fn orthonormality_error(v: &DMatrix<f64>) -> f64 {
    max_abs(&(v.transpose() * v - DMatrix::identity(v.ncols(), v.ncols())))
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn sym_matrix() -> impl Strategy<Value = SymMatrix> {
    (1usize..=10).prop_flat_map(|p| vec(-1.0f64..1.0, p * p).prop_map(move |v| SymMatrix::from_upper_fn(p, |i, j| v[i * p + j])))
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

// ------------------------------------------------------------ linear algebra

pub fn eigen_reconstruction() -> Result<(), String> {
    check(sym_matrix(), |m| {
        let sys = eig_top(&m, m.dim()).map_err(|e| fail(e.to_string()))?;
        let back = &sys.vectors * DMatrix::from_diagonal(&DVector::from_vec(sys.values.clone())) * sys.vectors.transpose();
        prop_assert!(max_abs(&(back - m.as_matrix())) < 1e-8);
        Ok(())
    })
}

pub fn complement_annihilates() -> Result<(), String> {
    let strategy = (1usize..=10).prop_flat_map(|p| (Just(p), 1..=p, any::<u64>()));
    check(strategy, |(p, r, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = DMatrix::from_fn(p, r, |_, _| rng.random_range(-1.0..1.0));
        let h = proj_orth_complement(&v).map_err(|e| fail(e.to_string()))?;
        prop_assert!(max_abs(&(h.as_matrix() * &v)) <= 1e-10);
        Ok(())
    })
}

pub fn sines_symmetric_and_rotation_invariant() -> Result<(), String> {
    let strategy = (1usize..=10).prop_flat_map(|p| (Just(p), 1..=p, any::<u64>()));
    check(strategy, |(p, m, seed)| {
        let u = random_frame(p, m, seed);
        let v = random_frame(p, m, seed ^ 0xa5a5);
        let q = random_rotation(m, seed ^ 0x5a5a);
        let uv = principal_angle_sines(&u, &v).unwrap();
        let vu = principal_angle_sines(&v, &u).unwrap();
        let rotated = OrthonormalFrame::new(u.as_matrix() * &q).unwrap();
        let ruv = principal_angle_sines(&rotated, &v).unwrap();
        for i in 0..m {
            prop_assert!((uv[i] - vu[i]).abs() <= 1e-10, "{uv:?} vs {vu:?}");
            prop_assert!((uv[i] - ruv[i]).abs() <= 1e-10, "{uv:?} vs {ruv:?}");
        }
        Ok(())
    })
}

pub fn eig_top_is_deterministic() -> Result<(), String> {
    check((sym_matrix(), 1usize..=10), |(m, r)| {
        let r = r.min(m.dim());
        let a = eig_top(&m, r).unwrap();
        let b = eig_top(&m, r).unwrap();
        prop_assert_eq!(a, b);
        Ok(())
    })
}

// ------------------------------------------------------------ projections

pub fn projections_are_valid() -> Result<(), String> {
    let strategy = (1usize..=40).prop_flat_map(|p| (Just(p), 1..=p, 1usize..=5, 1usize..=5, any::<u64>()));
    check(strategy, |(p, d, a, b, seed)| {
        let grid = sample_grid(p, d, a, b, seed).unwrap();
        prop_assert_eq!(grid.cells().len(), a * b);
        for cell in grid.cells() {
            let idx = cell.indices();
            prop_assert_eq!(idx.len(), d);
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(idx.iter().all(|&j| j < p));
        }
        Ok(())
    })
}

pub fn grid_is_pure() -> Result<(), String> {
    let strategy = (1usize..=40).prop_flat_map(|p| (Just(p), 1..=p, 1usize..=5, 1usize..=5, any::<u64>()));
    check(strategy, |(p, d, a, b, seed)| {
        let x = sample_grid(p, d, a, b, seed).unwrap();
        let y = with_pool(2, || sample_grid(p, d, a, b, seed).unwrap());
        prop_assert_eq!(x.cells(), y.cells());
        Ok(())
    })
}

pub fn enumeration_is_complete() -> Result<(), String> {
    let strategy = (1usize..=12).prop_flat_map(|p| (Just(p), 1..=p));
    check(strategy, |(p, d)| {
        let all = enumerate_all(p, d, 1_000_000).unwrap();
        prop_assert_eq!(all.len() as u128, binomial(p, d));
        let mut keys: Vec<Vec<usize>> = all.iter().map(|s| s.indices().to_vec()).collect();
        keys.sort();
        keys.dedup();
        prop_assert_eq!(keys.len(), all.len());
        Ok(())
    })
}

// ------------------------------------------------------------ covariance

fn data_params() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..=30, 1usize..=10, any::<u64>())
}

pub fn sample_covariance_is_psd() -> Result<(), String> {
    check(data_params(), |(n, p, seed)| {
        let s = sample_covariance(&random_data(n, p, seed));
        let smallest = *eigenvalues_desc(&s).unwrap().last().unwrap();
        prop_assert!(smallest >= -1e-8, "smallest eigenvalue {smallest}");
        Ok(())
    })
}

pub fn projected_covariance_matches_submatrix() -> Result<(), String> {
    check((data_params(), any::<bool>(), any::<u64>()), |((n, p, seed), center, pick)| {
        let x = random_data(n, p, seed);
        let full = if center { sample_covariance(&center_columns(&x)) } else { sample_covariance(&x) };
        let mut rng = ChaCha8Rng::seed_from_u64(pick);
        let d = rng.random_range(1..=p);
        let s = spcavrp::projections::sample_projection(p, d, &mut rng).unwrap();
        let expected = full.principal_submatrix(s.indices());
        for strategy in [Cov::Precomputed, Cov::OnDemand] {
            let src = CovarianceSource::from_data(&x, strategy, center);
            let got = src.projected_covariance(&s).unwrap();
            prop_assert!(max_abs(&(got.as_matrix() - expected.as_matrix())) <= 1e-10);
        }
        Ok(())
    })
}

pub fn centering_matches_definition() -> Result<(), String> {
    check(data_params(), |(n, p, seed)| {
        let x = random_data(n, p, seed);
        let got = sample_covariance(&center_columns(&x));
        let m = x.as_matrix();
        for i in 0..p {
            for j in 0..p {
                let (mi, mj) = (m.column(i).mean(), m.column(j).mean());
                let c = (0..n).map(|r| (m[(r, i)] - mi) * (m[(r, j)] - mj)).sum::<f64>() / n as f64;
                prop_assert!((got.get(i, j) - c).abs() <= 1e-10);
            }
        }
        Ok(())
    })
}

// ------------------------------------------------------------ estimator

#[derive(Debug, Clone)]
struct FitCase {
    n: usize,
    p: usize,
    seed: u64,
    cfg: SpcavrpConfig,
}

fn fit_case() -> impl Strategy<Value = FitCase> {
    (2usize..=15)
        .prop_flat_map(|p| (Just(p), 1..=p))
        .prop_flat_map(|(p, d)| (Just(p), Just(d), 1..=d.min(3)))
        .prop_flat_map(|(p, d, m)| {
            (
                Just(p),
                Just(d),
                Just(m),
                m..=p,
                1usize..=6,
                1usize..=6,
                5usize..=40,
                any::<u64>(),
                any::<u64>(),
                any::<bool>(),
            )
        })
        .prop_map(|(p, d, m, l, a, b, n, seed, fit_seed, on_demand)| FitCase {
            n,
            p,
            seed,
            cfg: SpcavrpConfig::new(a, b, l)
                .with_proj_dim(d)
                .with_components(m)
                .with_seed(fit_seed)
                .with_strategy(if on_demand { Cov::OnDemand } else { Cov::Precomputed }),
        })
}

pub fn estimate_support_and_orthonormality() -> Result<(), String> {
    check(fit_case(), |c| {
        let est = fit(&random_data(c.n, c.p, c.seed), &c.cfg).unwrap();
        prop_assert_eq!(est.support.len(), c.cfg.sparsity);
        prop_assert!(est.support.windows(2).all(|w| w[0] < w[1]));
        let v = est.vectors.as_matrix();
        for j in 0..c.p {
            if !est.support.contains(&j) {
                prop_assert!(v.row(j).iter().all(|&x| x == 0.0));
            }
        }
        prop_assert!(orthonormality_error(v) <= 1e-10);
        Ok(())
    })
}

pub fn estimate_is_deterministic() -> Result<(), String> {
    check(fit_case(), |c| {
        let x = random_data(c.n, c.p, c.seed);
        let a = with_pool(1, || fit(&x, &c.cfg).unwrap());
        let b = with_pool(3, || fit(&x, &c.cfg).unwrap());
        let again = fit(&x, &c.cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a, &again);
        Ok(())
    })
}

pub fn exhaustive_matches_brute_force() -> Result<(), String> {
    let strategy = (3usize..=9).prop_flat_map(|p| (Just(p), 1..=3usize.min(p), 5usize..=30, any::<u64>()));
    check(strategy, |(p, k, n, seed)| {
        let src = CovarianceSource::from_data(&random_data(n, p, seed), Cov::Precomputed, false);
        let est = spcavrp::estimator::fit_source(&src, &SpcavrpConfig::new(1, 1, k).exhaustive(true)).unwrap();
        let oracle = brute_force_sparse_pc(&src, k).unwrap();
        prop_assert_eq!(&est.support, &oracle.support);
        prop_assert!(vector_loss(&est.vector(0), &oracle.direction).unwrap() <= 1e-10);
        Ok(())
    })
}

pub fn exhaustive_is_permutation_equivariant() -> Result<(), String> {
    let strategy = (3usize..=8)
        .prop_flat_map(|p| (Just(p), 1..=3usize.min(p), 10usize..=30, any::<u64>(), Just((0..p).collect::<Vec<usize>>()).prop_shuffle()));
    check(strategy, |(p, k, n, seed, perm)| {
        let x = random_data(n, p, seed);
        // column j of the permuted data is column perm[j] of the original
        let y = DataMatrix::new(DMatrix::from_fn(n, p, |i, j| x.as_matrix()[(i, perm[j])])).unwrap();
        let cfg = SpcavrpConfig::new(1, 1, k).exhaustive(true).with_strategy(Cov::Precomputed);
        let sx = fit(&x, &cfg).unwrap().support;
        let sy = fit(&y, &cfg).unwrap().support;
        let mut mapped: Vec<usize> = sy.iter().map(|&j| perm[j]).collect();
        mapped.sort_unstable();
        prop_assert_eq!(mapped, sx);
        Ok(())
    })
}

pub fn larger_groups_select_larger_sums() -> Result<(), String> {
    check((fit_case(), 2usize..=8), |(c, b)| {
        let x = random_data(c.n, c.p, c.seed);
        let mut single = c.cfg.clone();
        single.group_size = 1;
        let mut many = c.cfg.clone();
        many.group_size = b;
        let s = fit(&x, &single).unwrap().group_eigen_sums;
        let m = fit(&x, &many).unwrap().group_eigen_sums;
        for (a, (lo, hi)) in s.iter().zip(&m).enumerate() {
            prop_assert!(lo <= hi, "group {a}: {lo} > {hi}");
        }
        Ok(())
    })
}

// ------------------------------------------------------------ deflation

#[derive(Debug, Clone)]
pub struct DeflationCase {
    pub n: usize,
    pub p: usize,
    pub model: ModelSpec,
    pub data_seed: u64,
    pub cfg: DeflationConfig,
}

/// Random spiked model and configuration. Each step keeps more coordinates
/// than the number of earlier components and `n > p`, so no step is
/// degenerate.
pub fn deflation_case(p_range: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = DeflationCase> {
    (p_range, 1usize..=4, any::<u64>()).prop_map(|(p, m, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let supports: Vec<Vec<usize>> = (0..m)
            .map(|_| {
                let k = rng.random_range(1..=(p / 2).max(1));
                let mut s = rand::seq::index::sample(&mut rng, p, k).into_vec();
                s.sort_unstable();
                s
            })
            .collect();
        let mut thetas: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..20.0)).collect();
        thetas.sort_by(|a, b| b.total_cmp(a));
        let sparsities: Vec<usize> = (1..=m)
            .map(|r| rng.random_range(r + 1..=(p / 2).min(15).max(r + 1)))
            .collect();
        let d = rng.random_range(1..=p.min(12));
        let cfg = DeflationConfig::new(rng.random_range(1..=30), rng.random_range(1..=20), d, sparsities)
            .with_seed(rng.random())
            .with_strategy(if rng.random() { Cov::OnDemand } else { Cov::Precomputed });
        DeflationCase {
            n: rng.random_range(p + 10..=3 * p),
            p,
            model: ModelSpec::MultiSpike {
                p,
                supports,
                thetas,
                signs: None,
                relaxed: true,
            },
            data_seed: rng.random(),
            cfg,
        }
    })
}

impl DeflationCase {
    pub fn data(&self) -> DataMatrix {
        sample_gaussian(&self.model.build().unwrap(), self.n, self.data_seed).unwrap()
    }
}

pub fn max_cross_inner_product(v: &DMatrix<f64>) -> f64 {
    let g = v.transpose() * v;
    let mut worst: f64 = 0.0;
    for r in 0..g.nrows() {
        for q in 0..g.ncols() {
            if r != q {
                worst = worst.max(g[(r, q)].abs());
            }
        }
    }
    worst
}

pub fn deflation_is_orthogonal() -> Result<(), String> {
    check(deflation_case(10..=40), |c| {
        let res = deflate_fit(&c.data(), &c.cfg).map_err(|e| fail(e.to_string()))?;
        let worst = max_cross_inner_product(res.components.as_matrix());
        prop_assert!(worst <= 1e-10, "max |v_r . v_q| = {worst:e}");
        Ok(())
    })
}

pub fn deflation_components_are_sparse_units() -> Result<(), String> {
    check(deflation_case(10..=40), |c| {
        let res = deflate_fit(&c.data(), &c.cfg).map_err(|e| fail(e.to_string()))?;
        for (r, support) in res.supports.iter().enumerate() {
            let v = res.components.column(r);
            prop_assert!((v.norm() - 1.0).abs() <= 1e-12);
            prop_assert!(support.len() <= c.cfg.sparsities[r]);
            for j in 0..c.p {
                if v[j] != 0.0 {
                    prop_assert!(support.contains(&j));
                }
            }
        }
        Ok(())
    })
}

pub fn deflation_is_deterministic() -> Result<(), String> {
    check(deflation_case(10..=25), |c| {
        let x = c.data();
        let a = with_pool(1, || deflate_fit(&x, &c.cfg).unwrap());
        let b = with_pool(3, || deflate_fit(&x, &c.cfg).unwrap());
        prop_assert_eq!(a, b);
        Ok(())
    })
}

// ------------------------------------------------------------ evaluation

pub fn loss_properties() -> Result<(), String> {
    let strategy = (1usize..=10).prop_flat_map(|p| (Just(p), 1..=p, any::<u64>()));
    check(strategy, |(p, m, seed)| {
        let u = random_frame(p, m, seed);
        let v = random_frame(p, m, seed.wrapping_add(1));
        let q = random_rotation(m, seed.wrapping_add(2));
        let l = subspace_loss(&u, &v).unwrap();
        prop_assert!((0.0..=(m as f64).sqrt() + 1e-12).contains(&l));
        prop_assert!((l - subspace_loss(&v, &u).unwrap()).abs() <= 1e-12);
        let rotated = OrthonormalFrame::new(v.as_matrix() * &q).unwrap();
        prop_assert!((l - subspace_loss(&u, &rotated).unwrap()).abs() <= 1e-10);
        prop_assert!(subspace_loss(&u, &u).unwrap() <= 1e-7);
        Ok(())
    })
}

/// Exact `P(X <= t)` for every `t` by counting `d`-subsets by their overlap
/// with `{0, ..., k-1}`.
pub fn enumerated_cdf(d: usize, k: usize, p: usize) -> Vec<f64> {
    let mut counts = vec![0u64; d + 1];
    for s in Combinations::new(p, d) {
        counts[s.iter().filter(|&&j| j < k).count()] += 1;
    }
    let total: u64 = counts.iter().sum();
    let mut acc = 0u64;
    counts
        .iter()
        .map(|&c| {
            acc += c;
            acc as f64 / total as f64
        })
        .collect()
}

pub fn hypergeom_matches_enumeration() -> Result<(), String> {
    let strategy = (1usize..=12).prop_flat_map(|p| (Just(p), 1..=p, 0..=p));
    check(strategy, |(p, d, k)| {
        let params = HypergeomParams::new(d, k, p).unwrap();
        let exact = enumerated_cdf(d, k, p);
        let mut prev = 0.0;
        for t in -1..=(d as i64 + 1) {
            let got = hypergeom_cdf(t, &params);
            let want = if t < 0 { 0.0 } else { exact[(t as usize).min(d)] };
            prop_assert!((got - want).abs() <= 1e-12, "t={t}: {got} vs {want}");
            prop_assert!(got >= prev);
            prev = got;
        }
        Ok(())
    })
}

pub fn choose_b_is_monotone() -> Result<(), String> {
    let strategy = (2usize..=200)
        .prop_flat_map(|p| (Just(p), 1..=p.min(20)))
        .prop_flat_map(|(p, k)| (Just(p), Just(k), 1..=k, 1..p));
    check(strategy, |(p, k, t, d)| {
        let here = choose_b(t, d, k, p).ok();
        if let (Some(b), Some(next_t)) = (here, if t < k { choose_b(t + 1, d, k, p).ok() } else { None }) {
            prop_assert!(b <= next_t, "t: {b} > {next_t}");
        }
        if let (Some(b), Ok(next_d)) = (here, choose_b(t, d + 1, k, p)) {
            prop_assert!(next_d <= b, "d: {next_d} > {b}");
        }
        // unreachable exactly when no d-subset can hold t signal coordinates
        prop_assert_eq!(here.is_none(), t > d.min(k));
        Ok(())
    })
}

pub fn brute_force_dominates_sparse_vectors() -> Result<(), String> {
    let strategy = (2usize..=8).prop_flat_map(|p| (Just(p), 1..=3usize.min(p), 3usize..=20, any::<u64>()));
    check(strategy, |(p, k, n, seed)| {
        let x = random_data(n, p, seed);
        let src = CovarianceSource::from_data(&x, Cov::Precomputed, false);
        let sigma = sample_covariance(&x);
        let best = brute_force_sparse_pc(&src, k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 77);
        for _ in 0..20 {
            let idx = rand::seq::index::sample(&mut rng, p, k).into_vec();
            let mut u = DVector::zeros(p);
            for j in idx {
                u[j] = rng.sample::<f64, _>(StandardNormal);
            }
            if u.norm() == 0.0 {
                continue;
            }
            u /= u.norm();
            let value = u.dot(&(sigma.as_matrix() * &u));
            prop_assert!(value <= best.value + 1e-10, "{value} > {}", best.value);
        }
        Ok(())
    })
}

pub fn var_curve_is_nondecreasing() -> Result<(), String> {
    check(fit_case(), |c| {
        let x = random_data(c.n, c.p, c.seed);
        let mut cfg = c.cfg.clone();
        cfg.components = 1;
        let est = fit(&x, &cfg).unwrap();
        let src = CovarianceSource::from_data(&x, Cov::Precomputed, false);
        let grid: Vec<usize> = (1..=c.p).collect();
        let curve = var_curve(&est.scores, &src, &grid).unwrap();
        for w in curve.supports.windows(2) {
            prop_assert!(w[0].iter().all(|j| w[1].contains(j)));
        }
        for w in curve.values.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-10, "{} < {}", w[1], w[0]);
        }
        Ok(())
    })
}

// ------------------------------------------------------------ models

fn model_spec() -> impl Strategy<Value = ModelSpec> {
    prop_oneof![
        (1usize..=60)
            .prop_flat_map(|p| (Just(p), 1..=p, 0.0f64..50.0, any::<bool>()))
            .prop_map(|(p, k, theta, linear)| ModelSpec::SingleSpike {
                p,
                k,
                theta,
                profile: if linear { Profile::Linear } else { Profile::Homogeneous },
            }),
        (1usize..=10).prop_flat_map(|k| (2 * k..=60, Just(k))).prop_map(|(p, k)| ModelSpec::Sigma1 { p, k }),
        (1usize..=10).prop_flat_map(|k| (4 * k..=60, Just(k))).prop_map(|(p, k)| ModelSpec::Sigma2 { p, k }),
        (4usize..=40, 1usize..=4, any::<u64>()).prop_map(|(p, m, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // disjoint supports give orthogonal spikes
            let mut order: Vec<usize> = (0..p).collect();
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
            let per = p / m;
            let supports: Vec<Vec<usize>> = (0..m)
                .map(|r| order[r * per..r * per + rng.random_range(1..=per)].to_vec())
                .collect();
            let mut thetas: Vec<f64> = supports.iter().map(|_| rng.random_range(0.1..30.0)).collect();
            thetas.sort_by(|a, b| b.total_cmp(a));
            let signs = supports
                .iter()
                .map(|s| s.iter().map(|_| if rng.random() { 1.0 } else { -1.0 }).collect())
                .collect();
            ModelSpec::MultiSpike {
                p,
                supports,
                thetas,
                signs: Some(signs),
                relaxed: false,
            }
        }),
        Just(ModelSpec::Intro),
        any::<bool>().prop_map(|overlapping| ModelSpec::TwoSpikeComparison { overlapping }),
        Just(ModelSpec::BTradeoff),
    ]
}

pub fn models_are_psd() -> Result<(), String> {
    check(model_spec(), |spec| {
        let model = spec.build().map_err(|e| fail(e.to_string()))?;
        let sigma = model.covariance();
        let m = sigma.as_matrix();
        prop_assert!(max_abs(&(m - m.transpose())) == 0.0);
        let smallest = *eigenvalues_desc(&sigma).unwrap().last().unwrap();
        prop_assert!(smallest >= -1e-8);
        Ok(())
    })
}

pub fn model_components_are_orthonormal() -> Result<(), String> {
    check(model_spec(), |spec| {
        let model = spec.build().map_err(|e| fail(e.to_string()))?;
        let v = model.truth();
        for r in 0..v.ncols() {
            prop_assert!((v.column(r).norm() - 1.0).abs() <= 1e-12);
        }
        if !model.is_relaxed() {
            prop_assert!(orthonormality_error(&v) <= 1e-12);
        }
        Ok(())
    })
}

pub fn sampling_converges() -> Result<(), String> {
    let strategy = (2usize..=6).prop_flat_map(|p| (Just(p), 1..=p, 0.0f64..10.0, any::<u64>()));
    check(strategy, |(p, k, theta, seed)| {
        let model = spcavrp::model::make_single_spike(p, k, theta, Profile::Homogeneous).unwrap();
        let sigma = model.covariance();
        let n = 10_000;
        let s = sample_covariance(&sample_gaussian(&model, n, seed).unwrap());
        let maxdiag = sigma.diagonal().into_iter().fold(0.0, f64::max);
        let bound = 5.0 * (maxdiag * maxdiag * (p as f64).ln() / n as f64).sqrt();
        let err = max_abs(&(s.as_matrix() - sigma.as_matrix()));
        prop_assert!(err < bound, "error {err} above {bound}");
        Ok(())
    })
}

// ------------------------------------------------------------ baselines

pub fn threshold_support_has_k_entries() -> Result<(), String> {
    let strategy = data_params().prop_flat_map(|(n, p, seed)| (Just(n), Just(p), Just(seed), 1..=p, 1usize..=3));
    check(strategy, |(n, p, seed, k, m)| {
        let m = m.min(k);
        let src = CovarianceSource::from_data(&random_data(n, p, seed), Cov::Precomputed, false);
        let (support, frame) = diagonal_threshold(&src, k, m).unwrap();
        prop_assert_eq!(support.len(), k);
        prop_assert!(support.windows(2).all(|w| w[0] < w[1]));
        let v = frame.as_matrix();
        for j in 0..p {
            if !support.contains(&j) {
                prop_assert!(v.row(j).iter().all(|&x| x == 0.0));
            }
        }
        Ok(())
    })
}

pub fn projections_beat_thresholding_without_spiked_structure() -> Result<(), String> {
    check(any::<u64>(), |seed| {
        let (p, k) = (200, 10);
        let model = make_sigma2(p, k).unwrap();
        let truth: Vec<usize> = (0..k).collect();
        let x = sample_gaussian(&model, 1000, seed).unwrap();
        let est = fit(&x, &SpcavrpConfig::new(100, 30, k).with_seed(seed)).unwrap();
        let src = CovarianceSource::from_data(&x, Cov::Precomputed, false);
        let (dt, _) = diagonal_threshold(&src, k, 1).unwrap();
        let ours = support_metrics(&est.support, &truth).recovery_rate;
        let theirs = support_metrics(&dt, &truth).recovery_rate;
        prop_assert!(ours > theirs, "{ours} <= {theirs}");
        Ok(())
    })
}

// ------------------------------------------------------------ command line

pub fn run_cli(args: &[&str]) -> Result<(), cli::CliError> {
    let parsed = <Cli as clap::Parser>::try_parse_from(std::iter::once("spcavrp").chain(args.iter().copied()))
        .map_err(|e| cli::CliError { code: 3, message: e.to_string() })?;
    cli::run(parsed.command)
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn commands_are_reproducible() -> Result<(), String> {
    let strategy = (5usize..=20).prop_flat_map(|p| (Just(p), 1..=p.min(5), 10usize..=40, any::<u64>()));
    check(strategy, |(p, k, n, seed)| {
        let dir = tempfile::tempdir().unwrap();
        let read = |name: &str| std::fs::read(dir.path().join(name)).unwrap();
        let (ps, ks, ns, ss) = (p.to_string(), k.to_string(), n.to_string(), seed.to_string());
        for out in ["a.csv", "b.csv"] {
            let path = dir.path().join(out);
            run_cli(&["simulate", "--model", "single-spike", "--p", &ps, "--k", &ks, "--theta", "3", "--n", &ns, "--seed", &ss, "--output", path_str(&path)])
                .map_err(|e| fail(e.message))?;
        }
        prop_assert_eq!(read("a.csv"), read("b.csv"));
        prop_assert_eq!(read("a.csv.truth.json"), read("b.csv.truth.json"));
        let input = dir.path().join("a.csv");
        for out in ["a.json", "b.json"] {
            let path = dir.path().join(out);
            run_cli(&["fit", "--input", path_str(&input), "--output", path_str(&path), "--A", "8", "--B", "3", "--l", &ks, "--seed", &ss])
                .map_err(|e| fail(e.message))?;
        }
        prop_assert_eq!(read("a.json"), read("b.json"));
        Ok(())
    })
}

pub fn benchmark_ignores_thread_count() -> Result<(), String> {
    let strategy = (6usize..=20).prop_flat_map(|p| (Just(p), 1..=p.min(4), 1usize..=3, any::<u64>()));
    check(strategy, |(p, k, reps, seed)| {
        let spec: ExperimentSpec = serde_json::from_value(serde_json::json!({
            "model_id": "prop",
            "model": {"kind": "single-spike", "p": p, "k": k, "theta": 2.0},
            "n_grid": [10, 25],
            "reps": reps,
            "seed": seed,
            "estimators": [
                {"id": "rp", "kind": "rp", "A": 6, "B": 3, "l": k},
                {"id": "dt", "kind": "diagonal-threshold", "k": k}
            ]
        }))
        .unwrap();
        let one = with_pool(1, || cli::run_benchmark(&spec, false).unwrap());
        let four = with_pool(4, || cli::run_benchmark(&spec, false).unwrap());
        prop_assert_eq!(one, four);
        Ok(())
    })
}

pub fn csv_round_trip_is_exact() -> Result<(), String> {
    let strategy = (1usize..=15, 1usize..=30, any::<u64>(), -300i32..300);
    check(strategy, |(p, n, seed, exponent)| {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let x = random_data(n, p, seed);
        let scaled = DataMatrix::new(x.as_matrix() * 10f64.powi(exponent)).unwrap();
        cli::write_data_csv(&path, &scaled).unwrap();
        let back = cli::read_data_csv(&path, false).unwrap();
        for (a, b) in back.as_matrix().iter().zip(scaled.as_matrix().iter()) {
            prop_assert!((a - b).abs() <= 1e-15 * b.abs(), "{a} vs {b}");
        }
        Ok(())
    })
}

pub const INVARIANTS: &[Invariant] = &[
    ("eigen_reconstruction", eigen_reconstruction),
    ("complement_annihilates", complement_annihilates),
    ("sines_symmetric_and_rotation_invariant", sines_symmetric_and_rotation_invariant),
    ("eig_top_is_deterministic", eig_top_is_deterministic),
    ("projections_are_valid", projections_are_valid),
    ("grid_is_pure", grid_is_pure),
    ("enumeration_is_complete", enumeration_is_complete),
    ("sample_covariance_is_psd", sample_covariance_is_psd),
    ("projected_covariance_matches_submatrix", projected_covariance_matches_submatrix),
    ("centering_matches_definition", centering_matches_definition),
    ("estimate_support_and_orthonormality", estimate_support_and_orthonormality),
    ("estimate_is_deterministic", estimate_is_deterministic),
    ("exhaustive_matches_brute_force", exhaustive_matches_brute_force),
    ("exhaustive_is_permutation_equivariant", exhaustive_is_permutation_equivariant),
    ("larger_groups_select_larger_sums", larger_groups_select_larger_sums),
    ("deflation_is_orthogonal", deflation_is_orthogonal),
    ("deflation_components_are_sparse_units", deflation_components_are_sparse_units),
    ("deflation_is_deterministic", deflation_is_deterministic),
    ("loss_properties", loss_properties),
    ("hypergeom_matches_enumeration", hypergeom_matches_enumeration),
    ("choose_b_is_monotone", choose_b_is_monotone),
    ("brute_force_dominates_sparse_vectors", brute_force_dominates_sparse_vectors),
    ("var_curve_is_nondecreasing", var_curve_is_nondecreasing),
    ("models_are_psd", models_are_psd),
    ("model_components_are_orthonormal", model_components_are_orthonormal),
    ("sampling_converges", sampling_converges),
    ("threshold_support_has_k_entries", threshold_support_has_k_entries),
    ("projections_beat_thresholding_without_spiked_structure", projections_beat_thresholding_without_spiked_structure),
    ("commands_are_reproducible", commands_are_reproducible),
    ("benchmark_ignores_thread_count", benchmark_ignores_thread_count),
    ("csv_round_trip_is_exact", csv_round_trip_is_exact),
];
