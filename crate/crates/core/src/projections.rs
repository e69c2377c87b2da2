//! Axis-aligned projections: sampling, grids of `A x B` projections with
//! per-cell substreams, and exhaustive enumeration.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::rng::{substream, DOMAIN_PROJECTION};

/// Default cap on the number of subsets [`enumerate_all`] will produce.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// A coordinate subset `S` of `[p]`, stored sorted. Represents the diagonal
/// 0/1 projection `P_S`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AxisProjection {
    indices: Vec<usize>,
    p: usize,
}

impl AxisProjection {
    pub fn new(mut indices: Vec<usize>, p: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(invalid("projection must select at least one coordinate"));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("projection indices must be distinct"));
        }
        if let Some(&last) = indices.last() {
            if last >= p {
                return Err(invalid(format!("projection index {last} out of range for p={p}")));
            }
        }
        Ok(Self { indices, p })
    }

    /// The identity projection `{0, ..., p-1}`.
    pub fn full(p: usize) -> Self {
        Self {
            indices: (0..p).collect(),
            p,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn d(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }
}

/// Reusable state for partial Fisher-Yates shuffles of `0..p`. Swaps are
/// undone after each draw so the buffer is always the identity permutation
/// between draws.
pub(crate) struct SubsetSampler {
    perm: Vec<usize>,
    swaps: Vec<usize>,
}

impl SubsetSampler {
    pub(crate) fn new(p: usize) -> Self {
        Self {
            perm: (0..p).collect(),
            swaps: Vec::new(),
        }
    }

    /// Draws a uniform `d`-subset, sorted ascending.
    pub(crate) fn draw<R: Rng + ?Sized>(&mut self, d: usize, rng: &mut R) -> Vec<usize> {
        let p = self.perm.len();
        debug_assert!(d <= p);
        self.swaps.clear();
        for i in 0..d {
            let j = rng.random_range(i..p);
            self.perm.swap(i, j);
            self.swaps.push(j);
        }
        let mut out = self.perm[..d].to_vec();
        for (i, &j) in self.swaps.iter().enumerate().rev() {
            self.perm.swap(i, j);
        }
        out.sort_unstable();
        out
    }
}

fn check_dims(p: usize, d: usize) -> Result<()> {
    if d == 0 || d > p {
        return Err(invalid(format!("projection dimension d={d} must lie in 1..={p}")));
    }
    Ok(())
}

/// A uniformly random `d`-subset of `[p]`.
pub fn sample_projection<R: Rng + ?Sized>(p: usize, d: usize, rng: &mut R) -> Result<AxisProjection> {
    check_dims(p, d)?;
    let indices = SubsetSampler::new(p).draw(d, rng);
    Ok(AxisProjection { indices, p })
}

/// The projection for cell `(a, b)`, drawn from its own substream.
pub(crate) fn cell_projection(
    sampler: &mut SubsetSampler,
    d: usize,
    master_seed: u64,
    a: usize,
    b: usize,
) -> AxisProjection {
    let mut rng = substream(master_seed, &[DOMAIN_PROJECTION, a as u64, b as u64]);
    let indices = sampler.draw(d, &mut rng);
    AxisProjection {
        indices,
        p: sampler.perm.len(),
    }
}

/// `A` groups of `B` projections each.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionGrid {
    groups: usize,
    group_size: usize,
    cells: Vec<AxisProjection>,
}

impl ProjectionGrid {
    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn cell(&self, a: usize, b: usize) -> &AxisProjection {
        &self.cells[a * self.group_size + b]
    }

    pub fn group(&self, a: usize) -> &[AxisProjection] {
        &self.cells[a * self.group_size..(a + 1) * self.group_size]
    }

    pub fn cells(&self) -> &[AxisProjection] {
        &self.cells
    }
}

/// Samples the full grid. Cell `(a, b)` depends only on `(master_seed, a, b)`.
pub fn sample_grid(p: usize, d: usize, groups: usize, group_size: usize, master_seed: u64) -> Result<ProjectionGrid> {
    check_dims(p, d)?;
    if groups == 0 || group_size == 0 {
        return Err(invalid("grid needs A >= 1 and B >= 1"));
    }
    let cells: Vec<AxisProjection> = (0..groups)
        .into_par_iter()
        .flat_map_iter(|a| {
            let mut sampler = SubsetSampler::new(p);
            (0..group_size)
                .map(|b| cell_projection(&mut sampler, d, master_seed, a, b))
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(ProjectionGrid {
        groups,
        group_size,
        cells,
    })
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * num / den is an integer; cancel the common factor first
        let num = (n - i) as u128;
        let den = i as u128 + 1;
        let g = gcd(num, den);
        let (num, den) = (num / g, den / g);
        match (acc / den).checked_mul(num) {
            Some(v) => acc = v,
            None => return u128::MAX,
        }
    }
    acc
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Lexicographic iterator over the `d`-subsets of `[p]`.
#[derive(Debug, Clone)]
pub struct Combinations {
    p: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    pub fn new(p: usize, d: usize) -> Self {
        let current = if d >= 1 && d <= p { Some((0..d).collect()) } else { None };
        Self { p, current }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let d = out.len();
        let mut next = out.clone();
        let mut i = d;
        while i > 0 {
            i -= 1;
            if next[i] < self.p - d + i {
                next[i] += 1;
                for j in i + 1..d {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

/// All `C(p, d)` subsets in lexicographic order, refusing more than `cap`.
pub fn enumerate_all(p: usize, d: usize, cap: u128) -> Result<Vec<AxisProjection>> {
    check_dims(p, d)?;
    let count = binomial(p, d);
    if count > cap {
        return Err(Error::TooLarge { count, cap });
    }
    Ok(Combinations::new(p, d)
        .map(|indices| AxisProjection { indices, p })
        .collect())
}
