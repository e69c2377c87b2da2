//! Dense symmetric eigendecomposition, orthogonal-complement projectors and
//! principal angles.
//!
//! Every eigenvector returned from this module follows one sign convention:
//! the component of largest absolute value is positive, with ties resolved in
//! favour of the smallest index. This makes all downstream estimators
//! bit-for-bit reproducible.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};

/// Max-|entry| at or below which a matrix is treated as the zero matrix.
pub const ZERO_TOL: f64 = 1e-12;
/// Residual threshold used by the rank-revealing orthonormalisation.
pub const PIVOT_TOL: f64 = 1e-10;
/// Tolerance on `|U^T U - I|_max` for an [`OrthonormalFrame`].
pub const ORTHO_TOL: f64 = 1e-10;

/// A real symmetric matrix. Writes always go to both `(i, j)` and `(j, i)`,
/// so the stored entries are exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    data: DMatrix<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix dimension must be positive");
        Self {
            data: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix dimension must be positive");
        Self {
            data: DMatrix::identity(dim, dim),
        }
    }

    /// Builds a matrix by evaluating `f(i, j)` on the upper triangle (`i <= j`).
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(dim);
        for j in 0..dim {
            for i in 0..=j {
                out.set(i, j, f(i, j));
            }
        }
        out
    }

    /// Takes the upper triangle of a square matrix and mirrors it.
    pub fn from_upper(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(invalid(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self::from_upper_fn(m.nrows(), |i, j| m[(i, j)]))
    }

    /// Accepts a square matrix whose asymmetry is at most `tol` (max-entry),
    /// keeping its upper triangle.
    pub fn from_full(m: &DMatrix<f64>, tol: f64) -> Result<Self> {
        let out = Self::from_upper(m)?;
        let asym = (m - m.transpose()).amax();
        if !(asym <= tol) {
            return Err(invalid(format!("matrix is not symmetric (asymmetry {asym:e})")));
        }
        Ok(out)
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut out = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            out.set(i, i, v);
        }
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[(i, j)] = value;
        self.data[(j, i)] = value;
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.data[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.data.trace()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// The principal submatrix on the given (ambient) indices.
    pub fn principal_submatrix(&self, indices: &[usize]) -> SymMatrix {
        let d = indices.len();
        let mut data = DMatrix::zeros(d, d);
        for (c, &jc) in indices.iter().enumerate() {
            for (r, &ir) in indices.iter().enumerate() {
                data[(r, c)] = self.data[(ir, jc)];
            }
        }
        SymMatrix { data }
    }

    /// `A M A` for a symmetric `A`, symmetrised.
    pub fn congruence(&self, a: &SymMatrix) -> SymMatrix {
        let prod = a.as_matrix() * self.as_matrix() * a.as_matrix();
        SymMatrix::from_upper_fn(self.dim(), |i, j| 0.5 * (prod[(i, j)] + prod[(j, i)]))
    }
}

/// Leading eigenpairs of a symmetric matrix, eigenvalues nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    /// `dim x r`, orthonormal columns.
    pub vectors: DMatrix<f64>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, r: usize) -> DVector<f64> {
        self.vectors.column(r).into_owned()
    }
}

/// A `p x m` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalFrame {
    data: DMatrix<f64>,
}

impl OrthonormalFrame {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(data, ORTHO_TOL)
    }

    pub fn with_tolerance(data: DMatrix<f64>, tol: f64) -> Result<Self> {
        if data.ncols() == 0 || data.ncols() > data.nrows() {
            return Err(invalid(format!(
                "frame must be p x m with 1 <= m <= p, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(invalid("frame has non-finite entries"));
        }
        let gram = data.transpose() * &data;
        let dev = (gram - DMatrix::identity(data.ncols(), data.ncols())).amax();
        if !(dev <= tol) {
            return Err(invalid(format!("columns are not orthonormal (deviation {dev:e})")));
        }
        Ok(Self { data })
    }

    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.data.column(j).into_owned()
    }
}

/// Flips `v` so that its largest-|.| entry (smallest index on ties) is positive.
pub fn apply_sign_convention(v: &mut [f64]) {
    let mut best = 0;
    let mut best_abs = f64::NEG_INFINITY;
    for (i, x) in v.iter().enumerate() {
        let a = x.abs();
        if a > best_abs {
            best_abs = a;
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn check_finite(m: &SymMatrix) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(invalid("matrix has non-finite entries"))
    }
}

/// Ordering of eigenvalue indices: descending value, ties by index.
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// The `r` algebraically largest eigenpairs of `m`.
pub fn eig_top(m: &SymMatrix, r: usize) -> Result<EigenSystem> {
    let dim = m.dim();
    if r == 0 || r > dim {
        return Err(invalid(format!("requested {r} eigenpairs of a {dim}x{dim} matrix")));
    }
    check_finite(m)?;
    if dim == 1 {
        return Ok(EigenSystem {
            values: vec![m.get(0, 0)],
            vectors: DMatrix::from_element(1, 1, 1.0),
        });
    }
    let eig = SymmetricEigen::new(m.as_matrix().clone());
    let order = descending_order(eig.eigenvalues.as_slice());
    let mut vectors = DMatrix::zeros(dim, r);
    let mut values = Vec::with_capacity(r);
    for (c, &idx) in order.iter().take(r).enumerate() {
        values.push(eig.eigenvalues[idx]);
        let mut col: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        apply_sign_convention(&mut col);
        vectors.column_mut(c).copy_from_slice(&col);
    }
    Ok(EigenSystem { values, vectors })
}

/// All eigenvalues of `m`, nonincreasing. Cheaper than [`eig_top`] since no
/// eigenvectors are accumulated.
pub fn eigenvalues_desc(m: &SymMatrix) -> Result<Vec<f64>> {
    check_finite(m)?;
    if m.dim() == 1 {
        return Ok(vec![m.get(0, 0)]);
    }
    let mut values: Vec<f64> = m.as_matrix().clone().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// Leading eigenvalue and eigenvector.
pub fn leading_eigenpair(m: &SymMatrix) -> Result<(f64, DVector<f64>)> {
    let sys = eig_top(m, 1)?;
    Ok((sys.values[0], sys.vector(0)))
}

/// Orthonormal basis of the column space of `v` by modified Gram-Schmidt
/// with one reorthogonalisation pass. A column whose residual falls to
/// `PIVOT_TOL` (relative to its own norm) is dependent: with `strict` this is
/// an error, otherwise the column is dropped.
fn orthonormal_basis(v: &DMatrix<f64>, strict: bool) -> Result<DMatrix<f64>> {
    let p = v.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(v.ncols());
    for j in 0..v.ncols() {
        let original = v.column(j).into_owned();
        let scale = original.norm();
        if scale <= ZERO_TOL {
            if strict {
                return Err(Error::RankDeficient { column: j });
            }
            continue;
        }
        let mut w = original;
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let norm = w.norm();
        if norm <= PIVOT_TOL * scale {
            if strict {
                return Err(Error::RankDeficient { column: j });
            }
            continue;
        }
        basis.push(w / norm);
    }
    let mut out = DMatrix::zeros(p, basis.len());
    for (j, q) in basis.iter().enumerate() {
        out.set_column(j, q);
    }
    Ok(out)
}

fn complement_from_basis(p: usize, q: &DMatrix<f64>) -> SymMatrix {
    let qqt = q * q.transpose();
    SymMatrix::from_upper_fn(p, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - qqt[(i, j)]
    })
}

/// `I_p - V (V^T V)^{-1} V^T`, or `I_p` when `V` is (numerically) zero.
///
/// A nonzero but column-rank-deficient `V` is rejected.
pub fn proj_orth_complement(v: &DMatrix<f64>) -> Result<SymMatrix> {
    let p = v.nrows();
    if p == 0 {
        return Err(invalid("projector of an empty matrix"));
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(invalid("matrix has non-finite entries"));
    }
    if v.ncols() == 0 || v.amax() <= ZERO_TOL {
        return Ok(SymMatrix::identity(p));
    }
    let q = orthonormal_basis(v, true)?;
    Ok(complement_from_basis(p, &q))
}

/// Projector onto the orthogonal complement of the column span of `v`,
/// dropping zero and dependent columns instead of failing.
pub fn proj_orth_complement_span(v: &DMatrix<f64>) -> SymMatrix {
    let p = v.nrows();
    match orthonormal_basis(v, false) {
        Ok(q) if q.ncols() > 0 => complement_from_basis(p, &q),
        _ => SymMatrix::identity(p),
    }
}

/// Sines of the principal angles between the column spaces of `u` and `v`,
/// nondecreasing (the order of nonincreasing cosines).
///
/// Computed as the singular values of `(I - V V^T) U`, which equal
/// `sqrt(1 - sigma_j^2)` for the singular values `sigma_j` of `U^T V` but keep
/// full relative accuracy for small angles.
pub fn principal_angle_sines(u: &OrthonormalFrame, v: &OrthonormalFrame) -> Result<Vec<f64>> {
    if u.rows() != v.rows() || u.cols() != v.cols() {
        return Err(invalid(format!(
            "frame shapes differ: {}x{} vs {}x{}",
            u.rows(),
            u.cols(),
            v.rows(),
            v.cols()
        )));
    }
    let (um, vm) = (u.as_matrix(), v.as_matrix());
    let residual = um - vm * (vm.transpose() * um);
    let mut sines: Vec<f64> = if residual.ncols() == 1 {
        vec![residual.norm()]
    } else {
        residual
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect()
    };
    for s in &mut sines {
        *s = s.clamp(0.0, 1.0);
    }
    sines.sort_by(|a, b| a.total_cmp(b));
    Ok(sines)
}
