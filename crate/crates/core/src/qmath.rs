//! Dense complex linear algebra for the small registers this simulator uses.
//!
//! Everything is stored densely and row-major. The largest space the protocol
//! touches is 144-dimensional, so no sparse paths exist.
//!
//! Basis ordering is z-computational with `|+⟩` at index 0 and `|−⟩` at
//! index 1. Multi-register indices follow Kronecker order: the first factor is
//! the most significant digit.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use thiserror::Error;

/// Tolerance for algebraic identities (normalization, unitarity, hermiticity).
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Tolerance on the smallest eigenvalue of a density matrix.
pub const EIGEN_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QmathError {
    #[error("empty operand")]
    Empty,
    #[error("vector is not normalized (norm² = {0})")]
    Normalization(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("layout error: {0}")]
    Layout(String),
    #[error("not a density matrix: {0}")]
    NotDensity(String),
}

pub type Result<T> = std::result::Result<T, QmathError>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// A complex column vector.
#[derive(Clone, PartialEq)]
pub struct CVector {
    entries: Vec<C64>,
}

impl fmt::Debug for CVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.iter()).finish()
    }
}

impl CVector {
    pub fn new(entries: Vec<C64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(QmathError::Empty);
        }
        Ok(Self { entries })
    }

    pub fn from_real(entries: &[f64]) -> Result<Self> {
        Self::new(entries.iter().map(|&x| re(x)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "zero-dimensional vector");
        Self { entries: vec![C64::new(0.0, 0.0); dim] }
    }

    /// Computational basis vector `e_k` of dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.entries[k] = re(1.0);
        v
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [C64] {
        &mut self.entries
    }

    pub fn into_entries(self) -> Vec<C64> {
        self.entries
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &CVector) -> C64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.entries.iter().zip(&other.entries).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= ALGEBRA_TOL
    }

    pub fn ensure_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(QmathError::Normalization(self.norm_sqr()))
        }
    }

    /// Returns `self / ‖self‖`; `None` for the zero vector.
    pub fn normalized(&self) -> Option<CVector> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return None;
        }
        Some(self.scale(re(1.0 / n)))
    }

    pub fn scale(&self, k: C64) -> CVector {
        CVector { entries: self.entries.iter().map(|z| z * k).collect() }
    }

    pub fn max_abs_diff(&self, other: &CVector) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// `|self⟩⟨other|`.
    pub fn outer(&self, other: &CVector) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim(), other.dim());
        for (i, a) in self.entries.iter().enumerate() {
            for (j, b) in other.entries.iter().enumerate() {
                m[(i, j)] = a * b.conj();
            }
        }
        m
    }
}

impl Index<usize> for CVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.entries[i]
    }
}

impl IndexMut<usize> for CVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.entries[i]
    }
}

/// A dense complex matrix in row-major order.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", &self.entries[r * self.cols..(r + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(QmathError::Empty);
        }
        if entries.len() != rows * cols {
            return Err(QmathError::DimensionMismatch { expected: rows * cols, got: entries.len() });
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::new(rows, cols, entries.iter().map(|&x| re(x)).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        Self { rows, cols, entries: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = re(1.0);
        }
        m
    }

    pub fn diag(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn dagger(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                m[(c, r)] = self[(r, c)].conj();
            }
        }
        m
    }

    pub fn scale(&self, k: C64) -> CMatrix {
        CMatrix { rows: self.rows, cols: self.cols, entries: self.entries.iter().map(|z| z * k).collect() }
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        assert_eq!(self.cols, v.dim(), "matrix-vector dimension mismatch");
        let entries = (0..self.rows)
            .map(|r| self.entries[r * self.cols..(r + 1) * self.cols].iter().zip(v.entries()).map(|(a, b)| a * b).sum())
            .collect();
        CVector { entries }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.max_abs_diff(&self.dagger()) <= tol
    }

    pub fn is_unitary(&self) -> bool {
        self.is_square() && (&self.dagger() * self).max_abs_diff(&CMatrix::identity(self.rows)) <= ALGEBRA_TOL
    }

    /// Eigenvalues of a Hermitian matrix, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        assert!(self.is_square());
        let m = DMatrix::from_row_slice(self.rows, self.cols, &self.entries);
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Checks the density-matrix contract: Hermitian, unit trace, PSD.
    pub fn check_density(&self) -> Result<()> {
        if !self.is_square() {
            return Err(QmathError::NotDensity(format!("not square ({}x{})", self.rows, self.cols)));
        }
        let herm = self.max_abs_diff(&self.dagger());
        if herm > ALGEBRA_TOL {
            return Err(QmathError::NotDensity(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = self.trace();
        if (tr - re(1.0)).norm() > ALGEBRA_TOL {
            return Err(QmathError::NotDensity(format!("trace {tr} ≠ 1")));
        }
        let min = self.hermitian_eigenvalues()[0];
        if min < -EIGEN_TOL {
            return Err(QmathError::NotDensity(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.entries[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.entries[r * self.cols + c]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.entries[i * rhs.cols + j] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

/// Kronecker (tensor) product.
pub trait Kron<Rhs = Self> {
    type Output;
    fn kron(&self, rhs: &Rhs) -> Self::Output;
}

impl Kron for CVector {
    type Output = CVector;
    fn kron(&self, rhs: &CVector) -> CVector {
        let entries = self.entries.iter().flat_map(|a| rhs.entries.iter().map(move |b| a * b)).collect();
        CVector { entries }
    }
}

impl Kron for CMatrix {
    type Output = CMatrix;
    fn kron(&self, rhs: &CMatrix) -> CMatrix {
        let rows = self.rows * rhs.rows;
        let cols = self.cols * rhs.cols;
        let mut out = CMatrix::zeros(rows, cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                for k in 0..rhs.rows {
                    for l in 0..rhs.cols {
                        out[(i * rhs.rows + k, j * rhs.cols + l)] = a * rhs[(k, l)];
                    }
                }
            }
        }
        out
    }
}

pub fn kron<T: Kron<Output = T>>(a: &T, b: &T) -> T {
    a.kron(b)
}

/// `|v⟩⟨v|` for a normalized `v`.
pub fn projector(v: &CVector) -> Result<CMatrix> {
    v.ensure_normalized()?;
    Ok(v.outer(v))
}

/// `Tr(ρ²)`.
pub fn purity(rho: &CMatrix) -> Result<f64> {
    rho.check_density()?;
    // Hermitian: Tr(ρ²) = Σ |ρ_ij|²
    Ok(rho.entries.iter().map(|z| z.norm_sqr()).sum())
}

/// `Tr(ρ O)`.
pub fn expectation(rho: &CMatrix, op: &CMatrix) -> C64 {
    (rho * op).trace()
}

/// Traces out every factor of `layout` not listed in `keep`.
///
/// The kept factors appear in the result in layout order, whatever the order
/// of `keep`.
pub fn partial_trace(rho: &CMatrix, layout: &[usize], keep: &[usize]) -> Result<CMatrix> {
    let total: usize = layout.iter().product();
    if layout.is_empty() || layout.contains(&0) {
        return Err(QmathError::Layout("layout must list positive dimensions".into()));
    }
    if !rho.is_square() || rho.rows != total {
        return Err(QmathError::Layout(format!(
            "matrix is {}x{}, layout {:?} implies {total}",
            rho.rows, rho.cols, layout
        )));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.is_empty() || kept.iter().any(|&k| k >= layout.len()) {
        return Err(QmathError::Layout(format!("invalid keep set {keep:?} for {} factors", layout.len())));
    }
    let traced: Vec<usize> = (0..layout.len()).filter(|k| !kept.contains(k)).collect();

    let strides = strides(layout);
    let kept_dims: Vec<usize> = kept.iter().map(|&k| layout[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| layout[k]).collect();
    let kept_total: usize = kept_dims.iter().product();
    let traced_total: usize = traced_dims.iter().product();

    let offset = |factors: &[usize], dims: &[usize], mut idx: usize| -> usize {
        let mut off = 0;
        for (f, d) in factors.iter().zip(dims).rev() {
            off += (idx % d) * strides[*f];
            idx /= d;
        }
        off
    };

    let kept_off: Vec<usize> = (0..kept_total).map(|i| offset(&kept, &kept_dims, i)).collect();
    let traced_off: Vec<usize> = (0..traced_total).map(|i| offset(&traced, &traced_dims, i)).collect();

    let mut out = CMatrix::zeros(kept_total, kept_total);
    for (a, oa) in kept_off.iter().enumerate() {
        for (b, ob) in kept_off.iter().enumerate() {
            out[(a, b)] = traced_off.iter().map(|t| rho[(oa + t, ob + t)]).sum();
        }
    }
    Ok(out)
}

/// Reduced density matrix of the pure (possibly unnormalized) state `psi`,
/// i.e. `partial_trace(|ψ⟩⟨ψ|, layout, keep)` without forming the full
/// outer product.
pub fn partial_trace_pure(psi: &CVector, layout: &[usize], keep: &[usize]) -> Result<CMatrix> {
    let total: usize = layout.iter().product();
    if layout.is_empty() || layout.contains(&0) {
        return Err(QmathError::Layout("layout must list positive dimensions".into()));
    }
    if psi.dim() != total {
        return Err(QmathError::Layout(format!("vector has dim {}, layout {:?} implies {total}", psi.dim(), layout)));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.is_empty() || kept.iter().any(|&k| k >= layout.len()) {
        return Err(QmathError::Layout(format!("invalid keep set {keep:?} for {} factors", layout.len())));
    }
    let st = strides(layout);
    let kept_dims: Vec<usize> = kept.iter().map(|&k| layout[k]).collect();
    let kept_total: usize = kept_dims.iter().product();
    let kept_strides = strides(&kept_dims);

    // Map every full index to (kept index, traced index).
    let mut by_traced: Vec<Vec<(usize, C64)>> = Vec::new();
    let mut traced_key = std::collections::HashMap::new();
    for (i, amp) in psi.entries().iter().enumerate() {
        if *amp == C64::new(0.0, 0.0) {
            continue;
        }
        let mut k_idx = 0;
        let mut t_key = i;
        for (slot, &f) in kept.iter().enumerate() {
            let digit = (i / st[f]) % layout[f];
            k_idx += digit * kept_strides[slot];
            t_key -= digit * st[f];
        }
        let bucket = *traced_key.entry(t_key).or_insert_with(|| {
            by_traced.push(Vec::new());
            by_traced.len() - 1
        });
        by_traced[bucket].push((k_idx, *amp));
    }
    let mut out = CMatrix::zeros(kept_total, kept_total);
    for bucket in &by_traced {
        for &(a, za) in bucket {
            for &(b, zb) in bucket {
                out[(a, b)] += za * zb.conj();
            }
        }
    }
    Ok(out)
}

/// Row-major strides for a Kronecker layout.
pub fn strides(layout: &[usize]) -> Vec<usize> {
    let mut s = vec![1; layout.len()];
    for k in (0..layout.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * layout[k + 1];
    }
    s
}

// Standard kets and operators.

pub fn ket_plus() -> CVector {
    CVector::basis(2, 0)
}

pub fn ket_minus() -> CVector {
    CVector::basis(2, 1)
}

/// `|±x⟩ = (|+⟩ ± |−⟩)/√2`.
pub fn ket_x(sign: i8) -> CVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CVector { entries: vec![re(h), re(f64::from(sign.signum()) * h)] }
}

/// `|+θ⟩ = cos(θ/2)|+⟩ + sin(θ/2)|−⟩`, the positive eigenvector of `σ_θ`.
pub fn ket_theta(theta: f64) -> CVector {
    let (s, c) = (theta / 2.0).sin_cos();
    CVector { entries: vec![re(c), re(s)] }
}

/// `|−θ⟩ = −sin(θ/2)|+⟩ + cos(θ/2)|−⟩`, the negative eigenvector of `σ_θ`.
pub fn ket_theta_minus(theta: f64) -> CVector {
    let (s, c) = (theta / 2.0).sin_cos();
    CVector { entries: vec![re(-s), re(c)] }
}

/// Orthonormal eigenbasis `[|+θ⟩, |−θ⟩]` of `σ_θ`.
pub fn theta_basis(theta: f64) -> Vec<CVector> {
    vec![ket_theta(theta), ket_theta_minus(theta)]
}

pub fn z_basis() -> Vec<CVector> {
    vec![ket_plus(), ket_minus()]
}

pub fn x_basis() -> Vec<CVector> {
    vec![ket_x(1), ket_x(-1)]
}

pub fn sigma_z() -> CMatrix {
    CMatrix::diag(&[re(1.0), re(-1.0)])
}

pub fn sigma_x() -> CMatrix {
    CMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).expect("2x2")
}

/// `σ_θ = cos θ σ_z + sin θ σ_x` (direction in the xz plane at angle θ from z).
pub fn sigma_theta(theta: f64) -> CMatrix {
    let (s, c) = theta.sin_cos();
    CMatrix::from_real(2, 2, &[c, s, s, -c]).expect("2x2")
}
