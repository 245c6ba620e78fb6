//! Dense complex linear algebra for the small dimensions used throughout the
//! crate (d ≤ 64): vectors, row-major matrices, unitaries, Gram–Schmidt with
//! basis completion, one-sided Jacobi SVD, Haar sampling and the matrix
//! exponential used by the unitary-group search.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance used to accept a matrix as unitary, `‖U†U − I‖_max`.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Default rank tolerance for [`gram_schmidt_extend`].
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// A vector of complex amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct CVector(Vec<C64>);

impl CVector {
    pub fn new(entries: Vec<C64>) -> Self {
        Self(entries)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![ZERO; dim])
    }

    /// The canonical basis vector `e_k` (0-based).
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[k] = ONE;
        v
    }

    pub fn from_reals(values: &[f64]) -> Self {
        Self(values.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[C64] {
        &self.0
    }

    pub fn entries_mut(&mut self) -> &mut [C64] {
        &mut self.0
    }

    pub fn into_entries(self) -> Vec<C64> {
        self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &Self) -> C64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self(self.0.iter().map(|z| z * factor).collect())
    }

    pub fn conj(&self) -> Self {
        Self(self.0.iter().map(|z| z.conj()).collect())
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(self.scale(C64::new(1.0 / n, 0.0)))
    }

    /// `self += factor · other`
    pub fn axpy(&mut self, factor: C64, other: &Self) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += factor * b;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(ONE, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-ONE, other);
        out
    }

    /// Tensor product, `self ⊗ other`, with `self` as the slow index.
    pub fn kron(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.0 {
            for b in &other.0 {
                out.push(a * b);
            }
        }
        Self(out)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Multiplies by the phase that makes the largest-modulus entry real and
    /// positive. Ties go to the lowest index.
    pub fn phase_normalized(&self) -> Self {
        let mut best = 0;
        for (k, z) in self.0.iter().enumerate() {
            if z.norm() > self.0[best].norm() * (1.0 + 1e-12) {
                best = k;
            }
        }
        let pivot = self.0.get(best).copied().unwrap_or(ZERO);
        if pivot.norm() == 0.0 {
            return self.clone();
        }
        self.scale(pivot.conj() / pivot.norm())
    }
}

impl Index<usize> for CVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for CVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.0[i]
    }
}

impl Serialize for CVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.0.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(Self(pairs.into_iter().map(|[re, im]| C64::new(re, im)).collect()))
    }
}

/// Row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: r,
            cols: c,
            data,
        })
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[CVector]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, CVector::dim);
        let mut m = Self::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            if c.dim() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    found: c.dim(),
                });
            }
            for i in 0..rows {
                m[(i, j)] = c[i];
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> CVector {
        CVector((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    pub fn columns(&self) -> Vec<CVector> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn row(&self, i: usize) -> CVector {
        CVector(self.data[i * self.cols..(i + 1) * self.cols].to_vec())
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `self · v`
    pub fn apply(&self, v: &CVector) -> CVector {
        assert_eq!(self.cols, v.dim(), "apply shape mismatch");
        CVector(
            (0..self.rows)
                .map(|i| {
                    self.data[i * self.cols..(i + 1) * self.cols]
                        .iter()
                        .zip(&v.0)
                        .map(|(a, b)| a * b)
                        .sum()
                })
                .collect(),
        )
    }

    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut out = Self::zeros(rows, cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out[(i * other.rows + k, j * other.cols + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖M†M − I‖_max`; only meaningful for square matrices.
    pub fn unitarity_defect(&self) -> f64 {
        let g = self.adjoint().matmul(self);
        g.max_abs_diff(&Self::identity(self.cols))
    }

    fn max_row_sum(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().map(|z| z.norm()).sum())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl fmt::Display for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.6}{:+.6}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Rows of `[re, im]` pairs.
impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<CVector> = (0..self.rows).map(|i| self.row(i)).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<CVector>::deserialize(d)?;
        let rows: Vec<Vec<C64>> = rows.into_iter().map(CVector::into_entries).collect();
        CMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// A square matrix with `‖U†U − I‖_max < UNITARITY_TOL`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Unitary(CMatrix);

impl Unitary {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, UNITARITY_TOL)
    }

    pub fn with_tolerance(matrix: CMatrix, tol: f64) -> Result<Self> {
        if matrix.rows != matrix.cols {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows,
                found: matrix.cols,
            });
        }
        let deviation = matrix.unitarity_defect();
        if !(deviation < tol) {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self(matrix))
    }

    pub fn identity(d: usize) -> Self {
        Self(CMatrix::identity(d))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        self.0.apply(v)
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// `self · other`
    pub fn compose(&self, other: &Self) -> Self {
        Self(self.0.matmul(&other.0))
    }

    pub fn scale_phase(&self, theta: f64) -> Self {
        Self(self.0.scale(C64::from_polar(1.0, theta)))
    }
}

impl<'de> Deserialize<'de> for Unitary {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = CMatrix::deserialize(d)?;
        Unitary::new(m).map_err(serde::de::Error::custom)
    }
}

/// Output of [`gram_schmidt_extend`].
#[derive(Clone, Debug)]
pub struct GramSchmidt {
    pub span: Vec<CVector>,
    pub rank: usize,
    pub completion: Vec<CVector>,
}

impl GramSchmidt {
    /// `span` followed by `completion`: an orthonormal basis of `C^d`.
    pub fn full_basis(&self) -> Vec<CVector> {
        self.span.iter().chain(&self.completion).cloned().collect()
    }
}

fn project_out(v: &CVector, basis: &[CVector]) -> CVector {
    let mut r = v.clone();
    // two passes keep the residual orthogonal to working precision
    for _ in 0..2 {
        for q in basis {
            let c = q.inner(&r);
            r.axpy(-c, q);
        }
    }
    r
}

/// Orthonormalizes `vectors` in order, dropping any vector whose residual
/// after projection is below `tol · (1 + ‖v‖)`, then completes the result to
/// an orthonormal basis of `C^d` with canonical basis vectors.
pub fn gram_schmidt_extend(vectors: &[CVector], d: usize, tol: f64) -> Result<GramSchmidt> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let mut span: Vec<CVector> = Vec::new();
    for v in vectors {
        if v.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.dim(),
            });
        }
        let r = project_out(v, &span);
        let rn = r.norm();
        if rn >= tol * (1.0 + v.norm()) {
            span.push(r.scale(C64::new(1.0 / rn, 0.0)));
        }
    }
    let rank = span.len();
    let completion = complete_basis(&span, d);
    Ok(GramSchmidt {
        span,
        rank,
        completion,
    })
}

/// Orthonormal vectors completing an orthonormal family to a basis of `C^d`.
/// Each step takes the canonical vector with the largest residual.
pub fn complete_basis(family: &[CVector], d: usize) -> Vec<CVector> {
    let mut all: Vec<CVector> = family.to_vec();
    let mut completion = Vec::new();
    while all.len() < d {
        let mut best: Option<(f64, CVector)> = None;
        for k in 0..d {
            let r = project_out(&CVector::basis(d, k), &all);
            let n = r.norm();
            if best.as_ref().is_none_or(|(bn, _)| n > *bn) {
                best = Some((n, r));
            }
        }
        let (n, r) = best.expect("d > 0");
        let q = r.scale(C64::new(1.0 / n, 0.0));
        all.push(q.clone());
        completion.push(q);
    }
    completion
}

/// `‖G − I‖_max` for the Gram matrix of `vectors`.
pub fn orthonormality_defect(vectors: &[CVector]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in vectors.iter().enumerate() {
        for (j, b) in vectors.iter().enumerate().skip(i) {
            let g = a.inner(b);
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((g - target).norm());
        }
    }
    worst
}

/// Standard complex Gaussian vector (entries `(x + iy)/√2`).
pub fn gaussian_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVector(
        (0..d)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                C64::new(re * s, im * s)
            })
            .collect(),
    )
}

/// Uniformly random unit vector in `C^d`.
pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    loop {
        if let Ok(v) = gaussian_vector(d, rng).normalized() {
            return v;
        }
    }
}

/// Haar-distributed unitary drawn from `rng`.
pub fn haar_unitary_from<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Unitary {
    let cols: Vec<CVector> = (0..d).map(|_| gaussian_vector(d, rng)).collect();
    // Gram–Schmidt yields the QR factor with a positive real R diagonal,
    // which is exactly the phase-corrected Q.
    let mut q: Vec<CVector> = Vec::with_capacity(d);
    for c in &cols {
        let r = project_out(c, &q);
        let n = r.norm();
        q.push(r.scale(C64::new(1.0 / n, 0.0)));
    }
    Unitary(CMatrix::from_columns(&q).expect("square"))
}

/// Deterministic Haar sample for a given seed.
pub fn haar_unitary(d: usize, seed: u64) -> Result<Unitary> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(haar_unitary_from(d, &mut rng))
}

/// Thin singular value decomposition `M = left · diag(singulars) · right†`.
#[derive(Clone, Debug)]
pub struct Svd {
    /// `rows × k` with orthonormal columns, `k = min(rows, cols)`.
    pub left: CMatrix,
    /// Descending, nonnegative.
    pub singulars: Vec<f64>,
    /// `cols × k` with orthonormal columns.
    pub right: CMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> CMatrix {
        let k = self.singulars.len();
        let mut scaled = self.left.clone();
        for i in 0..scaled.rows {
            for j in 0..k {
                scaled[(i, j)] *= self.singulars[j];
            }
        }
        scaled.matmul(&self.right.adjoint())
    }
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd_small(m: &CMatrix) -> Svd {
    assert!(m.rows >= 1 && m.cols >= 1, "svd of an empty matrix");
    if m.rows < m.cols {
        let t = svd_small(&m.adjoint());
        return Svd {
            left: t.right,
            singulars: t.singulars,
            right: t.left,
        };
    }
    let (rows, n) = (m.rows, m.cols);
    let mut a: Vec<Vec<C64>> = (0..n).map(|j| (0..rows).map(|i| m[(i, j)]).collect()).collect();
    let mut v: Vec<Vec<C64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { ONE } else { ZERO }).collect())
        .collect();
    let eps = 4.0 * f64::EPSILON;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = a[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = a[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: C64 = a[p].iter().zip(&a[q]).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g == 0.0 || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let e = gamma / g;
                let (sp, sq) = (e.conj() * s, e * s);
                rotate_pair(&mut a, p, q, c, sp, sq);
                rotate_pair(&mut v, p, q, c, sp, sq);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<(f64, usize)> = a
        .iter()
        .enumerate()
        .map(|(j, col)| (col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(), j))
        .collect();
    sv.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let smax = sv[0].0;
    let mut left_cols: Vec<CVector> = Vec::with_capacity(n);
    let mut singulars = Vec::with_capacity(n);
    let mut right_cols = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for (pos, &(s, j)) in sv.iter().enumerate() {
        singulars.push(s);
        right_cols.push(CVector(v[j].clone()));
        if s > smax * f64::EPSILON && s > 0.0 {
            left_cols.push(CVector(a[j].iter().map(|z| z / s).collect()));
        } else {
            left_cols.push(CVector::zeros(rows));
            deficient.push(pos);
        }
    }
    if !deficient.is_empty() {
        let good: Vec<CVector> = left_cols
            .iter()
            .enumerate()
            .filter(|(k, _)| !deficient.contains(k))
            .map(|(_, c)| c.clone())
            .collect();
        let fill = complete_basis(&good, rows);
        for (pos, f) in deficient.into_iter().zip(fill) {
            left_cols[pos] = f;
        }
    }
    Svd {
        left: CMatrix::from_columns(&left_cols).expect("consistent"),
        singulars,
        right: CMatrix::from_columns(&right_cols).expect("consistent"),
    }
}

/// Applies `[x_p, x_q] ← [c·x_p − sp·x_q, sq·x_p + c·x_q]`.
fn rotate_pair(cols: &mut [Vec<C64>], p: usize, q: usize, c: f64, sp: C64, sq: C64) {
    let (lo, hi) = cols.split_at_mut(q);
    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = xp * c - sp * xq;
        *y = sq * xp + xq * c;
    }
}

/// The unitary `Σ_i |to_i⟩⟨from_i|` carrying one orthonormal basis onto another.
pub fn basis_transport_unitary(from: &[CVector], to: &[CVector]) -> Result<Unitary> {
    if from.len() != to.len() {
        return Err(Error::DimensionMismatch {
            expected: from.len(),
            found: to.len(),
        });
    }
    let d = from.len();
    for v in from.iter().chain(to) {
        if v.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.dim(),
            });
        }
    }
    for family in [from, to] {
        let deviation = orthonormality_defect(family);
        if deviation >= UNITARITY_TOL {
            return Err(Error::NotOrthonormal { deviation });
        }
    }
    let f = CMatrix::from_columns(from)?;
    let t = CMatrix::from_columns(to)?;
    Unitary::new(t.matmul(&f.adjoint()))
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &CMatrix) -> CMatrix {
    assert_eq!(a.rows, a.cols, "expm of a non-square matrix");
    let norm = a.max_row_sum();
    let mut squarings = 0u32;
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as u32;
    }
    let scaled = a.scale(C64::new(0.5f64.powi(squarings as i32), 0.0));
    let mut result = CMatrix::identity(a.rows);
    let mut term = CMatrix::identity(a.rows);
    for k in 1..=30 {
        term = term.matmul(&scaled).scale(C64::new(1.0 / k as f64, 0.0));
        result = result.add(&term);
        if term.max_row_sum() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

/// Re-orthonormalizes the columns of a nearly unitary matrix (QR with
/// positive diagonal), removing accumulated rounding drift.
pub fn reorthonormalize(m: &CMatrix) -> Unitary {
    let mut q: Vec<CVector> = Vec::with_capacity(m.cols);
    for c in m.columns() {
        let r = project_out(&c, &q);
        let n = r.norm();
        q.push(r.scale(C64::new(1.0 / n, 0.0)));
    }
    Unitary(CMatrix::from_columns(&q).expect("square"))
}
