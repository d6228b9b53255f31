//! Dense quaternionic matrices acting on `H^n` from the left, their complex
//! adjoint embedding, the S-spectrum and the S-resolvent operators.
//!
//! A quaternion `q = w + x e1 + y e2 + z e3` is written `q = a + e2 b` with
//! `a = w + x i`, `b = y - z i` in `C_{e1}`, and embedded as
//! `[[a, -conj b], [b, conj a]]`. A matrix `T = A + e2 B` becomes the
//! `2n × 2n` complex matrix `[[A, -conj B], [B, conj A]]`. The map is an
//! algebra homomorphism, so solves and eigenproblems run on the embedding.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::{Quaternion, SlicePoint};

/// Relative threshold on the smallest singular value for invertibility.
pub const INVERTIBILITY_RTOL: f64 = 1e-10;
/// Relative threshold on component commutators for the commuting flag.
pub const COMMUTING_RTOL: f64 = 1e-12;
/// Absolute tolerance for merging embedding eigenvalues into one sphere.
pub const SPHERE_MERGE_TOL: f64 = 1e-8;

#[inline]
pub(crate) fn split(q: Quaternion) -> (Complex64, Complex64) {
    (Complex64::new(q.w, q.x), Complex64::new(q.y, -q.z))
}

#[inline]
pub(crate) fn unsplit(a: Complex64, b: Complex64) -> Quaternion {
    Quaternion::new(a.re, a.im, b.re, -b.im)
}

/// Dense `n × n` quaternionic matrix, row-major.
#[derive(Clone)]
pub struct QMatrixOperator {
    n: usize,
    entries: Vec<Quaternion>,
    commuting: bool,
    op_norm: OnceLock<f64>,
}

impl fmt::Debug for QMatrixOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QMatrixOperator")
            .field("n", &self.n)
            .field("commuting", &self.commuting)
            .field("entries", &self.entries)
            .finish()
    }
}

impl PartialEq for QMatrixOperator {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.entries == other.entries
    }
}

impl QMatrixOperator {
    pub fn new(n: usize, entries: Vec<Quaternion>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("matrix dimension must be at least 1".into()));
        }
        if entries.len() != n * n {
            return Err(Error::Dimension(format!("expected {} entries, got {}", n * n, entries.len())));
        }
        if entries.iter().any(|q| !q.is_finite()) {
            return Err(Error::InvalidParameter("matrix entries must be finite".into()));
        }
        Ok(Self::from_parts(n, entries))
    }

    fn from_parts(n: usize, entries: Vec<Quaternion>) -> Self {
        let mut m = Self {
            n,
            entries,
            commuting: false,
            op_norm: OnceLock::new(),
        };
        let scale = m.frobenius_norm().powi(2);
        m.commuting = m.max_commutator() <= COMMUTING_RTOL * scale;
        m
    }

    pub fn from_rows(rows: Vec<Vec<Quaternion>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("matrix rows must all have length n".into()));
        }
        Self::new(n, rows.into_iter().flatten().collect())
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> Quaternion) -> Self {
        let entries = (0..n * n).map(|k| f(k / n, k % n)).collect();
        Self::from_parts(n, entries)
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, Quaternion::ONE)
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_fn(n, |_, _| Quaternion::ZERO)
    }

    /// `q I`.
    pub fn scalar(n: usize, q: Quaternion) -> Self {
        Self::from_fn(n, |i, j| if i == j { q } else { Quaternion::ZERO })
    }

    pub fn diag(d: &[Quaternion]) -> Self {
        Self::from_fn(d.len(), |i, j| if i == j { d[i] } else { Quaternion::ZERO })
    }

    pub fn from_real(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), |i, j| Quaternion::real(m[(i, j)]))
    }

    /// `T0 + T1 e1 + T2 e2 + T3 e3`.
    pub fn from_components(c: &[DMatrix<f64>; 4]) -> Result<Self> {
        let n = c[0].nrows();
        if c.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::Dimension("components must be square and equally sized".into()));
        }
        Self::new(
            n,
            (0..n * n)
                .map(|k| {
                    let (i, j) = (k / n, k % n);
                    Quaternion::new(c[0][(i, j)], c[1][(i, j)], c[2][(i, j)], c[3][(i, j)])
                })
                .collect(),
        )
    }

    /// Block diagonal matrix with the given blocks.
    pub fn block_diag(blocks: &[&QMatrixOperator]) -> Self {
        let n: usize = blocks.iter().map(|b| b.n).sum();
        let mut entries = vec![Quaternion::ZERO; n * n];
        let mut off = 0;
        for b in blocks {
            for i in 0..b.n {
                for j in 0..b.n {
                    entries[(off + i) * n + off + j] = b.get(i, j);
                }
            }
            off += b.n;
        }
        Self::from_parts(n, entries)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Quaternion {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[Quaternion] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<Quaternion>> {
        self.entries.chunks(self.n).map(<[Quaternion]>::to_vec).collect()
    }

    /// True iff all six component commutators are below `1e-12 ‖T‖_F²`.
    pub fn is_commuting(&self) -> bool {
        self.commuting
    }

    /// The real components `[T0, T1, T2, T3]`.
    pub fn components(&self) -> [DMatrix<f64>; 4] {
        let n = self.n;
        let pick = |f: fn(&Quaternion) -> f64| DMatrix::from_fn(n, n, |i, j| f(&self.get(i, j)));
        [pick(|q| q.w), pick(|q| q.x), pick(|q| q.y), pick(|q| q.z)]
    }

    /// Largest Frobenius norm of a commutator `[T_a, T_b]`.
    pub fn max_commutator(&self) -> f64 {
        let c = self.components();
        let mut worst = 0.0f64;
        for a in 0..4 {
            for b in a + 1..4 {
                worst = worst.max((&c[a] * &c[b] - &c[b] * &c[a]).norm());
            }
        }
        worst
    }

    /// Componentwise conjugate `T0 - T1 e1 - T2 e2 - T3 e3` (not the adjoint).
    pub fn conj_components(&self) -> Self {
        self.map(Quaternion::conj)
    }

    /// Quaternionic adjoint: transpose and conjugate.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i).conj())
    }

    pub fn map(&self, f: impl Fn(Quaternion) -> Quaternion) -> Self {
        Self::from_parts(self.n, self.entries.iter().map(|&q| f(q)).collect())
    }

    /// Entrywise `T_ij q`.
    pub fn mul_scalar_right(&self, q: Quaternion) -> Self {
        self.map(|e| e * q)
    }

    /// Entrywise `q T_ij`.
    pub fn mul_scalar_left(&self, q: Quaternion) -> Self {
        self.map(|e| q * e)
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|e| e * a)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, q| m.max(q.w.abs()).max(q.x.abs()).max(q.y.abs()).max(q.z.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n, "dimension mismatch");
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(0.0f64, |m, (a, b)| m.max(a.max_abs_diff(*b)))
    }

    /// `max|A - B| / max(max|B|, tiny)`.
    pub fn rel_diff(&self, reference: &Self) -> f64 {
        self.max_abs_diff(reference) / reference.max_abs().max(f64::MIN_POSITIVE)
    }

    /// Operator 2-norm, i.e. the largest singular value of the embedding.
    pub fn op_norm(&self) -> f64 {
        *self.op_norm.get_or_init(|| self.embed().sigma_max())
    }

    /// Scale `max(1, ‖T‖²)` used by the invertibility test.
    pub fn invertibility_scale(&self) -> f64 {
        self.op_norm().powi(2).max(1.0)
    }

    pub fn embed(&self) -> ComplexAdjointMatrix {
        ComplexAdjointMatrix::from_operator(self)
    }

    /// Matrix-vector product with entries multiplying vector entries from the left.
    pub fn apply(&self, v: &[Quaternion]) -> Result<Vec<Quaternion>> {
        if v.len() != self.n {
            return Err(Error::Dimension(format!("vector has length {}, matrix is {}×{}", v.len(), self.n, self.n)));
        }
        Ok((0..self.n)
            .map(|i| {
                let mut acc = Quaternion::ZERO;
                for j in 0..self.n {
                    acc += self.get(i, j) * v[j];
                }
                acc
            })
            .collect())
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::Dimension(format!("{}×{} times {}×{}", self.n, self.n, other.n, other.n)));
        }
        let n = self.n;
        let mut out = vec![Quaternion::ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == Quaternion::ZERO {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * other.get(k, j);
                }
            }
        }
        Ok(Self::from_parts(n, out))
    }

    /// `T^k` for `k >= 0`.
    pub fn powi(&self, k: u32) -> Self {
        let mut out = Self::identity(self.n);
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                out = &out * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        out
    }

    /// `Σ c_k T^k` with real coefficients in ascending order (Horner).
    pub fn poly_real(&self, coeffs: &[f64]) -> Self {
        let mut acc = Self::zeros(self.n);
        for &c in coeffs.iter().rev() {
            acc = &(&acc * self) + &Self::scalar(self.n, Quaternion::real(c));
        }
        acc
    }

    /// Inverse through the embedding; `SingularError` below the invertibility threshold.
    pub fn inverse(&self) -> Result<Self> {
        let e = self.embed();
        let smin = e.sigma_min();
        if smin <= INVERTIBILITY_RTOL * self.invertibility_scale() {
            return Err(Error::Singular(format!("matrix is not invertible (sigma_min = {smin:.3e})")));
        }
        Ok(e.inverse_unchecked()?.to_operator())
    }

    /// `Q_s(T) = T² - 2 s0 T + |s|² I`.
    pub fn q_poly(&self, s: Quaternion) -> Self {
        self.poly_real(&[s.norm_sqr(), -2.0 * s.w, 1.0])
    }

    /// Right eigen-structure of the embedding as a list of spheres.
    pub fn s_spectrum(&self) -> Vec<SpectralSphere> {
        s_spectrum(self)
    }
}

impl<'a> Mul<&'a QMatrixOperator> for &'a QMatrixOperator {
    type Output = QMatrixOperator;
    fn mul(self, rhs: &QMatrixOperator) -> QMatrixOperator {
        self.try_mul(rhs).expect("dimension mismatch in matrix product")
    }
}

impl<'a> Add<&'a QMatrixOperator> for &'a QMatrixOperator {
    type Output = QMatrixOperator;
    fn add(self, rhs: &QMatrixOperator) -> QMatrixOperator {
        assert_eq!(self.n, rhs.n, "dimension mismatch in matrix sum");
        QMatrixOperator::from_parts(self.n, self.entries.iter().zip(&rhs.entries).map(|(a, b)| *a + *b).collect())
    }
}

impl<'a> Sub<&'a QMatrixOperator> for &'a QMatrixOperator {
    type Output = QMatrixOperator;
    fn sub(self, rhs: &QMatrixOperator) -> QMatrixOperator {
        assert_eq!(self.n, rhs.n, "dimension mismatch in matrix difference");
        QMatrixOperator::from_parts(self.n, self.entries.iter().zip(&rhs.entries).map(|(a, b)| *a - *b).collect())
    }
}

impl Neg for &QMatrixOperator {
    type Output = QMatrixOperator;
    fn neg(self) -> QMatrixOperator {
        self.map(|q| -q)
    }
}

/// On-disk layout: `{"n": .., "entries": [[[w,x,y,z], ..], ..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixFile {
    pub n: usize,
    pub entries: Vec<Vec<Quaternion>>,
}

impl From<&QMatrixOperator> for MatrixFile {
    fn from(m: &QMatrixOperator) -> Self {
        MatrixFile { n: m.n, entries: m.rows() }
    }
}

impl TryFrom<MatrixFile> for QMatrixOperator {
    type Error = Error;
    fn try_from(f: MatrixFile) -> Result<Self> {
        if f.entries.len() != f.n {
            return Err(Error::Dimension(format!("\"n\" is {} but {} rows were given", f.n, f.entries.len())));
        }
        QMatrixOperator::from_rows(f.entries)
    }
}

impl Serialize for QMatrixOperator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for QMatrixOperator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = MatrixFile::deserialize(d)?;
        QMatrixOperator::try_from(f).map_err(serde::de::Error::custom)
    }
}

/// The `2n × 2n` complex matrix `[[A, -conj B], [B, conj A]]` of `T = A + e2 B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexAdjointMatrix {
    n: usize,
    m: DMatrix<Complex64>,
}

impl ComplexAdjointMatrix {
    pub fn from_operator(t: &QMatrixOperator) -> Self {
        let n = t.n;
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let (a, b) = split(t.get(i, j));
                m[(i, j)] = a;
                m[(i, n + j)] = -b.conj();
                m[(n + i, j)] = b;
                m[(n + i, n + j)] = a.conj();
            }
        }
        Self { n, m }
    }

    /// Wraps a complex matrix that is known to be in the image of the embedding.
    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() % 2 != 0 {
            return Err(Error::Dimension("embedding must be square of even size".into()));
        }
        Ok(Self { n: m.nrows() / 2, m })
    }

    /// Reads `a = M[i][j]`, `b = M[n+i][j]` back into quaternions.
    pub fn to_operator(&self) -> QMatrixOperator {
        let n = self.n;
        QMatrixOperator::from_fn(n, |i, j| unsplit(self.m[(i, j)], self.m[(n + i, j)]))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn singular_values(&self) -> DVector<f64> {
        self.m.clone().svd(false, false).singular_values
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular_values().min()
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular_values().max()
    }

    /// Eigenvalues of the embedding; they come in conjugate pairs.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let schur = Schur::try_new(self.m.clone(), f64::EPSILON, 0)
            .expect("complex Schur iteration does not terminate without an iteration cap");
        schur
            .eigenvalues()
            .expect("complex Schur form is triangular")
            .iter()
            .copied()
            .collect()
    }

    pub(crate) fn inverse_unchecked(&self) -> Result<Self> {
        let inv = self
            .m
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Singular("LU factorization found an exact zero pivot".into()))?;
        Ok(Self { n: self.n, m: inv })
    }
}

/// Entrywise right product `M (q I)` inside the embedding.
pub(crate) fn embed_mul_scalar_right(m: &DMatrix<Complex64>, q: Quaternion) -> DMatrix<Complex64> {
    let n = m.nrows() / 2;
    let (a, b) = split(q);
    let left = m.columns(0, n);
    let right = m.columns(n, n);
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.columns_mut(0, n).copy_from(&(left * a + right * b));
    out.columns_mut(n, n).copy_from(&(left * (-b.conj()) + right * a.conj()));
    out
}

/// Entrywise left product `(q I) M` inside the embedding.
pub(crate) fn embed_mul_scalar_left(q: Quaternion, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = m.nrows() / 2;
    let (a, b) = split(q);
    let top = m.rows(0, n);
    let bottom = m.rows(n, n);
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.rows_mut(0, n).copy_from(&(top * a + bottom * (-b.conj())));
    out.rows_mut(n, n).copy_from(&(top * b + bottom * a.conj()));
    out
}

/// Precomputed embeddings of `T` and `T²` for repeated resolvent evaluation.
#[derive(Debug, Clone)]
pub struct ResolventKernel {
    t: DMatrix<Complex64>,
    t2: DMatrix<Complex64>,
    scale: f64,
}

impl ResolventKernel {
    pub fn new(t: &QMatrixOperator) -> Self {
        let e = t.embed().m;
        let t2 = &e * &e;
        Self {
            t: e,
            t2,
            scale: t.invertibility_scale(),
        }
    }

    pub fn dim(&self) -> usize {
        self.t.nrows() / 2
    }

    /// Embedded `Q_s(T)^{-1}`.
    pub fn pseudo(&self, s: Quaternion) -> Result<DMatrix<Complex64>> {
        let n2 = self.t.nrows();
        let q = &self.t2 - &self.t * Complex64::from(2.0 * s.w)
            + DMatrix::<Complex64>::identity(n2, n2) * Complex64::from(s.norm_sqr());
        let smin = q.clone().svd(false, false).singular_values.min();
        if smin <= INVERTIBILITY_RTOL * self.scale {
            return Err(Error::SSpectrum(format!("{s} (sigma_min of Q_s(T) = {smin:.3e})")));
        }
        q.lu()
            .try_inverse()
            .ok_or_else(|| Error::SSpectrum(format!("{s} (exact zero pivot)")))
    }

    /// Embedded `S_L^{-1}(s,T) = Q_s(T)^{-1} conj(s) - T Q_s(T)^{-1}`.
    pub fn left(&self, s: Quaternion) -> Result<DMatrix<Complex64>> {
        let qi = self.pseudo(s)?;
        Ok(embed_mul_scalar_right(&qi, s.conj()) - &self.t * &qi)
    }

    /// Embedded `S_R^{-1}(s,T) = (conj(s) - T) Q_s(T)^{-1}`.
    pub fn right(&self, s: Quaternion) -> Result<DMatrix<Complex64>> {
        let qi = self.pseudo(s)?;
        Ok(embed_mul_scalar_left(s.conj(), &qi) - &self.t * &qi)
    }
}

fn from_embedded(m: DMatrix<Complex64>) -> QMatrixOperator {
    ComplexAdjointMatrix { n: m.nrows() / 2, m }.to_operator()
}

/// Right-linear action `T v`.
pub fn qmat_apply(t: &QMatrixOperator, v: &[Quaternion]) -> Result<Vec<Quaternion>> {
    t.apply(v)
}

/// `Q_s(T)^{-1}`; `SSpectrumError` when `Q_s(T)` is numerically singular.
pub fn pseudo_resolvent(t: &QMatrixOperator, s: Quaternion) -> Result<QMatrixOperator> {
    ResolventKernel::new(t).pseudo(s).map(from_embedded)
}

/// Left S-resolvent `S_L^{-1}(s,T)`.
pub fn s_resolvent_left(t: &QMatrixOperator, s: Quaternion) -> Result<QMatrixOperator> {
    ResolventKernel::new(t).left(s).map(from_embedded)
}

/// Right S-resolvent `S_R^{-1}(s,T)`.
pub fn s_resolvent_right(t: &QMatrixOperator, s: Quaternion) -> Result<QMatrixOperator> {
    ResolventKernel::new(t).right(s).map(from_embedded)
}

/// `Q_{c,s}(T) = s² I - 2 s T0 + T conj(T)` for operators with commuting components.
pub fn commuting_q(t: &QMatrixOperator, s: Quaternion) -> Result<QMatrixOperator> {
    if !t.is_commuting() {
        return Err(Error::Commutator(format!("max component commutator {:.3e}", t.max_commutator())));
    }
    let n = t.n();
    let t0 = QMatrixOperator::from_real(&t.components()[0]);
    let ttbar = t * &t.conj_components();
    Ok(&(&QMatrixOperator::scalar(n, s * s) - &t0.mul_scalar_left(s * 2.0)) + &ttbar)
}

/// `Q_{c,s}(T)^{-1}`.
pub fn commuting_pseudo_resolvent(t: &QMatrixOperator, s: Quaternion) -> Result<QMatrixOperator> {
    let q = commuting_q(t, s)?;
    let e = q.embed();
    let smin = e.sigma_min();
    if smin <= INVERTIBILITY_RTOL * t.invertibility_scale() {
        return Err(Error::SSpectrum(format!("{s} (sigma_min of Q_c,s(T) = {smin:.3e})")));
    }
    Ok(e.inverse_unchecked()?.to_operator())
}

/// `S_L^{-1}(s,T) = (s I - conj(T)) Q_{c,s}(T)^{-1}` for commuting components.
pub fn commuting_s_resolvent_left(t: &QMatrixOperator, s: Quaternion) -> Result<QMatrixOperator> {
    let qi = commuting_pseudo_resolvent(t, s)?;
    let lhs = &QMatrixOperator::scalar(t.n(), s) - &t.conj_components();
    Ok(&lhs * &qi)
}

/// True when `Q_s(T)` passes the invertibility test.
pub fn is_resolvent_point(t: &QMatrixOperator, s: Quaternion) -> bool {
    ResolventKernel::new(t).pseudo(s).is_ok()
}

/// A sphere `[u + I v]` of the S-spectrum with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSphere {
    pub u: f64,
    pub v: f64,
    pub mult: usize,
}

impl SpectralSphere {
    /// Representative on the default slice `C_{e1}`.
    pub fn point(&self) -> Quaternion {
        Quaternion::new(self.u, self.v, 0.0, 0.0)
    }

    pub fn slice_point(&self) -> SlicePoint {
        SlicePoint {
            u: self.u,
            v: self.v,
            axis: Quaternion::E1,
        }
    }

    pub fn modulus(&self) -> f64 {
        self.u.hypot(self.v)
    }

    /// Angle of `u + i v` in `[0, pi]`.
    pub fn arg(&self) -> f64 {
        self.v.atan2(self.u)
    }
}

/// Groups `(u, v)` points into spheres within [`SPHERE_MERGE_TOL`].
///
/// `count` is the number of embedding eigenvalues represented by each point;
/// multiplicities are the merged counts halved.
pub fn cluster_spheres(points: &[(f64, f64)], tol: f64) -> Vec<SpectralSphere> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut clusters: Vec<(f64, f64, usize)> = Vec::new();
    for (u, v) in sorted {
        let hit = clusters.iter_mut().find(|c| {
            let (cu, cv) = (c.0 / c.2 as f64, c.1 / c.2 as f64);
            (cu - u).abs() <= tol && (cv - v).abs() <= tol
        });
        match hit {
            Some(c) => {
                c.0 += u;
                c.1 += v;
                c.2 += 1;
            }
            None => clusters.push((u, v, 1)),
        }
    }
    let mut out: Vec<SpectralSphere> = clusters
        .into_iter()
        .map(|(su, sv, k)| SpectralSphere {
            u: su / k as f64,
            v: sv / k as f64,
            mult: k.div_ceil(2),
        })
        .collect();
    out.sort_by(|a, b| a.u.total_cmp(&b.u).then(a.v.total_cmp(&b.v)));
    out
}

/// S-spectrum from the eigenvalues of the complex adjoint embedding.
pub fn s_spectrum(t: &QMatrixOperator) -> Vec<SpectralSphere> {
    let pts: Vec<(f64, f64)> = t.embed().eigenvalues().iter().map(|l| (l.re, l.im.abs())).collect();
    cluster_spheres(&pts, SPHERE_MERGE_TOL)
}

/// Smallest singular value of the embedded `Q_s(T)` divided by `max(1, ‖T‖²)`.
pub fn scaled_sigma_min(t: &QMatrixOperator, s: Quaternion) -> f64 {
    t.q_poly(s).embed().sigma_min() / t.invertibility_scale()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_matrix, random_quaternion, random_unit_imaginary, seeded};
    use proptest::prelude::*;

    fn q(w: f64, x: f64, y: f64, z: f64) -> Quaternion {
        Quaternion::new(w, x, y, z)
    }

    #[test]
    fn scalar_embedding_is_multiplicative() {
        let mut rng = seeded(1);
        for _ in 0..50 {
            let a = random_quaternion(&mut rng, 2.0);
            let b = random_quaternion(&mut rng, 2.0);
            let ea = QMatrixOperator::scalar(1, a).embed();
            let eb = QMatrixOperator::scalar(1, b).embed();
            let prod = ComplexAdjointMatrix::from_matrix(ea.matrix() * eb.matrix()).unwrap().to_operator();
            assert!(prod.get(0, 0).max_abs_diff(a * b) < 1e-14);
        }
    }

    #[test]
    fn identity_and_diag_apply() {
        let mut rng = seeded(2);
        let v: Vec<_> = (0..3).map(|_| random_quaternion(&mut rng, 1.0)).collect();
        assert_eq!(QMatrixOperator::identity(3).apply(&v).unwrap(), v);
        let d = QMatrixOperator::diag(&[Quaternion::E1; 2]);
        assert_eq!(d.apply(&[Quaternion::ONE; 2]).unwrap(), vec![Quaternion::E1; 2]);
        assert!(matches!(d.apply(&v), Err(Error::Dimension(_))));
    }

    #[test]
    fn apply_matches_embedding_action() {
        let mut rng = seeded(3);
        let t = random_matrix(&mut rng, 5, 1.0);
        let v: Vec<_> = (0..5).map(|_| random_quaternion(&mut rng, 1.0)).collect();
        let tv = t.apply(&v).unwrap();
        let e = t.embed();
        let n = 5;
        let col = DVector::from_fn(2 * n, |k, _| if k < n { split(v[k]).0 } else { split(v[k - n]).1 });
        let out = e.matrix() * col;
        for i in 0..n {
            assert!(unsplit(out[i], out[n + i]).max_abs_diff(tv[i]) < 1e-13);
        }
    }

    #[test]
    fn right_linearity() {
        let mut rng = seeded(4);
        let t = random_matrix(&mut rng, 4, 1.0);
        let v: Vec<_> = (0..4).map(|_| random_quaternion(&mut rng, 1.0)).collect();
        let a = random_quaternion(&mut rng, 1.0);
        let va: Vec<_> = v.iter().map(|x| *x * a).collect();
        let lhs = t.apply(&va).unwrap();
        let rhs: Vec<_> = t.apply(&v).unwrap().into_iter().map(|x| x * a).collect();
        for (l, r) in lhs.iter().zip(&rhs) {
            assert!(l.max_abs_diff(*r) < 1e-13);
        }
    }

    #[test]
    fn components_roundtrip_and_json() {
        let mut rng = seeded(5);
        let t = random_matrix(&mut rng, 3, 1.0);
        assert_eq!(QMatrixOperator::from_components(&t.components()).unwrap(), t);
        let s = serde_json::to_string(&t).unwrap();
        let back: QMatrixOperator = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        assert!(serde_json::from_str::<QMatrixOperator>(r#"{"n":2,"entries":[[[1,0,0,0]]]}"#).is_err());
    }

    #[test]
    fn commuting_flag() {
        assert!(QMatrixOperator::diag(&[Quaternion::E1, Quaternion::real(2.0)]).is_commuting());
        let mut rng = seeded(6);
        assert!(!random_matrix(&mut rng, 3, 1.0).is_commuting());
    }

    #[test]
    fn pseudo_resolvent_examples() {
        let t = QMatrixOperator::diag(&[Quaternion::real(2.0)]);
        let r = pseudo_resolvent(&t, Quaternion::real(1.0)).unwrap();
        assert!(r.get(0, 0).max_abs_diff(Quaternion::ONE) < 1e-15);
        // s = 2 is real with s0 = 2, so Q = e1^2 - 4 e1 + 4 = 3 - 4 e1
        let t = QMatrixOperator::diag(&[Quaternion::E1]);
        let r = pseudo_resolvent(&t, Quaternion::real(2.0)).unwrap();
        assert!(r.get(0, 0).max_abs_diff(q(3.0, 4.0, 0.0, 0.0) / 25.0) < 1e-15);
    }

    #[test]
    fn pseudo_resolvent_pure_imaginary_point() {
        // s = 2 e2: s0 = 0, |s|^2 = 4, so Q = e1^2 + 4 = 3
        let t = QMatrixOperator::diag(&[Quaternion::E1]);
        let r = pseudo_resolvent(&t, Quaternion::E2 * 2.0).unwrap();
        assert!(r.get(0, 0).max_abs_diff(Quaternion::real(1.0 / 3.0)) < 1e-15);
    }

    #[test]
    fn pseudo_resolvent_depends_on_sphere_only() {
        let mut rng = seeded(7);
        let t = random_matrix(&mut rng, 4, 1.0);
        let s = q(0.7, 1.1, -0.3, 0.4);
        let h = random_quaternion(&mut rng, 1.0);
        let s2 = h.inv() * s * h;
        let a = pseudo_resolvent(&t, s).unwrap();
        let b = pseudo_resolvent(&t, s2).unwrap();
        assert!(a.rel_diff(&b) < 1e-12);
    }

    #[test]
    fn real_point_resolvents_are_classical() {
        let mut rng = seeded(8);
        let t = random_matrix(&mut rng, 4, 1.0);
        let s = Quaternion::real(5.0);
        let classical = (&QMatrixOperator::scalar(4, s) - &t).inverse().unwrap();
        assert!(s_resolvent_left(&t, s).unwrap().rel_diff(&classical) < 1e-12);
        assert!(s_resolvent_right(&t, s).unwrap().rel_diff(&classical) < 1e-12);
    }

    #[test]
    fn spectrum_examples() {
        let sp = s_spectrum(&QMatrixOperator::diag(&[Quaternion::E1]));
        assert_eq!(sp.len(), 1);
        assert!((sp[0].u).abs() < 1e-14 && (sp[0].v - 1.0).abs() < 1e-14);
        assert_eq!(sp[0].mult, 1);

        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, -1.0]);
        let sym = QMatrixOperator::from_real(&m);
        let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        let sp = s_spectrum(&sym);
        assert_eq!(sp.len(), 3);
        for (s, e) in sp.iter().zip(&eig) {
            assert!((s.u - e).abs() < 1e-12 && s.v < 1e-12);
        }
    }

    #[test]
    fn repeated_spheres_report_multiplicity() {
        let t = QMatrixOperator::diag(&[Quaternion::E1, Quaternion::E2, Quaternion::real(3.0)]);
        let sp = s_spectrum(&t);
        assert_eq!(sp.len(), 2);
        assert_eq!(sp[0].mult, 2);
        assert_eq!(sp[1].mult, 1);
    }

    #[test]
    fn commuting_resolvent_examples() {
        let t = QMatrixOperator::diag(&[Quaternion::E1]);
        let r = commuting_pseudo_resolvent(&t, Quaternion::E2 * 2.0).unwrap();
        assert!(r.get(0, 0).max_abs_diff(Quaternion::real(-1.0 / 3.0)) < 1e-15);

        let mut rng = seeded(9);
        assert!(matches!(
            commuting_pseudo_resolvent(&random_matrix(&mut rng, 3, 1.0), Quaternion::ONE),
            Err(Error::Commutator(_))
        ));
    }

    #[test]
    fn commuting_q_for_pure_vector_part() {
        // T0 = 0 and commuting components give T conj(T) = -T^2
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, -1.0]);
        let c = [DMatrix::zeros(2, 2), x.clone(), &x * 0.5, &x * &x];
        let t = QMatrixOperator::from_components(&c).unwrap();
        assert!(t.is_commuting());
        let s = q(0.3, 0.0, 1.2, -0.4);
        let lhs = commuting_q(&t, s).unwrap();
        let rhs = &QMatrixOperator::scalar(2, s * s) - &(&t * &t);
        assert!(lhs.max_abs_diff(&rhs) < 1e-13);
    }

    #[test]
    fn commuting_left_resolvent_matches_general() {
        let mut rng = seeded(10);
        for _ in 0..20 {
            let t = crate::random::random_commuting(&mut rng, 3);
            let s = random_quaternion(&mut rng, 3.0);
            let a = s_resolvent_left(&t, s).unwrap();
            let b = commuting_s_resolvent_left(&t, s).unwrap();
            assert!(b.rel_diff(&a) < 1e-10, "{}", b.rel_diff(&a));
        }
    }

    #[test]
    fn invertibility_equivalence_on_commuting_matrices() {
        let mut rng = seeded(11);
        let mut singular_seen = 0;
        for k in 0..200 {
            let t = crate::random::random_commuting(&mut rng, 3);
            let s = if k % 2 == 0 {
                let sp = s_spectrum(&t);
                let sph = sp[k % sp.len()];
                Quaternion::from_slice(sph.u, sph.v, random_unit_imaginary(&mut rng))
            } else {
                random_quaternion(&mut rng, 2.0)
            };
            let general = is_resolvent_point(&t, s);
            let commuting = commuting_pseudo_resolvent(&t, s).is_ok();
            assert_eq!(general, commuting, "s = {s}");
            singular_seen += usize::from(!general);
        }
        assert!(singular_seen >= 90);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn embedding_is_homomorphism(seed in any::<u64>(), n in 1usize..6) {
            let mut rng = seeded(seed);
            let a = random_matrix(&mut rng, n, 1.0);
            let b = random_matrix(&mut rng, n, 1.0);
            let lhs = (&a * &b).embed();
            let rhs = a.embed().matrix() * b.embed().matrix();
            let err = (lhs.matrix() - &rhs).norm() / rhs.norm().max(1e-300);
            prop_assert!(err <= 1e-12);
        }

        #[test]
        fn inverse_is_inverse(seed in any::<u64>(), n in 1usize..6) {
            let mut rng = seeded(seed);
            let a = &random_matrix(&mut rng, n, 1.0) + &QMatrixOperator::scalar(n, Quaternion::real(3.0));
            let ai = a.inverse().unwrap();
            prop_assert!((&a * &ai).max_abs_diff(&QMatrixOperator::identity(n)) < 1e-12);
        }

        #[test]
        fn reported_spheres_are_singular(seed in any::<u64>(), n in 1usize..6) {
            let mut rng = seeded(seed);
            let t = random_matrix(&mut rng, n, 1.0);
            for sph in s_spectrum(&t) {
                prop_assert!(scaled_sigma_min(&t, sph.point()) <= 1e-8);
                prop_assert!(sph.modulus() <= t.op_norm() + 1e-8);
            }
        }

        #[test]
        fn resolvent_equation_reformulated(seed in any::<u64>()) {
            // S_R(s)S_L(p) = ((S_R(s) - S_L(p))p - conj(s)(S_R(s) - S_L(p))) Q_s(p)^{-1}
            let mut rng = seeded(seed);
            let t = random_matrix(&mut rng, 3, 1.0);
            let s = random_quaternion(&mut rng, 3.0);
            let p = random_quaternion(&mut rng, 3.0);
            prop_assume!(!s.same_sphere(p, 1e-3));
            let sr = s_resolvent_right(&t, s).unwrap();
            let sl = s_resolvent_left(&t, p).unwrap();
            let lhs = &sr * &sl;
            let d = &sr - &sl;
            let qsp = (p * p - p * (2.0 * s.w) + Quaternion::real(s.norm_sqr())).inv();
            let rhs = (&d.mul_scalar_right(p) - &d.mul_scalar_left(s.conj())).mul_scalar_right(qsp);
            prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-10 * lhs.max_abs().max(1.0));
        }
    }
}
