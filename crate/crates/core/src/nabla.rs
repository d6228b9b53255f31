//! The quaternionic nabla operator `∇ = e1 ∂1 + e2 ∂2 + e3 ∂3` on a periodic grid.
//!
//! A field is split as `v = v1 + J v2` with `v1, v2` valued in the slice
//! `C_I`; after a componentwise transform `∇` acts on each mode through the
//! 2×2 Hermitian symbol `G(ξ)`. For the standard frame `I = e1, J = e2`
//!
//! ```text
//! G(ξ) = [ -ξ1        ξ3 - iξ2 ]
//!        [ ξ3 + iξ2   ξ1       ]
//! ```
//!
//! The projected fractional power `f_α(∇)` keeps only the nonnegative
//! spectral values: per mode it is `|ξ|^α P₊(ξ)` with `P₊ = (Id + G/|ξ|)/2`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{apply_real_multiplier, spectral_derivative, Fft3, SpectralField, Wavenumbers};
use crate::quad::{integrate_log_line, Endpoint, QuadSpec, Tail};
use crate::quat::Quaternion;

pub type Symbol = Matrix2<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn dot3(a: Quaternion, b: Quaternion) -> f64 {
    a.x * b.x + a.y * b.y + a.z * b.z
}

/// Orthonormal frame `(I, J, K = IJ)` fixing the splitting `H = C_I ⊕ J C_I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splitting {
    i: Quaternion,
    j: Quaternion,
    k: Quaternion,
}

impl Default for Splitting {
    fn default() -> Self {
        Self {
            i: Quaternion::E1,
            j: Quaternion::E2,
            k: Quaternion::E3,
        }
    }
}

impl Splitting {
    /// Frame from two orthogonal unit imaginary quaternions.
    pub fn new(i: Quaternion, j: Quaternion) -> Result<Self> {
        let unit_imag = |q: Quaternion| q.w.abs() <= 1e-12 && (q.norm() - 1.0).abs() <= 1e-12;
        if !unit_imag(i) || !unit_imag(j) || dot3(i, j).abs() > 1e-12 {
            return Err(Error::InvalidParameter("splitting needs orthonormal unit imaginaries".into()));
        }
        Ok(Self { i, j, k: i * j })
    }

    pub fn i(&self) -> Quaternion {
        self.i
    }

    pub fn j(&self) -> Quaternion {
        self.j
    }

    /// `q = v1 + J v2` with `v1 = a + I b`, `v2 = c + I d`, returned as complex pairs.
    pub fn split(&self, q: Quaternion) -> (Complex64, Complex64) {
        (c(q.w, dot3(q, self.i)), c(dot3(q, self.j), -dot3(q, self.k)))
    }

    pub fn join(&self, v1: Complex64, v2: Complex64) -> Quaternion {
        Quaternion::real(v1.re) + self.i * v1.im + self.j * v2.re - self.k * v2.im
    }

    /// Matrix of `v ↦ e v` on the pair `(v1, v2)`.
    pub fn left_mult(&self, e: Quaternion) -> Symbol {
        let (p, q, r) = (dot3(e, self.i), dot3(e, self.j), dot3(e, self.k));
        Matrix2::new(c(e.w, p), c(-q, -r), c(q, -r), c(e.w, -p))
    }

    /// `G(ξ) = Σ ξ_ℓ L(e_ℓ) i`: the derivative is multiplication by `iξ` from the right.
    pub fn symbol(&self, xi: [f64; 3]) -> Symbol {
        let e = [Quaternion::E1, Quaternion::E2, Quaternion::E3];
        let mut g = Symbol::zeros();
        for l in 0..3 {
            g += self.left_mult(e[l]) * c(0.0, xi[l]);
        }
        g
    }
}

/// `G(ξ)` in the standard frame.
pub fn gmat(xi: [f64; 3]) -> Symbol {
    let [x1, x2, x3] = xi;
    Matrix2::new(c(-x1, 0.0), c(x3, -x2), c(x3, x2), c(x1, 0.0))
}

/// All per-mode symbols of a grid together with their wavevectors.
pub struct SymbolTable {
    pub wavenumbers: Wavenumbers,
    pub symbols: Vec<Symbol>,
}

pub fn symbol_table(dims: [usize; 3], lengths: [f64; 3]) -> SymbolTable {
    let wavenumbers = Wavenumbers::new(dims, lengths);
    let symbols = (0..wavenumbers.len()).map(|k| gmat(wavenumbers.xi(k))).collect();
    SymbolTable { wavenumbers, symbols }
}

/// Transforms `(v1, v2)` of a field, applies a per-mode 2×2 matrix, transforms back.
pub fn apply_symbol(
    v: &SpectralField,
    split: &Splitting,
    m: impl Fn(usize, [f64; 3]) -> Symbol + Sync,
) -> Result<SpectralField> {
    let dims = v.dims();
    let wn = Wavenumbers::for_field(v);
    let plan = Fft3::new(dims);
    let (mut a, mut b): (Vec<Complex64>, Vec<Complex64>) = v.values().iter().map(|q| split.split(*q)).unzip();
    plan.forward(&mut a);
    plan.forward(&mut b);
    a.par_iter_mut().zip(b.par_iter_mut()).enumerate().for_each(|(k, (x, y))| {
        let out = m(k, wn.xi(k)) * Vector2::new(*x, *y);
        *x = out[0];
        *y = out[1];
    });
    plan.inverse(&mut a);
    plan.inverse(&mut b);
    let values = a.iter().zip(&b).map(|(x, y)| split.join(*x, *y)).collect();
    v.with_values(values)
}

pub fn nabla_apply(v: &SpectralField) -> Result<SpectralField> {
    nabla_apply_in(v, &Splitting::default())
}

pub fn nabla_apply_in(v: &SpectralField, split: &Splitting) -> Result<SpectralField> {
    apply_symbol(v, split, |_, xi| split.symbol(xi))
}

/// `P₊(ξ) = (Id + G/|ξ|)/2`, the projector onto the eigenvalue `+|ξ|`.
pub fn projector_plus(g: &Symbol, r: f64) -> Symbol {
    (Symbol::identity() + g.unscale(r)) * c(0.5, 0.0)
}

/// `|ξ|^{α-2} [½|ξ| G + ½ G²]`: the closed-form per-mode action of `f_α(∇)`.
pub fn frac_nabla_symbol(g: &Symbol, r: f64, alpha: f64) -> Symbol {
    if r == 0.0 {
        return Symbol::zeros();
    }
    (g * c(0.5 * r, 0.0) + g * g * c(0.5, 0.0)) * c(r.powf(alpha - 2.0), 0.0)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("f_α(∇) needs α in (0, 1], got {alpha}")));
    }
    Ok(())
}

/// `f_α(∇)v = (-Δ)^{α/2-1} [½(-Δ)^{1/2} + ½∇] ∇v`; the zero mode maps to zero.
pub fn frac_nabla_closed(v: &SpectralField, alpha: f64) -> Result<SpectralField> {
    frac_nabla_closed_in(v, alpha, &Splitting::default())
}

pub fn frac_nabla_closed_in(v: &SpectralField, alpha: f64, split: &Splitting) -> Result<SpectralField> {
    check_alpha(alpha)?;
    apply_symbol(v, split, |_, xi| {
        let r = norm3(xi);
        frac_nabla_symbol(&split.symbol(xi), r, alpha)
    })
}

fn norm3(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// Per-mode value of `-(1/2π) ∫_0^∞ (A1 + A2) dt` where, with `E = L(I)` and
/// `θ = (α-1)π/2`,
/// `A1 = t^{α-1} (tE - G) e^{-θE} G / (t² + |ξ|²)` and
/// `A2 = t^{α-1} (-tE - G) e^{θE} G / (t² + |ξ|²)`.
pub fn frac_nabla_quadrature_symbol(g: &Symbol, r: f64, alpha: f64, quad: &QuadSpec) -> Result<(Symbol, QuadDiagnostics)> {
    if r == 0.0 {
        return Ok((Symbol::zeros(), QuadDiagnostics::default()));
    }
    let theta = (alpha - 1.0) * PI / 2.0;
    let e = Matrix2::new(I, c(0.0, 0.0), c(0.0, 0.0), -I);
    let exp_e = |phi: f64| Matrix2::new(Complex64::from_polar(1.0, phi), c(0.0, 0.0), c(0.0, 0.0), Complex64::from_polar(1.0, -phi));
    let (em, ep) = (exp_e(-theta) * g, exp_e(theta) * g);
    let f = |t: f64| -> Result<Vec<f64>> {
        let w = t.powf(alpha - 1.0) / (t * t + r * r);
        let a1 = (e * c(t, 0.0) - g) * em;
        let a2 = (-e * c(t, 0.0) - g) * ep;
        let m = (a1 + a2) * c(w, 0.0);
        Ok(m.iter().flat_map(|z| [z.re, z.im]).collect())
    };
    let out = integrate_log_line(
        &f,
        Endpoint::Zero(Tail::power(alpha - 1.0, r)),
        Endpoint::Infinity(Tail::power(alpha - 2.0, r)),
        quad,
    )?;
    let s = -1.0 / (2.0 * PI);
    let v = &out.value;
    let m = Matrix2::from_iterator((0..4).map(|k| c(v[2 * k] * s, v[2 * k + 1] * s)));
    Ok((
        m,
        QuadDiagnostics {
            est_error: out.est_error * s.abs(),
            nodes_used: out.nodes_used,
            warnings: out.warnings,
        },
    ))
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct QuadDiagnostics {
    pub est_error: f64,
    pub nodes_used: usize,
    pub warnings: Vec<String>,
}

pub struct NablaQuadResult {
    pub field: SpectralField,
    /// Largest per-mode error estimate.
    pub est_error: f64,
    pub nodes_used: usize,
    pub warnings: Vec<String>,
}

/// `f_α(∇)v` from the imaginary-axis resolvent integral, one quadrature per mode.
pub fn frac_nabla_quadrature(v: &SpectralField, alpha: f64, quad: &QuadSpec) -> Result<NablaQuadResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("the resolvent integral needs α in (0, 1), got {alpha}")));
    }
    let wn = Wavenumbers::for_field(v);
    let per_mode: Vec<(Symbol, QuadDiagnostics)> = (0..wn.len())
        .into_par_iter()
        .map(|k| {
            let xi = wn.xi(k);
            frac_nabla_quadrature_symbol(&gmat(xi), norm3(xi), alpha, quad)
        })
        .collect::<Result<_>>()?;
    let field = apply_symbol(v, &Splitting::default(), |k, _| per_mode[k].0)?;
    let mut warnings: Vec<String> = per_mode.iter().flat_map(|(_, d)| d.warnings.iter().cloned()).collect();
    warnings.sort();
    warnings.dedup();
    Ok(NablaQuadResult {
        field,
        est_error: per_mode.iter().map(|(_, d)| d.est_error).fold(0.0, f64::max),
        nodes_used: per_mode.iter().map(|(_, d)| d.nodes_used).sum(),
        warnings,
    })
}

/// Pointwise split `w = w0 + (w1 e1 + w2 e2 + w3 e3)`.
pub fn scal_vec_split(w: &SpectralField) -> (Vec<f64>, [Vec<f64>; 3]) {
    let [a, b, c, d] = w.components();
    (a, [b, c, d])
}

pub fn scal_vec_join(dims: [usize; 3], lengths: [f64; 3], scal: Vec<f64>, vec: [Vec<f64>; 3]) -> Result<SpectralField> {
    let [b, c, d] = vec;
    SpectralField::from_components(dims, lengths, &[scal, b, c, d])
}

/// Spectral `div` of a 3-component real field.
pub fn divergence(dims: [usize; 3], lengths: [f64; 3], vec: &[Vec<f64>; 3]) -> Vec<f64> {
    let parts: Vec<Vec<f64>> = (0..3)
        .into_par_iter()
        .map(|a| spectral_derivative(dims, lengths, &vec[a], a))
        .collect();
    (0..vec[0].len()).map(|k| parts[0][k] + parts[1][k] + parts[2][k]).collect()
}

/// `(-Δ)^γ` as the multiplier `|ξ|^{2γ}`; the zero mode is kept only for `γ = 0`.
pub fn frac_laplacian(v: &SpectralField, gamma: f64) -> Result<SpectralField> {
    let wn = Wavenumbers::for_field(v);
    apply_real_multiplier(v, |k| laplacian_multiplier(wn.norm(k), gamma))
}

pub fn laplacian_multiplier(r: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        1.0
    } else if r == 0.0 {
        0.0
    } else {
        r.powf(2.0 * gamma)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DivVecReport {
    /// `‖div Vec f_α(∇)v + ½(-Δ)^{(α+1)/2} v‖`.
    pub residual: f64,
    /// `‖½(-Δ)^{(α+1)/2} v‖`.
    pub reference: f64,
    pub relative: f64,
}

/// Checks `div(Vec f_α(∇)v) = -½(-Δ)^{(α+1)/2} v` for a real field.
pub fn div_vec_identity(v: &SpectralField, alpha: f64) -> Result<DivVecReport> {
    v.require_real("div∘Vec identity")?;
    let w = frac_nabla_closed(v, alpha)?;
    let (_, vec) = scal_vec_split(&w);
    let d = divergence(v.dims(), v.lengths(), &vec);
    let rhs = frac_laplacian(v, (alpha + 1.0) / 2.0)?.components()[0].clone();
    let residual = d.iter().zip(&rhs).map(|(a, b)| (a + 0.5 * b).powi(2)).sum::<f64>().sqrt();
    let reference = 0.5 * rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
    let relative = if reference > 0.0 { residual / reference } else { residual };
    Ok(DivVecReport {
        residual,
        reference,
        relative,
    })
}

/// Per-mode multiplier of `div ∘ Vec ∘ f_β(∇)` on real scalar fields, built
/// from the symbols at `ξ` and `-ξ` (real outputs pair the two modes).
pub fn div_vec_multiplier(xi: [f64; 3], beta: f64) -> Complex64 {
    let r = norm3(xi);
    let m = frac_nabla_symbol(&gmat(xi), r, beta);
    let mm = frac_nabla_symbol(&gmat([-xi[0], -xi[1], -xi[2]]), r, beta);
    // real input a: (v1, v2) = (a, 0); outputs v1 = w + i x, v2 = y - i z
    let (m1, n1) = (m[(0, 0)], mm[(0, 0)].conj());
    let (m2, n2) = (m[(1, 0)], mm[(1, 0)].conj());
    let cx = (m1 - n1) / (2.0 * I);
    let cy = (m2 + n2) / 2.0;
    let cz = -(m2 - n2) / (2.0 * I);
    I * (cx * xi[0] + cy * xi[1] + cz * xi[2])
}

/// Invertibility of `Q_{c,s}(∇) = s² - (-Δ)` on a grid: per mode `s² - |ξ|²`.
#[derive(Debug, Clone, Serialize)]
pub struct NablaProbe {
    pub s: Quaternion,
    /// `min_ξ |s² - |ξ|²|`.
    pub min_distance: f64,
    /// `|ξ|` of the minimising mode.
    pub nearest_mode: f64,
    pub invertible: bool,
    pub s_is_real: bool,
}

pub fn s_spectrum_probe_nabla(dims: [usize; 3], lengths: [f64; 3], s: Quaternion) -> NablaProbe {
    let wn = Wavenumbers::new(dims, lengths);
    let s2 = s * s;
    let (min_distance, nearest_mode) = (0..wn.len())
        .map(|k| {
            let r = wn.norm(k);
            ((s2 - Quaternion::real(r * r)).norm(), r)
        })
        .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
    let tol = 1e-12 * s2.norm().max(1.0);
    NablaProbe {
        s,
        min_distance,
        nearest_mode,
        invertible: min_distance > tol,
        s_is_real: s.imag_norm() == 0.0,
    }
}
