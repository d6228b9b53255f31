//! The S-functional calculus of quaternionic matrices.
//!
//! `f(T)` is the contour integral of the S-resolvent against `f` over the
//! boundary of a slice domain in `C_I`:
//!
//! * left:  `f(T) = 1/(2π) ∫ S_L^{-1}(s,T) ds_I f(s)`,
//! * right: `f(T) = 1/(2π) ∫ f(s) ds_I S_R^{-1}(s,T)`,
//!
//! with `ds_I = -I ds`. Intrinsic rational functions are also evaluated
//! directly from their factorisation, which serves as an independent route.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::contour::ContourSpec;
use crate::error::{Error, Result};
use crate::expr::{poly_roots, Expr};
use crate::qmatrix::{embed_mul_scalar_left, embed_mul_scalar_right, unsplit, QMatrixOperator, ResolventKernel, SpectralSphere};
use crate::quat::Quaternion;
use crate::slice_fn::{cauchy_kernel_left, Domain, Excluded, IntrinsicSliceFunction, LeftSliceFunction, RightSliceFunction};

/// Outcome of a contour evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct FunCalcResult {
    pub operator: QMatrixOperator,
    /// Max-norm difference between the last two quadrature passes.
    pub est_quadrature_error: f64,
    pub nodes_used: usize,
    pub warnings: Vec<String>,
    pub contour: ContourSpec,
}

/// `ds_I = -I dz` as a quaternion on the slice of `axis`.
fn ds_i(dz: Complex64, axis: Quaternion) -> Quaternion {
    Quaternion::from_complex(Complex64::new(dz.im, -dz.re), axis)
}

/// First `n` columns of an embedded `2n`-row matrix, which determine the operator.
pub(crate) fn flatten(m: &DMatrix<Complex64>) -> Vec<f64> {
    let n = m.nrows() / 2;
    let mut out = Vec::with_capacity(4 * n * n);
    for j in 0..n {
        for i in 0..2 * n {
            let z = m[(i, j)];
            out.push(z.re);
            out.push(z.im);
        }
    }
    out
}

pub(crate) fn unflatten(n: usize, v: &[f64]) -> QMatrixOperator {
    let at = |i: usize, j: usize| {
        let k = 2 * (j * 2 * n + i);
        Complex64::new(v[k], v[k + 1])
    };
    QMatrixOperator::from_fn(n, |i, j| unsplit(at(i, j), at(n + i, j)))
}

fn check_domain(domain: &Domain, z: Complex64) -> Result<()> {
    if domain.contains(z.re, z.im) {
        Ok(())
    } else {
        Err(Error::Domain(format!("contour node {z} leaves the domain of the function")))
    }
}

fn run<F>(t: &QMatrixOperator, c: &ContourSpec, forbidden: &Excluded, node: F) -> Result<FunCalcResult>
where
    F: Fn(&ResolventKernel, Complex64, Complex64) -> Result<DMatrix<Complex64>> + Sync,
{
    c.validate()?;
    c.check_enclosure(&t.s_spectrum(), &[], forbidden)?;
    let kernel = ResolventKernel::new(t);
    let out = c.integrate(&|z, dz| Ok(flatten(&node(&kernel, z, dz)?)))?;
    let op = unflatten(t.n(), &out.value);
    Ok(FunCalcResult {
        operator: op,
        est_quadrature_error: out.est_error,
        nodes_used: out.nodes_used,
        warnings: out.warnings,
        contour: c.clone(),
    })
}

/// Left S-functional calculus over the contour `c`.
pub fn s_funcalc_left(f: &LeftSliceFunction, t: &QMatrixOperator, c: &ContourSpec) -> Result<FunCalcResult> {
    let axis = c.slice_axis;
    run(t, c, f.domain.excluded(), |k, z, dz| {
        check_domain(&f.domain, z)?;
        let s = Quaternion::from_complex(z, axis);
        let w = ds_i(dz, axis) * f.value_on_slice(z.re, z.im, axis) / TAU;
        Ok(embed_mul_scalar_right(&k.left(s)?, w))
    })
}

/// Right S-functional calculus over the contour `c`.
pub fn s_funcalc_right(f: &RightSliceFunction, t: &QMatrixOperator, c: &ContourSpec) -> Result<FunCalcResult> {
    let axis = c.slice_axis;
    run(t, c, f.domain.excluded(), |k, z, dz| {
        check_domain(&f.domain, z)?;
        let s = Quaternion::from_complex(z, axis);
        let w = f.value_on_slice(z.re, z.im, axis) * ds_i(dz, axis) / TAU;
        Ok(embed_mul_scalar_left(w, &k.right(s)?))
    })
}

/// Automatic contour around `σ_S(T)` avoiding `forbidden`.
pub fn auto_contour(t: &QMatrixOperator, forbidden: &Excluded) -> Result<ContourSpec> {
    ContourSpec::auto(&t.s_spectrum(), forbidden)
}

/// Left calculus of an intrinsic function, on `c` or on an automatic contour.
pub fn funcalc_intrinsic(f: &IntrinsicSliceFunction, t: &QMatrixOperator, c: Option<&ContourSpec>) -> Result<FunCalcResult> {
    let owned;
    let c = match c {
        Some(c) => c,
        None => {
            owned = auto_contour(t, f.domain.excluded())?;
            &owned
        }
    };
    s_funcalc_left(&f.to_left(), t, c)
}

/// Scalar Cauchy formula `f(p) = 1/(2π) ∫ S_L^{-1}(s,p) ds_I f(s)`.
pub fn cauchy_integral_left(f: &LeftSliceFunction, p: Quaternion, c: &ContourSpec) -> Result<Quaternion> {
    c.validate()?;
    let sp = p.slice_decompose();
    let sphere = SpectralSphere {
        u: sp.u,
        v: sp.v,
        mult: 1,
    };
    c.check_enclosure(&[sphere], &[], f.domain.excluded())?;
    let axis = c.slice_axis;
    let out = c.integrate(&|z, dz| {
        check_domain(&f.domain, z)?;
        let s = Quaternion::from_complex(z, axis);
        let w = cauchy_kernel_left(s, p)? * ds_i(dz, axis) * f.value_on_slice(z.re, z.im, axis) / TAU;
        Ok(w.to_array().to_vec())
    })?;
    Ok(Quaternion::new(out.value[0], out.value[1], out.value[2], out.value[3]))
}

/// Real linear factors `s - r` and quadratic factors `Q_p(s)` of a real polynomial.
fn factorise(p: &[f64]) -> Result<(f64, Vec<f64>, Vec<Complex64>)> {
    let roots = poly_roots(p);
    let lead = *p
        .iter()
        .rev()
        .find(|c| **c != 0.0)
        .ok_or_else(|| Error::InvalidParameter("zero denominator".into()))?;
    let mut real = Vec::new();
    let mut pairs = Vec::new();
    for r in &roots {
        let tol = 1e-9 * r.norm().max(1.0);
        if r.im.abs() <= tol {
            real.push(r.re);
        } else if r.im > 0.0 {
            pairs.push(*r);
        }
    }
    if real.len() + 2 * pairs.len() != roots.len() {
        return Err(Error::InvalidParameter("roots of the denominator do not pair up".into()));
    }
    Ok((lead, real, pairs))
}

/// `P[T] Q[T]^{-1}` for real polynomials `P`, `Q` (ascending coefficients).
///
/// `Q[T]^{-1}` is assembled from the factors `(T - r I)^{-1}` and
/// `Q_p(T)^{-1}` of its real and complex-pair roots.
pub fn rational_calculus(num: &[f64], den: &[f64], t: &QMatrixOperator) -> Result<QMatrixOperator> {
    let (lead, real, pairs) = factorise(den)?;
    let n = t.n();
    let mut acc = t.poly_real(num).scale(1.0 / lead);
    let pole = |e: Error, r: Complex64| match e {
        Error::Singular(m) => Error::SSpectrum(format!("pole {r} meets the S-spectrum ({m})")),
        other => other,
    };
    for r in real {
        let f = t - &QMatrixOperator::scalar(n, Quaternion::real(r));
        acc = &acc * &f.inverse().map_err(|e| pole(e, Complex64::from(r)))?;
    }
    for p in pairs {
        let f = t.q_poly(Quaternion::new(p.re, p.im, 0.0, 0.0));
        acc = &acc * &f.inverse().map_err(|e| pole(e, p))?;
    }
    Ok(acc)
}

/// [`rational_calculus`] of a parsed expression.
pub fn rational_calculus_expr(e: &Expr, t: &QMatrixOperator) -> Result<QMatrixOperator> {
    let (n, d) = e
        .as_rational()
        .ok_or_else(|| Error::InvalidParameter(format!("{e} is not a rational function")))?;
    rational_calculus(&n, &d, t)
}

/// Riesz projection `E = 1/(2π) ∫ ds_I S_R^{-1}(s,T)` onto the spheres in `subset`.
pub fn spectral_projection(t: &QMatrixOperator, subset: &[SpectralSphere], c: Option<&ContourSpec>) -> Result<FunCalcResult> {
    let spectrum = t.s_spectrum();
    let close = |a: &SpectralSphere, b: &SpectralSphere| (a.u - b.u).hypot(a.v - b.v) <= 1e-6 * a.modulus().max(1.0);
    for s in subset {
        if !spectrum.iter().any(|x| close(x, s)) {
            return Err(Error::InvalidParameter(format!("({}, {}) is not in the S-spectrum", s.u, s.v)));
        }
    }
    let (inside, outside): (Vec<SpectralSphere>, Vec<SpectralSphere>) =
        spectrum.iter().partition(|x| subset.iter().any(|s| close(x, s)));
    let owned;
    let c = match c {
        Some(c) => c,
        None => {
            owned = ContourSpec::around(&inside, &outside, &Excluded::default())?;
            &owned
        }
    };
    c.validate()?;
    c.check_enclosure(&inside, &outside, &Excluded::default())?;
    let axis = c.slice_axis;
    let kernel = ResolventKernel::new(t);
    let out = c.integrate(&|z, dz| {
        let s = Quaternion::from_complex(z, axis);
        Ok(flatten(&embed_mul_scalar_left(ds_i(dz, axis) / TAU, &kernel.right(s)?)))
    })?;
    Ok(FunCalcResult {
        operator: unflatten(t.n(), &out.value),
        est_quadrature_error: out.est_error,
        nodes_used: out.nodes_used,
        warnings: out.warnings,
        contour: c.clone(),
    })
}

/// Hausdorff distance between two sets of spheres, measured in the `(u, v)` half-plane.
pub fn sphere_hausdorff(a: &[SpectralSphere], b: &[SpectralSphere]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let d = |x: &SpectralSphere, y: &SpectralSphere| (x.u - y.u).hypot(x.v.abs() - y.v.abs());
    let one_way = |p: &[SpectralSphere], q: &[SpectralSphere]| {
        p.iter()
            .map(|x| q.iter().map(|y| d(x, y)).fold(f64::INFINITY, f64::min))
            .fold(0.0f64, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

/// Tolerance of [`spectral_mapping_check`].
pub const SPECTRAL_MAPPING_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralMappingReport {
    /// `{f(s) : s ∈ σ_S(T)}`.
    pub image: Vec<SpectralSphere>,
    /// `σ_S(f(T))`.
    pub spectrum_of_f: Vec<SpectralSphere>,
    pub hausdorff: f64,
    pub pass: bool,
}

/// Compares `f(σ_S(T))` with `σ_S(f(T))`.
pub fn spectral_mapping_check(f: &IntrinsicSliceFunction, t: &QMatrixOperator, c: Option<&ContourSpec>) -> Result<SpectralMappingReport> {
    let ft = funcalc_intrinsic(f, t, c)?.operator;
    let image: Vec<SpectralSphere> = t
        .s_spectrum()
        .iter()
        .map(|s| {
            let w = f.eval_complex(Complex64::new(s.u, s.v));
            SpectralSphere {
                u: w.re,
                v: w.im.abs(),
                mult: s.mult,
            }
        })
        .collect();
    let spectrum_of_f = ft.s_spectrum();
    let hausdorff = sphere_hausdorff(&image, &spectrum_of_f);
    Ok(SpectralMappingReport {
        image,
        spectrum_of_f,
        hausdorff,
        pass: hausdorff <= SPECTRAL_MAPPING_TOL,
    })
}
