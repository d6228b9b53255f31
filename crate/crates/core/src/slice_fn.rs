//! Slice hyperholomorphic functions given by their restriction to the upper
//! half of a complex plane, the ⋆-products, conjugation/symmetrisation and
//! the scalar Cauchy kernels.
//!
//! A left slice function is `f(p) = α(u,v) + I_p β(u,v)` for
//! `p = u + I_p v`; only `v >= 0` is ever sampled and `v < 0` follows from
//! `α(u,-v) = α(u,v)`, `β(u,-v) = -β(u,v)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quat::{Quaternion, CUT_GUARD};

/// Primitive axially symmetric region, described in the `(u, v)` half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// `|arg(u + iv)| < half_angle`, origin excluded.
    Sector { half_angle: f64 },
    /// `r_in < |u + iv| < r_out`.
    Annulus { r_in: f64, r_out: f64 },
    /// Disc around `(cu, cv)` together with its mirror image.
    Ball { cu: f64, cv: f64, r: f64 },
    /// `u > u_min`.
    HalfPlane { u_min: f64 },
}

impl Region {
    pub fn contains(&self, u: f64, v: f64) -> bool {
        match *self {
            Region::Sector { half_angle } => (u != 0.0 || v != 0.0) && v.abs().atan2(u) < half_angle,
            Region::Annulus { r_in, r_out } => {
                let r = u.hypot(v);
                r_in < r && r < r_out
            }
            Region::Ball { cu, cv, r } => (u - cu).hypot(v - cv) < r || (u - cu).hypot(-v - cv) < r,
            Region::HalfPlane { u_min } => u > u_min,
        }
    }
}

/// Real ray `(-inf, start]` or `[start, +inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub start: f64,
    pub toward_negative: bool,
}

impl Ray {
    pub fn contains_real(&self, u: f64) -> bool {
        if self.toward_negative {
            u <= self.start
        } else {
            u >= self.start
        }
    }

    /// Distance from `z` to the ray in the complex plane.
    pub fn distance(&self, z: Complex64) -> f64 {
        if self.contains_real(z.re) {
            z.im.abs()
        } else {
            (z - Complex64::from(self.start)).norm()
        }
    }
}

/// Points and rays removed from a domain (poles and branch cuts).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Excluded {
    /// Representatives `u + i v` with `v >= 0`.
    pub points: Vec<Complex64>,
    pub rays: Vec<Ray>,
}

impl Excluded {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.rays.is_empty()
    }

    pub fn extend(&mut self, other: &Excluded) {
        self.points.extend_from_slice(&other.points);
        self.rays.extend_from_slice(&other.rays);
    }

    pub fn hits(&self, u: f64, v: f64) -> bool {
        let v = v.abs();
        let z = Complex64::new(u, v);
        let on_ray = self
            .rays
            .iter()
            .any(|r| r.contains_real(u) && v <= CUT_GUARD * z.norm().max(r.start.abs()));
        let on_point = self.points.iter().any(|p| (z - p).norm() <= 1e-12 * p.norm().max(1.0));
        on_ray || on_point
    }

    /// Distance from `z` (any sign of `Im z`) to the mirrored excluded set.
    pub fn distance(&self, z: Complex64) -> f64 {
        let mut d = f64::INFINITY;
        for p in &self.points {
            d = d.min((z - p).norm()).min((z - p.conj()).norm());
        }
        for r in &self.rays {
            d = d.min(r.distance(z));
        }
        d
    }
}

/// Intersection of unions of [`Region`]s minus an [`Excluded`] set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Domain {
    clauses: Vec<Vec<Region>>,
    excluded: Excluded,
}

impl Domain {
    /// The whole quaternion space.
    pub fn whole() -> Self {
        Self::default()
    }

    /// Union of the given regions.
    pub fn any_of(regions: Vec<Region>) -> Self {
        Self {
            clauses: vec![regions],
            excluded: Excluded::default(),
        }
    }

    pub fn region(r: Region) -> Self {
        Self::any_of(vec![r])
    }

    pub fn without_point(mut self, u: f64, v: f64) -> Self {
        self.excluded.points.push(Complex64::new(u, v.abs()));
        self
    }

    pub fn without_ray(mut self, ray: Ray) -> Self {
        self.excluded.rays.push(ray);
        self
    }

    pub fn without(mut self, ex: &Excluded) -> Self {
        self.excluded.extend(ex);
        self
    }

    pub fn intersect(&self, other: &Domain) -> Domain {
        let mut out = self.clone();
        out.clauses.extend(other.clauses.iter().cloned());
        out.excluded.extend(&other.excluded);
        out
    }

    pub fn excluded(&self) -> &Excluded {
        &self.excluded
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|r| r.contains(u, v))) && !self.excluded.hits(u, v)
    }

    fn check(&self, p: Quaternion, u: f64, v: f64) -> Result<()> {
        if self.contains(u, v) {
            Ok(())
        } else {
            Err(Error::Domain(format!("{p} is outside the domain of the function")))
        }
    }
}

type ComplexFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;
type PairFn = Arc<dyn Fn(f64, f64) -> (Quaternion, Quaternion) + Send + Sync>;

/// `f = α + I β` with real `α`, `β`, given by its values on the upper half-plane.
#[derive(Clone)]
pub struct IntrinsicSliceFunction {
    f: ComplexFn,
    pub domain: Domain,
    pub label: String,
}

impl fmt::Debug for IntrinsicSliceFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntrinsicSliceFunction")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .finish()
    }
}

impl IntrinsicSliceFunction {
    pub fn new(f: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static, domain: Domain) -> Self {
        Self {
            f: Arc::new(f),
            domain,
            label: String::from("f"),
        }
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| Complex64::from(c), Domain::whole()).labelled(format!("{c}"))
    }

    pub fn identity() -> Self {
        Self::new(|z| z, Domain::whole()).labelled("s")
    }

    /// `Σ c_k s^k` with real coefficients in ascending order.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        let label = format!("poly{coeffs:?}");
        Self::new(
            move |z| coeffs.iter().rev().fold(Complex64::from(0.0), |acc, &c| acc * z + c),
            Domain::whole(),
        )
        .labelled(label)
    }

    /// `Q_a(s) = s² - 2 Re(a) s + |a|²`.
    pub fn q_poly(a: Quaternion) -> Self {
        Self::polynomial(vec![a.norm_sqr(), -2.0 * a.w, 1.0]).labelled(format!("Q_[{a}]"))
    }

    /// `s^alpha`, cut along `(-inf, 0]`.
    pub fn power(alpha: f64) -> Self {
        let cut = Ray {
            start: 0.0,
            toward_negative: true,
        };
        Self::new(move |z| (z.ln() * alpha).exp(), Domain::whole().without_ray(cut)).labelled(format!("s^{alpha}"))
    }

    pub fn log() -> Self {
        let cut = Ray {
            start: 0.0,
            toward_negative: true,
        };
        Self::new(|z| z.ln(), Domain::whole().without_ray(cut)).labelled("log")
    }

    /// Value on the plane `C_I` at `z = u + I v`, any sign of `v`.
    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        if z.im < 0.0 {
            (self.f)(z.conj()).conj()
        } else {
            (self.f)(z)
        }
    }

    /// `(α(u,v), β(u,v))`.
    pub fn eval_pair(&self, u: f64, v: f64) -> (f64, f64) {
        let w = self.eval_complex(Complex64::new(u, v));
        (w.re, w.im)
    }

    pub fn eval(&self, p: Quaternion) -> Result<Quaternion> {
        let sp = p.slice_decompose();
        self.domain.check(p, sp.u, sp.v)?;
        let w = self.eval_complex(sp.complex());
        Ok(Quaternion::from_slice(w.re, w.im, sp.axis))
    }

    pub fn to_left(&self) -> LeftSliceFunction {
        let g = self.clone();
        LeftSliceFunction::new(
            move |u, v| {
                let (a, b) = g.eval_pair(u, v);
                (Quaternion::real(a), Quaternion::real(b))
            },
            self.domain.clone(),
        )
    }

    pub fn to_right(&self) -> RightSliceFunction {
        let g = self.clone();
        RightSliceFunction::new(
            move |u, v| {
                let (a, b) = g.eval_pair(u, v);
                (Quaternion::real(a), Quaternion::real(b))
            },
            self.domain.clone(),
        )
    }

    /// Pointwise composition `self ∘ inner` with the given domain.
    pub fn compose(&self, inner: &IntrinsicSliceFunction, domain: Domain) -> Self {
        let (f, g) = (self.clone(), inner.clone());
        Self::new(move |z| f.eval_complex(g.eval_complex(z)), domain).labelled(format!("{}∘{}", self.label, inner.label))
    }

    /// Pointwise product (intrinsic functions commute).
    pub fn mul(&self, other: &IntrinsicSliceFunction) -> Self {
        let (f, g) = (self.clone(), other.clone());
        Self::new(move |z| f.eval_complex(z) * g.eval_complex(z), self.domain.intersect(&other.domain))
    }

    /// Max Cauchy–Riemann residual over `points` with central differences.
    pub fn validate(&self, points: &[(f64, f64)], h: f64) -> f64 {
        self.to_left().validate(points, h)
    }
}

fn mirror(pair: (Quaternion, Quaternion), v: f64) -> (Quaternion, Quaternion) {
    if v < 0.0 {
        (pair.0, -pair.1)
    } else {
        pair
    }
}

macro_rules! slice_fn_common {
    ($name:ident) => {
        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.debug_struct(stringify!($name)).field("domain", &self.domain).finish()
            }
        }

        impl $name {
            pub fn new(f: impl Fn(f64, f64) -> (Quaternion, Quaternion) + Send + Sync + 'static, domain: Domain) -> Self {
                Self { f: Arc::new(f), domain }
            }

            /// `(α(u,v), β(u,v))` for any sign of `v`.
            pub fn eval_pair(&self, u: f64, v: f64) -> (Quaternion, Quaternion) {
                mirror((self.f)(u, v.abs()), v)
            }

            pub fn constant(b: Quaternion) -> Self {
                Self::new(move |_, _| (b, Quaternion::ZERO), Domain::whole())
            }

            pub fn identity() -> Self {
                Self::new(|u, v| (Quaternion::real(u), Quaternion::real(v)), Domain::whole())
            }

            /// Polynomial with quaternionic coefficients in ascending order, placed
            /// on the side opposite to the imaginary unit.
            pub fn polynomial(coeffs: Vec<Quaternion>) -> Self {
                Self::new(
                    move |u, v| {
                        let z = Complex64::new(u, v);
                        let mut zk = Complex64::from(1.0);
                        let (mut a, mut b) = (Quaternion::ZERO, Quaternion::ZERO);
                        for c in &coeffs {
                            a += *c * zk.re;
                            b += *c * zk.im;
                            zk *= z;
                        }
                        (a, b)
                    },
                    Domain::whole(),
                )
            }

            pub fn add(&self, g: &Self) -> Self {
                let (f1, f2) = (self.clone(), g.clone());
                Self::new(
                    move |u, v| {
                        let (a, b) = f1.eval_pair(u, v);
                        let (c, d) = f2.eval_pair(u, v);
                        (a + c, b + d)
                    },
                    self.domain.intersect(&g.domain),
                )
            }

            /// Max Cauchy–Riemann residual `|∂uα - ∂vβ| + |∂vα + ∂uβ|` at the points.
            pub fn validate(&self, points: &[(f64, f64)], h: f64) -> f64 {
                let mut worst = 0.0f64;
                for &(u, v) in points {
                    let (au1, bu1) = self.eval_pair(u + h, v);
                    let (au0, bu0) = self.eval_pair(u - h, v);
                    let (av1, bv1) = self.eval_pair(u, v + h);
                    let (av0, bv0) = self.eval_pair(u, v - h);
                    let inv = 0.5 / h;
                    let r1 = ((au1 - au0) - (bv1 - bv0)) * inv;
                    let r2 = ((av1 - av0) + (bu1 - bu0)) * inv;
                    worst = worst.max(r1.norm()).max(r2.norm());
                }
                worst
            }
        }
    };
}

/// `f(p) = α(u,v) + I_p β(u,v)` with quaternion-valued `α`, `β`.
#[derive(Clone)]
pub struct LeftSliceFunction {
    f: PairFn,
    pub domain: Domain,
}

slice_fn_common!(LeftSliceFunction);

impl LeftSliceFunction {
    /// Value at `u + axis v` on the slice of `axis` (any sign of `v`).
    pub fn value_on_slice(&self, u: f64, v: f64, axis: Quaternion) -> Quaternion {
        let (a, b) = self.eval_pair(u, v);
        a + axis * b
    }

    /// `g b` for a constant `b` on the right.
    pub fn mul_const_right(&self, b: Quaternion) -> Self {
        let f = self.clone();
        Self::new(
            move |u, v| {
                let (x, y) = f.eval_pair(u, v);
                (x * b, y * b)
            },
            self.domain.clone(),
        )
    }
}

/// Evaluates a left slice function at `p`.
pub fn eval_left(f: &LeftSliceFunction, p: Quaternion) -> Result<Quaternion> {
    let sp = p.slice_decompose();
    f.domain.check(p, sp.u, sp.v)?;
    Ok(f.value_on_slice(sp.u, sp.v, sp.axis))
}

/// `f(p) = α(u,v) + β(u,v) I_p`.
#[derive(Clone)]
pub struct RightSliceFunction {
    f: PairFn,
    pub domain: Domain,
}

slice_fn_common!(RightSliceFunction);

impl RightSliceFunction {
    pub fn value_on_slice(&self, u: f64, v: f64, axis: Quaternion) -> Quaternion {
        let (a, b) = self.eval_pair(u, v);
        a + b * axis
    }

    /// `b g` for a constant `b` on the left.
    pub fn mul_const_left(&self, b: Quaternion) -> Self {
        let f = self.clone();
        Self::new(
            move |u, v| {
                let (x, y) = f.eval_pair(u, v);
                (b * x, b * y)
            },
            self.domain.clone(),
        )
    }
}

pub fn eval_right(f: &RightSliceFunction, p: Quaternion) -> Result<Quaternion> {
    let sp = p.slice_decompose();
    f.domain.check(p, sp.u, sp.v)?;
    Ok(f.value_on_slice(sp.u, sp.v, sp.axis))
}

/// `f ⋆ₗ g = (αγ - βδ) + I (αδ + βγ)`.
pub fn star_left(f: &LeftSliceFunction, g: &LeftSliceFunction) -> LeftSliceFunction {
    let (f1, g1) = (f.clone(), g.clone());
    LeftSliceFunction::new(
        move |u, v| {
            let (a, b) = f1.eval_pair(u, v);
            let (c, d) = g1.eval_pair(u, v);
            (a * c - b * d, a * d + b * c)
        },
        f.domain.intersect(&g.domain),
    )
}

/// `(f^c, f^s)` with `f^c = conj α + I conj β` and `f^s = f ⋆ₗ f^c`.
pub fn conj_sym(f: &LeftSliceFunction) -> (LeftSliceFunction, IntrinsicSliceFunction) {
    let fc_src = f.clone();
    let fc = LeftSliceFunction::new(
        move |u, v| {
            let (a, b) = fc_src.eval_pair(u, v);
            (a.conj(), b.conj())
        },
        f.domain.clone(),
    );
    let fs_src = f.clone();
    let fs = IntrinsicSliceFunction::new(
        move |z| {
            let (a, b) = fs_src.eval_pair(z.re, z.im);
            Complex64::new(a.norm_sqr() - b.norm_sqr(), 2.0 * (a * b.conj()).w)
        },
        f.domain.clone(),
    );
    (fc, fs)
}

/// `f^{-⋆ₗ} = (f^s)^{-1} f^c`, defined where `f^s` does not vanish.
pub fn star_inverse(f: &LeftSliceFunction) -> LeftSliceFunction {
    let (fc, fs) = conj_sym(f);
    LeftSliceFunction::new(
        move |u, v| {
            let h = fs.eval_complex(Complex64::new(u, v)).inv();
            let (a, b) = fc.eval_pair(u, v);
            (a * h.re - b * h.im, b * h.re + a * h.im)
        },
        f.domain.clone(),
    )
}

fn kernel_q(s: Quaternion, p: Quaternion) -> Result<Quaternion> {
    let q = p * p - p * (2.0 * s.w) + Quaternion::real(s.norm_sqr());
    if q.norm() < 1e-13 * p.norm_sqr().max(1.0) {
        return Err(Error::Singular(format!("{p} lies on the sphere of {s}")));
    }
    Ok(q)
}

/// `S_L^{-1}(s,p) = -(p² - 2 s0 p + |s|²)^{-1} (p - conj s)`.
pub fn cauchy_kernel_left(s: Quaternion, p: Quaternion) -> Result<Quaternion> {
    Ok(-(kernel_q(s, p)?.inv() * (p - s.conj())))
}

/// `S_R^{-1}(s,p) = -(p - conj s)(p² - 2 s0 p + |s|²)^{-1}`.
pub fn cauchy_kernel_right(s: Quaternion, p: Quaternion) -> Result<Quaternion> {
    Ok(-((p - s.conj()) * kernel_q(s, p)?.inv()))
}

/// `½(1 - I_p J) f(u + J v) + ½(1 + I_p J) f(u - J v)`.
pub fn representation_formula(f: &LeftSliceFunction, p: Quaternion, j: Quaternion) -> Result<Quaternion> {
    let sp = p.slice_decompose();
    f.domain.check(p, sp.u, sp.v)?;
    let plus = f.value_on_slice(sp.u, sp.v, j);
    let minus = f.value_on_slice(sp.u, -sp.v, j);
    let ij = sp.axis * j;
    Ok((Quaternion::ONE - ij) * plus * 0.5 + (Quaternion::ONE + ij) * minus * 0.5)
}

/// Angle helper used by domain descriptors: `arg(u + iv)` in `[0, pi]`.
pub fn slice_arg(u: f64, v: f64) -> f64 {
    v.abs().atan2(u).min(PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_quaternion, random_unit_imaginary, seeded};
    use proptest::prelude::*;

    fn q(w: f64, x: f64, y: f64, z: f64) -> Quaternion {
        Quaternion::new(w, x, y, z)
    }

    fn close(a: Quaternion, b: Quaternion, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1.0)
    }

    #[test]
    fn identity_evaluates_to_point() {
        let p = q(1.0, 0.0, 0.0, 2.0);
        assert!(close(eval_left(&LeftSliceFunction::identity(), p).unwrap(), p, 1e-15));
    }

    #[test]
    fn square_matches_product() {
        let f = IntrinsicSliceFunction::polynomial(vec![0.0, 0.0, 1.0]).to_left();
        let mut rng = seeded(1);
        for _ in 0..20 {
            let p = random_quaternion(&mut rng, 2.0);
            assert!(close(eval_left(&f, p).unwrap(), p * p, 1e-14));
        }
    }

    #[test]
    fn domain_errors() {
        let f = IntrinsicSliceFunction::power(0.5);
        assert!(matches!(f.eval(Quaternion::real(-1.0)), Err(Error::Domain(_))));
        assert!(f.eval(q(-1.0, 0.1, 0.0, 0.0)).is_ok());
        let g = LeftSliceFunction::new(|u, v| (Quaternion::real(u), Quaternion::real(v)), Domain::region(Region::Ball { cu: 0.0, cv: 0.0, r: 1.0 }));
        assert!(eval_left(&g, q(2.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn regions() {
        let s = Region::Sector { half_angle: 0.5 };
        assert!(s.contains(1.0, 0.2) && !s.contains(0.0, 1.0) && !s.contains(0.0, 0.0));
        let a = Region::Annulus { r_in: 1.0, r_out: 2.0 };
        assert!(a.contains(0.0, 1.5) && !a.contains(0.5, 0.0));
        let b = Region::Ball { cu: 1.0, cv: 1.0, r: 0.5 };
        assert!(b.contains(1.0, -1.2) && !b.contains(1.0, 0.0));
        let d = Domain::any_of(vec![a, b]).intersect(&Domain::region(Region::HalfPlane { u_min: 0.0 }));
        assert!(d.contains(1.5, 0.0) && !d.contains(-1.5, 0.0));
    }

    #[test]
    fn star_product_examples() {
        let mut rng = seeded(2);
        let b = random_quaternion(&mut rng, 1.0);
        let sq = IntrinsicSliceFunction::polynomial(vec![0.0, 0.0, 1.0]).to_left();
        let prod = star_left(&sq, &LeftSliceFunction::constant(b));
        let p = random_quaternion(&mut rng, 1.0);
        assert!(close(eval_left(&prod, p).unwrap(), p * p * b, 1e-14));
        let one = star_left(&sq, &LeftSliceFunction::constant(Quaternion::ONE));
        assert!(close(eval_left(&one, p).unwrap(), eval_left(&sq, p).unwrap(), 1e-15));
    }

    fn s_minus(a: Quaternion) -> LeftSliceFunction {
        LeftSliceFunction::new(move |u, v| (Quaternion::real(u) - a, Quaternion::real(v)), Domain::whole())
    }

    #[test]
    fn star_of_linear_factors_is_q_poly() {
        let mut rng = seeded(3);
        for _ in 0..10 {
            let a = random_quaternion(&mut rng, 2.0);
            let prod = star_left(&s_minus(a), &s_minus(a.conj()));
            let qa = IntrinsicSliceFunction::q_poly(a);
            // real coefficients: β-part and α-part are real on every slice
            for (u, v) in [(0.3, 0.7), (-1.0, 2.0), (2.0, 0.0)] {
                let (x, y) = prod.eval_pair(u, v);
                let (qx, qy) = qa.eval_pair(u, v);
                assert!((x - Quaternion::real(qx)).norm() < 1e-13);
                assert!((y - Quaternion::real(qy)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn symmetrisation_examples() {
        let mut rng = seeded(4);
        let a = random_quaternion(&mut rng, 2.0);
        let (_, fs) = conj_sym(&s_minus(a));
        let qa = IntrinsicSliceFunction::q_poly(a);
        for (u, v) in [(0.3, 0.7), (-1.0, 2.0)] {
            let (x, y) = fs.eval_pair(u, v);
            let (qx, qy) = qa.eval_pair(u, v);
            assert!((x - qx).abs() < 1e-13 && (y - qy).abs() < 1e-13);
        }
        let f = IntrinsicSliceFunction::power(0.7);
        let (fc, fs) = conj_sym(&f.to_left());
        let p = q(0.5, 0.3, -0.8, 0.2);
        let fp = f.eval(p).unwrap();
        assert!(close(eval_left(&fc, p).unwrap(), fp, 1e-15));
        assert!(close(fs.eval(p).unwrap(), fp * fp, 1e-14));
    }

    #[test]
    fn symmetrisation_vanishes_on_zero_sphere() {
        let a = q(0.5, 0.0, 1.0, 0.0);
        let (_, fs) = conj_sym(&s_minus(a));
        let other = Quaternion::from_slice(0.5, 1.0, Quaternion::E3);
        assert!(fs.eval(other).unwrap().norm() < 1e-14);
    }

    #[test]
    fn star_inverse_norm_identity() {
        let mut rng = seeded(5);
        for _ in 0..20 {
            let b = random_quaternion(&mut rng, 1.0);
            let c = random_quaternion(&mut rng, 1.0);
            // f(s) = s b + c
            let f = LeftSliceFunction::new(move |u, v| (b * u + c, b * v), Domain::whole());
            let inv = star_inverse(&f);
            let (fc, _) = conj_sym(&f);
            let p = random_quaternion(&mut rng, 1.5);
            // f^s = f^c ⋆ f gives |f^s(p)| = |f^c(p)| |f(p~)| with p~ = f^c(p)^{-1} p f^c(p)
            let w = eval_left(&fc, p).unwrap();
            let pt = w.inv() * p * w;
            assert!(pt.same_sphere(p, 1e-12));
            let lhs = eval_left(&inv, p).unwrap().norm();
            let rhs = 1.0 / eval_left(&f, pt).unwrap().norm();
            assert!((lhs - rhs).abs() <= 1e-12 * rhs, "{lhs} vs {rhs}");
            let one = eval_left(&star_left(&f, &inv), p).unwrap();
            assert!(close(one, Quaternion::ONE, 1e-12));
        }
    }

    #[test]
    fn star_inverse_norm_identity_intrinsic() {
        // for intrinsic f the conjugation point f(p) conj(p) f(p)^{-1} works as well
        let f = IntrinsicSliceFunction::polynomial(vec![1.0, -0.5, 2.0]).to_left();
        let inv = star_inverse(&f);
        let mut rng = seeded(15);
        for _ in 0..20 {
            let p = random_quaternion(&mut rng, 1.5);
            let fp = eval_left(&f, p).unwrap();
            let pt = fp * p.conj() * fp.inv();
            let lhs = eval_left(&inv, p).unwrap().norm();
            let rhs = 1.0 / eval_left(&f, pt).unwrap().norm();
            assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }
    }

    #[test]
    fn kernel_examples() {
        let k = cauchy_kernel_left(Quaternion::real(2.0), Quaternion::E1).unwrap();
        // same slice: (2 - e1)^{-1} = (2 + e1)/5
        assert!(close(k, q(2.0, 1.0, 0.0, 0.0) / 5.0, 1e-15));
        assert!(matches!(cauchy_kernel_left(Quaternion::E1, Quaternion::E2), Err(Error::Singular(_))));
        let (s, p) = (q(1.0, 1.0, 0.0, 0.0), Quaternion::E2 * 2.0);
        let qsp = p * p - p * 2.0 + Quaternion::real(2.0);
        let expect = -(qsp.inv() * (p - s.conj()));
        assert!(close(cauchy_kernel_left(s, p).unwrap(), expect, 1e-15));
    }

    #[test]
    fn kernel_same_slice_is_inverse() {
        let mut rng = seeded(6);
        for _ in 0..20 {
            let i = random_unit_imaginary(&mut rng);
            let s = Quaternion::from_slice(0.3, 1.7, i);
            let p = Quaternion::from_slice(-0.4, 0.2, i);
            let r = (s - p).inv();
            assert!(close(cauchy_kernel_left(s, p).unwrap(), r, 1e-14));
            assert!(close(cauchy_kernel_right(s, p).unwrap(), r, 1e-14));
        }
    }

    #[test]
    fn kernel_is_slice_regular_in_both_variables() {
        let s = q(0.4, 0.3, -1.1, 0.6);
        let p = q(-0.7, 0.9, 0.2, 0.5);
        // left regular in p
        let in_p = LeftSliceFunction::new(
            move |u, v| {
                let plus = cauchy_kernel_left(s, Quaternion::from_slice(u, v, Quaternion::E1)).unwrap();
                let minus = cauchy_kernel_left(s, Quaternion::from_slice(u, -v, Quaternion::E1)).unwrap();
                let alpha = (plus + minus) * 0.5;
                let beta = -(Quaternion::E1 * (plus - minus)) * 0.5;
                (alpha, beta)
            },
            Domain::whole(),
        );
        let sp = p.slice_decompose();
        assert!(in_p.validate(&[(sp.u, sp.v), (1.5, 0.2)], 1e-5) < 1e-6);
        assert!(close(in_p.value_on_slice(sp.u, sp.v, sp.axis), cauchy_kernel_left(s, p).unwrap(), 1e-12));
        // right regular in s
        let in_s = RightSliceFunction::new(
            move |u, v| {
                let plus = cauchy_kernel_left(Quaternion::from_slice(u, v, Quaternion::E2), p).unwrap();
                let minus = cauchy_kernel_left(Quaternion::from_slice(u, -v, Quaternion::E2), p).unwrap();
                let alpha = (plus + minus) * 0.5;
                let beta = -((plus - minus) * Quaternion::E2) * 0.5;
                (alpha, beta)
            },
            Domain::whole(),
        );
        let ss = s.slice_decompose();
        assert!(in_s.validate(&[(ss.u, ss.v), (2.0, 0.5)], 1e-5) < 1e-6);
        assert!(close(in_s.value_on_slice(ss.u, ss.v, ss.axis), cauchy_kernel_left(s, p).unwrap(), 1e-12));
    }

    #[test]
    fn cr_validation_flags_non_holomorphic() {
        let good = IntrinsicSliceFunction::power(0.5);
        assert!(good.validate(&[(1.0, 0.5), (0.2, 2.0)], 1e-5) < 1e-6);
        let bad = IntrinsicSliceFunction::new(|z| z.conj(), Domain::whole());
        assert!(bad.validate(&[(1.0, 0.5)], 1e-5) > 0.5);
    }

    proptest! {
        #[test]
        fn intrinsic_conjugate_symmetry(w in -2.0..2.0f64, x in -2.0..2.0f64, y in -2.0..2.0f64, z in -2.0..2.0f64, a in 0.1..1.9f64) {
            let p = Quaternion::new(w, x, y, z);
            prop_assume!(!p.on_negative_cut() && p.norm() > 1e-3);
            let f = IntrinsicSliceFunction::power(a).to_left();
            let lhs = eval_left(&f, p.conj()).unwrap();
            let rhs = eval_left(&f, p).unwrap().conj();
            prop_assert!((lhs - rhs).norm() <= 1e-13 * rhs.norm().max(1.0));
        }

        #[test]
        fn representation_formula_holds(seed in any::<u64>()) {
            let mut rng = seeded(seed);
            let b = random_quaternion(&mut rng, 1.0);
            let c = random_quaternion(&mut rng, 1.0);
            // a genuinely non-intrinsic left function: s^2 b + s c
            let f = LeftSliceFunction::new(move |u, v| {
                let z = Complex64::new(u, v);
                let z2 = z * z;
                (b * z2.re + c * z.re, b * z2.im + c * z.im)
            }, Domain::whole());
            let p = random_quaternion(&mut rng, 2.0);
            let j = random_unit_imaginary(&mut rng);
            let direct = eval_left(&f, p).unwrap();
            let rep = representation_formula(&f, p, j).unwrap();
            prop_assert!((direct - rep).norm() <= 1e-12 * direct.norm().max(1.0));
        }

        #[test]
        fn right_kernel_is_negated_left_with_swapped_arguments(seed in any::<u64>()) {
            let mut rng = seeded(seed);
            let s = random_quaternion(&mut rng, 2.0);
            let p = random_quaternion(&mut rng, 2.0);
            prop_assume!(!s.same_sphere(p, 1e-3));
            let a = cauchy_kernel_right(s, p).unwrap();
            let b = cauchy_kernel_left(p, s).unwrap();
            prop_assert!((a + b).norm() <= 1e-12 * a.norm().max(1.0));
        }
    }
}
