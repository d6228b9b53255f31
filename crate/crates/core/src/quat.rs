//! Quaternion arithmetic, slice decomposition and the intrinsic scalar
//! functions `log` and `pow`.
//!
//! Every quaternion `p` lies in a complex plane `C_I = {u + I v}` spanned by
//! `1` and a unit imaginary `I`. Slice functions are evaluated by locating
//! that plane (see [`Quaternion::slice_decompose`]) and working with the
//! complex coordinates `(u, v)`.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative width of the guard band around the cut `(-inf, 0]`.
pub const CUT_GUARD: f64 = 1e-14;

/// A real quaternion `w + x e1 + y e2 + z e3`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const E1: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const E2: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const E3: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    #[inline]
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    #[inline]
    pub const fn real(w: f64) -> Self {
        Self::new(w, 0.0, 0.0, 0.0)
    }

    /// `u + axis * v`.
    #[inline]
    pub fn from_slice(u: f64, v: f64, axis: Quaternion) -> Self {
        Self::new(u, axis.x * v, axis.y * v, axis.z * v)
    }

    /// The point `z.re + axis * z.im` of the plane `C_axis`.
    #[inline]
    pub fn from_complex(z: Complex64, axis: Quaternion) -> Self {
        Self::from_slice(z.re, z.im, axis)
    }

    #[inline]
    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    #[inline]
    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    #[inline]
    pub fn norm_sqr(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    #[inline]
    pub fn norm(self) -> f64 {
        // hypot chain keeps huge/tiny components from overflowing
        self.w.hypot(self.x).hypot(self.y.hypot(self.z))
    }

    /// Norm of the imaginary part.
    #[inline]
    pub fn imag_norm(self) -> f64 {
        self.x.hypot(self.y).hypot(self.z)
    }

    #[inline]
    pub fn imag(self) -> Self {
        Self::new(0.0, self.x, self.y, self.z)
    }

    #[inline]
    pub fn is_real(self) -> bool {
        self.x == 0.0 && self.y == 0.0 && self.z == 0.0
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Multiplicative inverse. Returns non-finite components for zero.
    #[inline]
    pub fn inv(self) -> Self {
        self.conj() * (1.0 / self.norm_sqr())
    }

    #[inline]
    pub fn scale(self, a: f64) -> Self {
        Self::new(self.w * a, self.x * a, self.y * a, self.z * a)
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(self, other: Self) -> f64 {
        (self.w - other.w)
            .abs()
            .max((self.x - other.x).abs())
            .max((self.y - other.y).abs())
            .max((self.z - other.z).abs())
    }

    /// Splits `self = u + axis * v` with `v >= 0`.
    ///
    /// Real inputs get the default axis `e1`.
    pub fn slice_decompose(self) -> SlicePoint {
        let v = self.imag_norm();
        if v == 0.0 {
            return SlicePoint {
                u: self.w,
                v: 0.0,
                axis: Quaternion::E1,
            };
        }
        let axis = Quaternion::new(0.0, self.x / v, self.y / v, self.z / v);
        SlicePoint { u: self.w, v, axis }
    }

    /// Coordinates of `self` in the plane `C_axis`, or `None` if `self` is not in it.
    ///
    /// The tolerance is relative to `|self|`.
    pub fn complex_in(self, axis: Quaternion, tol: f64) -> Option<Complex64> {
        let v = self.x * axis.x + self.y * axis.y + self.z * axis.z;
        let resid = self.imag() - axis.scale(v);
        if resid.norm() <= tol * self.norm().max(1.0) {
            Some(Complex64::new(self.w, v))
        } else {
            None
        }
    }

    /// True if `self` lies on the closed cut `(-inf, 0]` (with the guard band).
    pub fn on_negative_cut(self) -> bool {
        let n = self.norm();
        if n == 0.0 {
            return true;
        }
        self.w < 0.0 && self.imag_norm() <= CUT_GUARD * n
    }

    /// Quaternionic exponential.
    pub fn exp(self) -> Self {
        let sp = self.slice_decompose();
        let r = sp.u.exp();
        Quaternion::from_slice(r * sp.v.cos(), r * sp.v.sin(), sp.axis)
    }

    /// Slice hyperholomorphic logarithm `ln|s| + I_s arccos(s0/|s|)`.
    pub fn qlog(self) -> Result<Self> {
        if self.on_negative_cut() {
            return Err(Error::Domain(format!("log undefined on (-inf, 0]: {self}")));
        }
        let sp = self.slice_decompose();
        // atan2(v, u) equals arccos(u/|s|) on [0, pi] and stays accurate near 0
        let arg = sp.v.atan2(sp.u);
        Ok(Quaternion::from_slice(self.norm().ln(), arg, sp.axis))
    }

    /// Real power `exp(alpha * log s)`.
    pub fn qpow(self, alpha: f64) -> Result<Self> {
        Ok((self.qlog()? * alpha).exp())
    }

    /// True if `self` and `other` lie on the same sphere `[s]`.
    pub fn same_sphere(self, other: Self, tol: f64) -> bool {
        (self.w - other.w).abs() <= tol && (self.imag_norm() - other.imag_norm()).abs() <= tol
    }
}

/// A quaternion in slice coordinates `u + axis * v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicePoint {
    pub u: f64,
    pub v: f64,
    pub axis: Quaternion,
}

impl SlicePoint {
    pub fn reconstruct(&self) -> Quaternion {
        Quaternion::from_slice(self.u, self.v, self.axis)
    }

    pub fn complex(&self) -> Complex64 {
        Complex64::new(self.u, self.v)
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.w)?;
        for (c, unit) in [(self.x, 'i'), (self.y, 'j'), (self.z, 'k')] {
            if c.is_sign_negative() {
                write!(f, "-{}{}", -c, unit)?;
            } else {
                write!(f, "+{}{}", c, unit)?;
            }
        }
        Ok(())
    }
}

impl FromStr for Quaternion {
    type Err = Error;

    /// Accepts `w+x i+y j+z k` (terms in any order, units `i j k` or `e1 e2 e3`)
    /// and the JSON form `[w,x,y,z]`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.starts_with('[') {
            let a: [f64; 4] = serde_json::from_str(t)
                .map_err(|e| Error::Parse(format!("quaternion array {t:?}: {e}")))?;
            return Ok(Quaternion::from_array(a));
        }
        let compact: String = t.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(Error::Parse("empty quaternion".into()));
        }
        let bytes = compact.as_bytes();
        let mut terms = Vec::new();
        let mut start = 0;
        for i in 1..bytes.len() {
            let c = bytes[i];
            let prev = bytes[i - 1];
            if (c == b'+' || c == b'-') && prev != b'e' && prev != b'E' {
                terms.push(&compact[start..i]);
                start = i;
            }
        }
        terms.push(&compact[start..]);
        let mut q = [0.0f64; 4];
        for term in terms {
            let (body, slot) = if let Some(b) = term.strip_suffix("e1") {
                (b, 1)
            } else if let Some(b) = term.strip_suffix("e2") {
                (b, 2)
            } else if let Some(b) = term.strip_suffix("e3") {
                (b, 3)
            } else if let Some(b) = term.strip_suffix('i') {
                (b, 1)
            } else if let Some(b) = term.strip_suffix('j') {
                (b, 2)
            } else if let Some(b) = term.strip_suffix('k') {
                (b, 3)
            } else {
                (term, 0)
            };
            let body = body.strip_suffix('*').unwrap_or(body);
            let value = match body {
                "" | "+" => 1.0,
                "-" => -1.0,
                b => b
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("quaternion term {term:?} in {s:?}: {e}")))?,
            };
            q[slot] += value;
        }
        Ok(Quaternion::from_array(q))
    }
}

impl Serialize for Quaternion {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Quaternion {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        <[f64; 4]>::deserialize(deserializer).map(Quaternion::from_array)
    }
}

impl Add for Quaternion {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Quaternion {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Quaternion {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }
}

impl Mul for Quaternion {
    type Output = Self;
    /// Hamilton product.
    #[inline]
    fn mul(self, b: Self) -> Self {
        let a = self;
        Self::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }
}

impl Mul<f64> for Quaternion {
    type Output = Self;
    #[inline]
    fn mul(self, a: f64) -> Self {
        self.scale(a)
    }
}

impl Mul<Quaternion> for f64 {
    type Output = Quaternion;
    #[inline]
    fn mul(self, q: Quaternion) -> Quaternion {
        q.scale(self)
    }
}

impl Div<f64> for Quaternion {
    type Output = Self;
    #[inline]
    fn div(self, a: f64) -> Self {
        self.scale(1.0 / a)
    }
}

impl AddAssign for Quaternion {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for Quaternion {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl MulAssign for Quaternion {
    #[inline]
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl From<f64> for Quaternion {
    fn from(w: f64) -> Self {
        Quaternion::real(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{E, FRAC_PI_2};

    fn q(w: f64, x: f64, y: f64, z: f64) -> Quaternion {
        Quaternion::new(w, x, y, z)
    }

    /// Left-multiplication matrix of `a` acting on coefficient vectors.
    fn left_matrix(a: Quaternion) -> [[f64; 4]; 4] {
        [
            [a.w, -a.x, -a.y, -a.z],
            [a.x, a.w, -a.z, a.y],
            [a.y, a.z, a.w, -a.x],
            [a.z, -a.y, a.x, a.w],
        ]
    }

    fn arb_quat() -> impl Strategy<Value = Quaternion> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64)
            .prop_map(|(w, x, y, z)| Quaternion::new(w, x, y, z))
    }

    fn exp_series(s: Quaternion) -> Quaternion {
        let mut term = Quaternion::ONE;
        let mut sum = Quaternion::ONE;
        for k in 1..60 {
            term = term * s / k as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn basis_table() {
        let (i, j, k) = (Quaternion::E1, Quaternion::E2, Quaternion::E3);
        assert_eq!(i * j, k);
        assert_eq!(j * k, i);
        assert_eq!(k * i, j);
        for e in [i, j, k] {
            assert_eq!(e * e, -Quaternion::ONE);
        }
        assert_eq!(j * i, -k);
    }

    #[test]
    fn one_plus_i_times_one_minus_i() {
        assert_eq!(q(1.0, 1.0, 0.0, 0.0) * q(1.0, -1.0, 0.0, 0.0), Quaternion::real(2.0));
    }

    #[test]
    fn decompose_examples() {
        let p = Quaternion::real(3.0).slice_decompose();
        assert_eq!((p.u, p.v, p.axis), (3.0, 0.0, Quaternion::E1));
        let p = q(1.0, 0.0, 2.0, 0.0).slice_decompose();
        assert_eq!((p.u, p.v, p.axis), (1.0, 2.0, Quaternion::E2));
        let p = q(1.0, 0.0, -2.0, 0.0).slice_decompose();
        assert_eq!((p.u, p.v, p.axis), (1.0, 2.0, -Quaternion::E2));
    }

    #[test]
    fn log_examples() {
        let l = Quaternion::real(E).qlog().unwrap();
        assert!((l - Quaternion::ONE).norm() < 1e-15);
        let l = Quaternion::E1.qlog().unwrap();
        assert!((l - Quaternion::E1 * FRAC_PI_2).norm() < 1e-15);
        let s = Quaternion::E2 * 2.0;
        let l = s.qlog().unwrap();
        assert!((l - q(2f64.ln(), 0.0, FRAC_PI_2, 0.0)).norm() < 1e-15);
        assert!((exp_series(l) - s).norm() < 1e-13);
    }

    #[test]
    fn log_rejects_cut() {
        for s in [Quaternion::ZERO, Quaternion::real(-1.0), q(-2.0, 1e-16, 0.0, 0.0)] {
            assert!(matches!(s.qlog(), Err(Error::Domain(_))), "{s}");
            assert!(s.qpow(0.5).is_err());
        }
        assert!(q(-2.0, 1e-6, 0.0, 0.0).qlog().is_ok());
    }

    #[test]
    fn pow_examples() {
        assert!((Quaternion::real(4.0).qpow(0.5).unwrap() - Quaternion::real(2.0)).norm() < 1e-15);
        assert!((Quaternion::E1.qpow(2.0).unwrap() + Quaternion::ONE).norm() < 1e-15);
    }

    #[test]
    fn parse_text_forms() {
        assert_eq!("1+2i-3j+0.5k".parse::<Quaternion>().unwrap(), q(1.0, 2.0, -3.0, 0.5));
        assert_eq!(" 2 j ".parse::<Quaternion>().unwrap(), q(0.0, 0.0, 2.0, 0.0));
        assert_eq!("-i".parse::<Quaternion>().unwrap(), q(0.0, -1.0, 0.0, 0.0));
        assert_eq!("1e-3+2e1".parse::<Quaternion>().unwrap(), q(1e-3, 2.0, 0.0, 0.0));
        assert_eq!("[1,2,3,4]".parse::<Quaternion>().unwrap(), q(1.0, 2.0, 3.0, 4.0));
        assert!("1+x".parse::<Quaternion>().is_err());
        let p = q(1.5, -2.0, 0.25, -0.0);
        assert_eq!(p.to_string().parse::<Quaternion>().unwrap(), p);
    }

    #[test]
    fn json_is_array() {
        let s = serde_json::to_string(&q(1.0, 2.0, 3.0, 4.0)).unwrap();
        assert_eq!(s, "[1.0,2.0,3.0,4.0]");
        let back: Quaternion = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q(1.0, 2.0, 3.0, 4.0));
    }

    proptest! {
        #[test]
        fn product_matches_matrix_oracle(a in arb_quat(), b in arb_quat()) {
            let m = left_matrix(a);
            let bv = b.to_array();
            let mut out = [0.0; 4];
            for r in 0..4 {
                out[r] = (0..4).map(|c| m[r][c] * bv[c]).sum();
            }
            let ab = a * b;
            prop_assert!(ab.max_abs_diff(Quaternion::from_array(out)) < 1e-12);
            prop_assert!((ab.norm() - a.norm() * b.norm()).abs() <= 1e-12 * (1.0 + a.norm() * b.norm()));
        }

        #[test]
        fn associative(a in arb_quat(), b in arb_quat(), c in arb_quat()) {
            prop_assert!(((a * b) * c).max_abs_diff(a * (b * c)) < 1e-11);
        }

        #[test]
        fn conj_product_is_norm(a in arb_quat()) {
            let n = a.norm_sqr();
            prop_assert!((a.conj() * a).max_abs_diff(Quaternion::real(n)) <= 1e-13 * (1.0 + n));
            prop_assert!((a * a.conj()).max_abs_diff(Quaternion::real(n)) <= 1e-13 * (1.0 + n));
        }

        #[test]
        fn decompose_roundtrip(a in arb_quat()) {
            let sp = a.slice_decompose();
            prop_assert!(sp.v >= 0.0);
            let back = sp.reconstruct();
            let ulp = 4.0 * f64::EPSILON * a.norm().max(f64::MIN_POSITIVE);
            prop_assert!(back.max_abs_diff(a) <= ulp);
            prop_assert!((sp.axis * sp.axis).max_abs_diff(-Quaternion::ONE) < 1e-15);
        }

        #[test]
        fn pow_exponent_law(s in arb_quat(), a in 0.01..1.99f64, b in 0.01..1.99f64) {
            prop_assume!(!s.on_negative_cut() && s.norm() > 1e-3);
            let lhs = s.qpow(a + b).unwrap();
            let rhs = s.qpow(a).unwrap() * s.qpow(b).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1e-300));
        }

        #[test]
        fn cube_root_cubed(s in arb_quat()) {
            prop_assume!(!s.on_negative_cut() && s.norm() > 1e-3);
            let r = s.qpow(1.0 / 3.0).unwrap();
            prop_assert!((r * r * r - s).norm() <= 1e-13 * s.norm());
        }

        #[test]
        fn intrinsic_symmetry(s in arb_quat(), a in 0.1..3.0f64) {
            prop_assume!(!s.on_negative_cut() && s.norm() > 1e-3);
            prop_assert!(s.conj().qlog().unwrap().max_abs_diff(s.qlog().unwrap().conj()) < 1e-14);
            let p = s.qpow(a).unwrap();
            prop_assert!(s.conj().qpow(a).unwrap().max_abs_diff(p.conj()) <= 1e-13 * (1.0 + p.norm()));
        }

        #[test]
        fn exp_log_roundtrip(s in arb_quat()) {
            prop_assume!(!s.on_negative_cut() && s.norm() > 1e-3);
            prop_assert!((s.qlog().unwrap().exp() - s).norm() <= 1e-13 * s.norm());
        }
    }
}
