//! Fractional powers `T^α` of sectorial quaternionic matrices.
//!
//! Routes:
//! * spectral: the S-functional calculus of `s^α` on a contour avoiding `(-∞, 0]`;
//! * Balakrishnan: `T^α = sin(απ)/π ∫_0^∞ t^{α-1} (t+T)^{-1} T dt`, and its
//!   order-`m` variant with the kernel `[T(t+T)^{-1}]^m`;
//! * negative powers from `T^{-α} = -sin(απ)/π ∫_0^∞ t^{-α} S_R^{-1}(-t,T) dt`;
//! * both Komatsu representations, valid for `α ∈ (-1, 1)`.
//!
//! The half-line integrals go through [`integrate_log_line`] with tails
//! scaled by the smallest and largest singular values of `T`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::calculus::{flatten, funcalc_intrinsic, unflatten};
use crate::error::{Error, Result};
use crate::qmatrix::{QMatrixOperator, ResolventKernel, SpectralSphere};
use crate::quad::{integrate_log_line, Endpoint, QuadOutcome, QuadSpec, Tail};
use crate::quat::Quaternion;
use crate::slice_fn::IntrinsicSliceFunction;

/// Spectra closer than this to the angle `π` are refused.
pub const CUT_ANGLE_MARGIN: f64 = 1e-6;

/// Sectoriality diagnostics of a matrix.
#[derive(Debug, Clone, Serialize)]
pub struct SectorialReport {
    /// Largest argument of a spectral sphere, in `[0, π]`.
    pub omega_est: f64,
    /// `(φ, C_φ)` pairs; `C_φ = +inf` when `φ <= omega_est`.
    pub c_phi: Vec<(f64, f64)>,
    pub injective: bool,
    pub invertible: bool,
    /// `omega_est < π` and no sphere at the origin.
    pub sectorial: bool,
}

/// Result of a power computation with its quadrature diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct PowerResult {
    pub operator: QMatrixOperator,
    pub method: String,
    pub est_quadrature_error: f64,
    pub nodes_used: usize,
    pub warnings: Vec<String>,
}

impl PowerResult {
    fn exact(operator: QMatrixOperator, method: &str) -> Self {
        Self {
            operator,
            method: method.into(),
            est_quadrature_error: 0.0,
            nodes_used: 0,
            warnings: Vec::new(),
        }
    }

    fn from_quad(n: usize, out: QuadOutcome, scale: f64, method: &str) -> Self {
        let value: Vec<f64> = out.value.iter().map(|v| v * scale).collect();
        Self {
            operator: unflatten(n, &value),
            method: method.into(),
            est_quadrature_error: out.est_error * scale.abs(),
            nodes_used: out.nodes_used,
            warnings: out.warnings,
        }
    }
}

fn origin_tol(t: &QMatrixOperator) -> f64 {
    1e-10 * t.op_norm().max(1e-300)
}

/// Largest argument of a spectral sphere; `π` if a sphere sits at the origin.
pub fn spectral_angle(t: &QMatrixOperator) -> f64 {
    let tol = origin_tol(t);
    t.s_spectrum()
        .iter()
        .map(|s| if s.modulus() <= tol { PI } else { s.arg() })
        .fold(0.0, f64::max)
}

/// Samples `|s| max(‖S_L^{-1}(s,T)‖, ‖S_R^{-1}(s,T)‖)` outside `Σ_φ` for each angle.
pub fn sectorial_report(t: &QMatrixOperator, angles: &[f64]) -> SectorialReport {
    let spectrum = t.s_spectrum();
    let tol = origin_tol(t);
    let at_origin = spectrum.iter().any(|s| s.modulus() <= tol);
    let omega_est = spectrum.iter().map(SpectralSphere::arg).fold(0.0, f64::max);
    let rho = spectrum.iter().map(SpectralSphere::modulus).fold(0.0, f64::max);
    let rho = if rho > tol { rho } else { 1.0 };
    let smin = t.embed().sigma_min();
    let invertible = smin > crate::qmatrix::INVERTIBILITY_RTOL * t.invertibility_scale();
    let kernel = ResolventKernel::new(t);
    let norm = |m: DMatrix<Complex64>| m.svd(false, false).singular_values.max();
    let axes = [Quaternion::E1, Quaternion::E2, Quaternion::E3];
    let c_phi = angles
        .iter()
        .map(|&phi| {
            if phi <= omega_est || phi >= PI {
                return (phi, f64::INFINITY);
            }
            let mut c = 0.0f64;
            for a in 0..=8 {
                let theta = phi + (PI - phi) * a as f64 / 8.0;
                for k in 0..=60 {
                    let r = rho * 10f64.powf(-3.0 + 6.0 * k as f64 / 60.0);
                    for axis in axes {
                        let s = Quaternion::from_slice(r * theta.cos(), r * theta.sin(), axis);
                        match (kernel.left(s), kernel.right(s)) {
                            (Ok(l), Ok(rr)) => c = c.max(r * norm(l).max(norm(rr))),
                            _ => return (phi, f64::INFINITY),
                        }
                    }
                }
            }
            (phi, c)
        })
        .collect();
    SectorialReport {
        omega_est,
        c_phi,
        injective: invertible,
        invertible,
        sectorial: !at_origin && omega_est < PI - CUT_ANGLE_MARGIN,
    }
}

fn require_sector(t: &QMatrixOperator) -> Result<f64> {
    let w = spectral_angle(t);
    if w > PI - CUT_ANGLE_MARGIN {
        return Err(Error::Sector(format!(
            "spectral angle {w:.9} touches the negative real axis"
        )));
    }
    Ok(w)
}

fn is_integer(alpha: f64) -> bool {
    alpha.fract() == 0.0 && alpha.abs() <= 64.0
}

fn integer_power(t: &QMatrixOperator, k: i64) -> Result<QMatrixOperator> {
    if k >= 0 {
        Ok(t.powi(k as u32))
    } else {
        Ok(t.inverse()?.powi((-k) as u32))
    }
}

/// `T^α` as the S-functional calculus of `s^α`.
///
/// Integer exponents are evaluated by repeated multiplication and are
/// allowed for any spectrum; other exponents need a spectrum off `(-∞, 0]`.
pub fn frac_power_spectral(t: &QMatrixOperator, alpha: f64) -> Result<PowerResult> {
    if !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("exponent {alpha}")));
    }
    if is_integer(alpha) {
        return Ok(PowerResult::exact(integer_power(t, alpha as i64)?, "spectral"));
    }
    require_sector(t)?;
    let f = IntrinsicSliceFunction::power(alpha);
    let mut c = crate::calculus::auto_contour(t, f.domain.excluded())?;
    c.rtol = 1e-12;
    let r = funcalc_intrinsic(&f, t, Some(&c))?;
    Ok(PowerResult {
        operator: r.operator,
        method: "spectral".into(),
        est_quadrature_error: r.est_quadrature_error,
        nodes_used: r.nodes_used,
        warnings: r.warnings,
    })
}

/// Embedding of `T` with the scales where `(t + T)^{-1}` changes behaviour.
struct Scales {
    e: DMatrix<Complex64>,
    lo: f64,
    hi: f64,
}

fn scales(t: &QMatrixOperator) -> Scales {
    let emb = t.embed();
    let sv = emb.singular_values();
    let hi = sv.max().max(f64::MIN_POSITIVE);
    let mut lo = sv.min();
    if lo <= 1e-12 * hi {
        // singular T: use the smallest nonzero spectral modulus instead
        lo = t
            .s_spectrum()
            .iter()
            .map(SpectralSphere::modulus)
            .filter(|m| *m > 1e-10 * hi)
            .fold(hi, f64::min);
    }
    Scales {
        e: emb.matrix().clone(),
        lo,
        hi,
    }
}

fn shifted_solve(e: &DMatrix<Complex64>, t: f64, rhs: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n2 = e.nrows();
    let a = e + DMatrix::<Complex64>::identity(n2, n2) * Complex64::from(t);
    a.lu()
        .solve(rhs)
        .ok_or_else(|| Error::Sector(format!("t = {t:e} hits -σ_S(T)")))
}

fn check_unit_interval(alpha: f64, lo: f64, hi: f64, what: &str) -> Result<()> {
    if !(alpha > lo && alpha < hi) {
        return Err(Error::InvalidParameter(format!("{what} needs α in ({lo}, {hi}), got {alpha}")));
    }
    Ok(())
}

/// Balakrishnan's formula for `α ∈ (0, 1)`.
pub fn frac_power_balakrishnan(t: &QMatrixOperator, alpha: f64, quad: &QuadSpec) -> Result<PowerResult> {
    check_unit_interval(alpha, 0.0, 1.0, "Balakrishnan's formula")?;
    frac_power_balakrishnan_m(t, alpha, 1, quad).map(|mut r| {
        r.method = "balakrishnan".into();
        r
    })
}

/// `T^α = Γ(m)/(Γ(α)Γ(m-α)) ∫_0^∞ t^{α-1} [T(t+T)^{-1}]^m dt` for `α ∈ (0, m)`.
pub fn frac_power_balakrishnan_m(t: &QMatrixOperator, alpha: f64, m: u32, quad: &QuadSpec) -> Result<PowerResult> {
    if m == 0 {
        return Err(Error::InvalidParameter("kernel order m must be at least 1".into()));
    }
    check_unit_interval(alpha, 0.0, m as f64, "the order-m Balakrishnan formula")?;
    require_sector(t)?;
    let n = t.n();
    if alpha == 1.0 {
        return Ok(PowerResult::exact(t.clone(), "balakrishnan"));
    }
    let s = scales(t);
    let first = s.e.columns(0, n).into_owned();
    let g = |x: f64| -> Result<Vec<f64>> {
        // X = (x + T)^{-1} T commutes with T, so X^m = X^{m-1} (x + T)^{-1} T[:, :n]
        let mut y = shifted_solve(&s.e, x, &first)?;
        if m > 1 {
            let full = shifted_solve(&s.e, x, &s.e)?;
            for _ in 1..m {
                y = &full * y;
            }
        }
        let w = x.powf(alpha - 1.0);
        let mut v = flatten(&y);
        v.iter_mut().for_each(|z| *z *= w);
        Ok(v)
    };
    let out = integrate_log_line(
        &g,
        Endpoint::Zero(Tail::power(alpha - 1.0, s.lo)),
        Endpoint::Infinity(Tail::power(alpha - 1.0 - m as f64, s.hi)),
        quad,
    )?;
    let c = (ln_gamma(m as f64) - ln_gamma(alpha) - ln_gamma(m as f64 - alpha)).exp();
    Ok(PowerResult::from_quad(n, out, c, "balakrishnan"))
}

/// `T^{-α}` for `α ∈ (0, 1)` from the right S-resolvent on the negative real axis.
pub fn frac_power_negative(t: &QMatrixOperator, alpha: f64, quad: &QuadSpec) -> Result<PowerResult> {
    check_unit_interval(alpha, 0.0, 1.0, "the negative-power formula")?;
    require_sector(t)?;
    t.inverse()?;
    let n = t.n();
    let s = scales(t);
    let kernel = ResolventKernel::new(t);
    let g = |x: f64| -> Result<Vec<f64>> {
        let r = kernel.right(Quaternion::real(-x))?;
        let w = x.powf(-alpha);
        let mut v = flatten(&r);
        v.iter_mut().for_each(|z| *z *= w);
        Ok(v)
    };
    let out = integrate_log_line(
        &g,
        Endpoint::Zero(Tail::power(-alpha, s.lo)),
        Endpoint::Infinity(Tail::power(-alpha - 1.0, s.hi)),
        quad,
    )?;
    Ok(PowerResult::from_quad(n, out, -(alpha * PI).sin() / PI, "negative"))
}

/// Which of the two Komatsu representations to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KomatsuForm {
    /// `1/α - T^{-1}/(1+α) + ∫_0^1 t^{α+1}(t+T)^{-1}T^{-1} + ∫_1^∞ t^{α-1}(t+T)^{-1}T`.
    First,
    /// `1/α + ∫_0^1 t^{-α}(1+tT)^{-1}T - ∫_0^1 t^α(1+tT^{-1})^{-1}T^{-1}`.
    Second,
}

fn add_outcomes(a: QuadOutcome, b: QuadOutcome, sign: f64) -> QuadOutcome {
    let mut warnings = a.warnings;
    warnings.extend(b.warnings);
    QuadOutcome {
        value: a.value.iter().zip(&b.value).map(|(x, y)| x + sign * y).collect(),
        est_error: a.est_error + b.est_error,
        nodes_used: a.nodes_used + b.nodes_used,
        warnings,
    }
}

/// Komatsu's representation of `T^α` for `α ∈ (-1, 1) \ {0}`.
pub fn frac_power_komatsu(t: &QMatrixOperator, alpha: f64, form: KomatsuForm, quad: &QuadSpec) -> Result<PowerResult> {
    check_unit_interval(alpha, -1.0, 1.0, "Komatsu's representation")?;
    if alpha == 0.0 {
        return Err(Error::InvalidParameter("Komatsu's representation needs α != 0".into()));
    }
    require_sector(t)?;
    let n = t.n();
    let tinv = t.inverse()?;
    let s = scales(t);
    let ei = tinv.embed().matrix().clone();
    let e_first = s.e.columns(0, n).into_owned();
    let ei_first = ei.columns(0, n).into_owned();
    let weighted = |m: DMatrix<Complex64>, w: f64| {
        let mut v = flatten(&m);
        v.iter_mut().for_each(|z| *z *= w);
        v
    };
    let id = QMatrixOperator::identity(n);
    let (out, constant) = match form {
        KomatsuForm::First => {
            let near = |x: f64| Ok(weighted(shifted_solve(&s.e, x, &ei_first)?, x.powf(alpha + 1.0)));
            let far = |x: f64| Ok(weighted(shifted_solve(&s.e, x, &e_first)?, x.powf(alpha - 1.0)));
            let a = integrate_log_line(&near, Endpoint::Zero(Tail::power(alpha + 1.0, s.lo)), Endpoint::Finite(1.0), quad)?;
            let b = integrate_log_line(&far, Endpoint::Finite(1.0), Endpoint::Infinity(Tail::power(alpha - 2.0, s.hi)), quad)?;
            let constant = &id.scale(1.0 / alpha) - &tinv.scale(1.0 / (1.0 + alpha));
            (add_outcomes(a, b, 1.0), constant)
        }
        KomatsuForm::Second => {
            // (1 + xT)^{-1} T = (1/x + T)^{-1} T / x and (1 + xT^{-1})^{-1} T^{-1} = (1/x + T^{-1})^{-1} T^{-1} / x
            let p = |x: f64| Ok(weighted(shifted_solve(&s.e, 1.0 / x, &e_first)?, x.powf(-alpha) / x));
            let q = |x: f64| Ok(weighted(shifted_solve(&ei, 1.0 / x, &ei_first)?, x.powf(alpha) / x));
            let a = integrate_log_line(&p, Endpoint::Zero(Tail::power(-alpha, 1.0 / s.hi)), Endpoint::Finite(1.0), quad)?;
            let b = integrate_log_line(&q, Endpoint::Zero(Tail::power(alpha, s.lo)), Endpoint::Finite(1.0), quad)?;
            (add_outcomes(a, b, -1.0), id.scale(1.0 / alpha))
        }
    };
    let c = (alpha * PI).sin() / PI;
    let mut r = PowerResult::from_quad(n, out, c, "komatsu");
    r.operator = &r.operator + &constant.scale(c);
    Ok(r)
}

/// `d/dα T^α` from the α-derivative of Balakrishnan's kernel, `α ∈ (0, 1)`:
/// `π cot(απ) T^α + sin(απ)/π ∫_0^∞ t^{α-1} ln t (t+T)^{-1} T dt`.
pub fn frac_power_alpha_derivative(t: &QMatrixOperator, alpha: f64, quad: &QuadSpec) -> Result<PowerResult> {
    check_unit_interval(alpha, 0.0, 1.0, "the α-derivative")?;
    let ta = frac_power_balakrishnan(t, alpha, quad)?;
    let n = t.n();
    let s = scales(t);
    let first = s.e.columns(0, n).into_owned();
    let g = |x: f64| -> Result<Vec<f64>> {
        let w = x.powf(alpha - 1.0) * x.ln();
        let mut v = flatten(&shifted_solve(&s.e, x, &first)?);
        v.iter_mut().for_each(|z| *z *= w);
        Ok(v)
    };
    let out = integrate_log_line(
        &g,
        Endpoint::Zero(Tail::power(alpha - 1.0, s.lo).with_log()),
        Endpoint::Infinity(Tail::power(alpha - 2.0, s.hi).with_log()),
        quad,
    )?;
    let mut r = PowerResult::from_quad(n, out, (alpha * PI).sin() / PI, "alpha-derivative");
    r.operator = &r.operator + &ta.operator.scale(PI / (alpha * PI).tan());
    r.warnings.extend(ta.warnings);
    Ok(r)
}

/// Method selector for [`frac_power`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PowerMethod {
    Spectral,
    Balakrishnan,
    Komatsu,
}

impl std::str::FromStr for PowerMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Self::Spectral),
            "balakrishnan" => Ok(Self::Balakrishnan),
            "komatsu" => Ok(Self::Komatsu),
            other => Err(Error::Parse(format!("unknown method {other:?}"))),
        }
    }
}

/// `T^α` by the chosen route; `α = 0` and `α = 1` return `I` and `T` exactly.
///
/// Balakrishnan handles `α ∈ (-1, 0)` through the negative-power formula and
/// `α > 1` through the order-`⌈α⌉` kernel.
pub fn frac_power(t: &QMatrixOperator, alpha: f64, method: PowerMethod, quad: &QuadSpec) -> Result<PowerResult> {
    if alpha == 0.0 {
        return Ok(PowerResult::exact(QMatrixOperator::identity(t.n()), "exact"));
    }
    if alpha == 1.0 {
        return Ok(PowerResult::exact(t.clone(), "exact"));
    }
    match method {
        PowerMethod::Spectral => frac_power_spectral(t, alpha),
        PowerMethod::Balakrishnan if alpha > 0.0 && alpha < 1.0 => frac_power_balakrishnan(t, alpha, quad),
        PowerMethod::Balakrishnan if alpha > 1.0 => frac_power_balakrishnan_m(t, alpha, alpha.ceil() as u32, quad),
        PowerMethod::Balakrishnan if alpha > -1.0 => frac_power_negative(t, -alpha, quad),
        PowerMethod::Balakrishnan => Err(Error::InvalidParameter(format!("Balakrishnan route needs α > -1, got {alpha}"))),
        PowerMethod::Komatsu => frac_power_komatsu(t, alpha, KomatsuForm::First, quad),
    }
}
