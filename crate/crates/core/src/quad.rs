//! Composite Gauss–Legendre quadrature on finite intervals and on the
//! half-line via the substitution `t = e^u`.
//!
//! Integrands return flat `Vec<f64>` buffers so that the same driver serves
//! matrices, 2×2 symbols and scalars. Node contributions are reduced by a
//! fixed-order pairwise sum, so results are deterministic for a given node
//! count regardless of how many threads evaluate the nodes.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GlRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GlRule {
    /// Shared rule of the given degree, built once per process.
    pub fn cached(degree: usize) -> Arc<GlRule> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GlRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry(degree)
            .or_insert_with(|| {
                let gl = GaussLegendre::new(NonZeroUsize::new(degree.max(1)).unwrap());
                let (nodes, weights) = gl.as_node_weight_pairs().iter().copied().unzip();
                Arc::new(GlRule { nodes, weights })
            })
            .clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Settings for the adaptive drivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSpec {
    /// Gauss–Legendre degree per panel.
    pub nodes_per_panel: usize,
    /// Lower bound on the panel count of the first pass.
    pub min_panels: usize,
    /// Panel width on the `u = ln t` line for the first pass.
    pub panel_width: f64,
    /// Successive passes must agree to `rtol` relative to the result's max-norm.
    pub rtol: f64,
    /// Hard cap on the number of nodes in one pass.
    pub max_nodes: usize,
    /// Relative size of the neglected tail beyond the leading-order correction.
    pub tail_tol: f64,
    /// Evaluate nodes on the rayon pool.
    pub parallel: bool,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            nodes_per_panel: 16,
            min_panels: 64,
            panel_width: 1.0,
            rtol: 1e-12,
            max_nodes: 1 << 16,
            tail_tol: 1e-16,
            parallel: true,
        }
    }
}

impl QuadSpec {
    /// Same settings with node evaluation forced onto the calling thread.
    pub fn sequential(mut self) -> Self {
        self.parallel = false;
        self
    }
}

/// Leading-order behaviour `g(t) ~ C t^exponent (ln t)^[log_factor]` of an
/// integrand near `0` or `+inf`, valid once `t` is far from `scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tail {
    pub exponent: f64,
    pub scale: f64,
    pub log_factor: bool,
}

impl Tail {
    pub fn power(exponent: f64, scale: f64) -> Self {
        Self {
            exponent,
            scale,
            log_factor: false,
        }
    }

    pub fn with_log(mut self) -> Self {
        self.log_factor = true;
        self
    }
}

/// An end of the integration range in the original `t` variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endpoint {
    Finite(f64),
    Zero(Tail),
    Infinity(Tail),
}

/// Result of an adaptive integration.
#[derive(Debug, Clone)]
pub struct QuadOutcome {
    pub value: Vec<f64>,
    /// Max-norm difference between the last two passes.
    pub est_error: f64,
    pub nodes_used: usize,
    pub warnings: Vec<String>,
}

/// Fixed-order pairwise sum of equally sized buffers.
pub fn pairwise_sum(parts: &[Vec<f64>], dim: usize) -> Vec<f64> {
    match parts.len() {
        0 => vec![0.0; dim],
        1 => parts[0].clone(),
        n => {
            let (a, b) = parts.split_at(n / 2);
            let mut left = pairwise_sum(a, dim);
            let right = pairwise_sum(b, dim);
            for (l, r) in left.iter_mut().zip(&right) {
                *l += r;
            }
            left
        }
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Composite rule on `[a, b]` with `panels` equal panels.
///
/// `f` returns the integrand value at a point; every value must have the
/// same length.
pub fn integrate_panels<F>(a: f64, b: f64, panels: usize, rule: &GlRule, parallel: bool, f: &F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    let h = (b - a) / panels as f64;
    let m = rule.len();
    let eval = |k: usize| -> Result<Vec<f64>> {
        let (p, i) = (k / m, k % m);
        let centre = a + h * (p as f64 + 0.5);
        let x = centre + 0.5 * h * rule.nodes[i];
        let mut y = f(x)?;
        let w = 0.5 * h * rule.weights[i];
        y.iter_mut().for_each(|v| *v *= w);
        Ok(y)
    };
    let total = panels * m;
    let parts: Vec<Vec<f64>> = if parallel {
        (0..total).into_par_iter().map(eval).collect::<Result<_>>()?
    } else {
        (0..total).map(eval).collect::<Result<_>>()?
    };
    let dim = parts.first().map_or(0, Vec::len);
    if parts.iter().any(|p| p.len() != dim) {
        return Err(Error::Dimension("integrand changed length between nodes".into()));
    }
    Ok(pairwise_sum(&parts, dim))
}

/// Doubles the panel count starting from `panels` until two passes agree.
pub fn integrate_adaptive<F>(a: f64, b: f64, panels: usize, spec: &QuadSpec, f: &F) -> Result<QuadOutcome>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    let rule = GlRule::cached(spec.nodes_per_panel);
    let mut panels = panels.max(1);
    let mut prev = integrate_panels(a, b, panels, &rule, spec.parallel, f)?;
    let mut warnings = Vec::new();
    loop {
        let next_panels = panels * 2;
        let cur = integrate_panels(a, b, next_panels, &rule, spec.parallel, f)?;
        let diff = max_abs_diff(&cur, &prev);
        let nodes = next_panels * rule.len();
        let scale = max_abs(&cur).max(f64::MIN_POSITIVE);
        if diff <= spec.rtol * scale || nodes * 2 > spec.max_nodes {
            if diff > spec.rtol * scale {
                warnings.push(format!(
                    "quadrature not converged at {nodes} nodes: successive passes differ by {diff:.3e}"
                ));
            }
            return Ok(QuadOutcome {
                value: cur,
                est_error: diff,
                nodes_used: nodes,
                warnings,
            });
        }
        prev = cur;
        panels = next_panels;
    }
}

/// Window edge on the `u` line for a tail at zero or infinity.
fn tail_edge(tail: &Tail, tol: f64, at_zero: bool) -> Result<f64> {
    if !(tail.scale > 0.0 && tail.scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("tail scale must be positive, got {}", tail.scale)));
    }
    let p = tail.exponent;
    let ln_s = tail.scale.ln();
    let edge = if at_zero {
        if p <= -1.0 {
            return Err(Error::InvalidParameter(format!("integrand ~ t^{p} is not integrable at 0")));
        }
        ln_s + tol.ln() / (p + 2.0)
    } else {
        if p >= -1.0 {
            return Err(Error::InvalidParameter(format!("integrand ~ t^{p} is not integrable at infinity")));
        }
        ln_s + tol.ln() / p
    };
    Ok(edge.clamp(-700.0, 700.0))
}

/// Leading-order integral of the tail beyond `t` given the value `g` at `t`.
fn tail_factor(tail: &Tail, t: f64, at_zero: bool) -> f64 {
    let e1 = tail.exponent + 1.0;
    let mut c = t / e1;
    if tail.log_factor {
        c -= t / (e1 * e1 * t.ln());
    }
    if at_zero {
        c
    } else {
        -c
    }
}

/// Integrates `g` between two endpoints in `t` using `t = e^u`.
///
/// Endpoints at `0` or `+inf` are truncated where the next-order term of the
/// declared [`Tail`] falls below `spec.tail_tol`, and the leading-order tail
/// beyond the cut is added back analytically.
pub fn integrate_log_line<F>(g: &F, lo: Endpoint, hi: Endpoint, spec: &QuadSpec) -> Result<QuadOutcome>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    let mut u_lo = match lo {
        Endpoint::Finite(t) if t > 0.0 => t.ln(),
        Endpoint::Zero(ref tail) => tail_edge(tail, spec.tail_tol, true)?,
        _ => return Err(Error::InvalidParameter(format!("bad lower endpoint {lo:?}"))),
    };
    let mut u_hi = match hi {
        Endpoint::Finite(t) if t > 0.0 => t.ln(),
        Endpoint::Infinity(ref tail) => tail_edge(tail, spec.tail_tol, false)?,
        _ => return Err(Error::InvalidParameter(format!("bad upper endpoint {hi:?}"))),
    };
    match (lo, hi) {
        (Endpoint::Zero(_), Endpoint::Finite(_)) => u_lo = u_lo.min(u_hi - 1.0),
        (Endpoint::Finite(_), Endpoint::Infinity(_)) => u_hi = u_hi.max(u_lo + 1.0),
        (Endpoint::Zero(_), Endpoint::Infinity(_)) if u_hi <= u_lo + 1.0 => {
            let mid = 0.5 * (u_lo + u_hi);
            u_lo = mid - 0.5;
            u_hi = mid + 0.5;
        }
        _ => {}
    }
    if u_hi <= u_lo {
        return Err(Error::InvalidParameter("empty integration range".into()));
    }
    let integrand = |u: f64| -> Result<Vec<f64>> {
        let t = u.exp();
        let mut y = g(t)?;
        y.iter_mut().for_each(|v| *v *= t);
        Ok(y)
    };
    let panels = (((u_hi - u_lo) / spec.panel_width).ceil() as usize).max(spec.min_panels);
    let mut out = integrate_adaptive(u_lo, u_hi, panels, spec, &integrand)?;
    if let Endpoint::Zero(ref tail) = lo {
        let a = u_lo.exp();
        let ga = g(a)?;
        let c = tail_factor(tail, a, true);
        out.value.iter_mut().zip(&ga).for_each(|(v, x)| *v += c * x);
    }
    if let Endpoint::Infinity(ref tail) = hi {
        let b = u_hi.exp();
        let gb = g(b)?;
        let c = tail_factor(tail, b, false);
        out.value.iter_mut().zip(&gb).for_each(|(v, x)| *v += c * x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_exact() {
        let rule = GlRule::cached(16);
        let v = integrate_panels(0.0, 2.0, 3, &rule, false, &|x| Ok(vec![x.powi(7), 1.0])).unwrap();
        assert!((v[0] - 32.0).abs() < 1e-12);
        assert!((v[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn parallel_matches_sequential_bitwise() {
        let rule = GlRule::cached(32);
        let f = |x: f64| Ok(vec![x.sin(), (3.0 * x).cos()]);
        let a = integrate_panels(0.0, 5.0, 8, &rule, true, &f).unwrap();
        let b = integrate_panels(0.0, 5.0, 8, &rule, false, &f).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stieltjes_type_integral() {
        // int_0^inf t^(a-1)/(t+1) dt = pi / sin(a pi)
        for a in [0.1, 0.3, 0.5, 0.7, 0.95] {
            let f = |t: f64| Ok(vec![t.powf(a - 1.0) / (t + 1.0)]);
            let out = integrate_log_line(
                &f,
                Endpoint::Zero(Tail::power(a - 1.0, 1.0)),
                Endpoint::Infinity(Tail::power(a - 2.0, 1.0)),
                &QuadSpec::default(),
            )
            .unwrap();
            let exact = PI / (a * PI).sin();
            assert!((out.value[0] - exact).abs() < 1e-12 * exact, "a={a}: {} vs {exact}", out.value[0]);
            assert!(out.warnings.is_empty());
        }
    }

    #[test]
    fn log_weighted_integral() {
        // int_0^inf t^(a-1) ln t /(t+1) dt = -pi^2 cos(a pi) / sin(a pi)^2
        let a = 0.4;
        let f = |t: f64| Ok(vec![t.powf(a - 1.0) * t.ln() / (t + 1.0)]);
        let out = integrate_log_line(
            &f,
            Endpoint::Zero(Tail::power(a - 1.0, 1.0).with_log()),
            Endpoint::Infinity(Tail::power(a - 2.0, 1.0).with_log()),
            &QuadSpec::default(),
        )
        .unwrap();
        let s = (a * PI).sin();
        let exact = -PI * PI * (a * PI).cos() / (s * s);
        assert!((out.value[0] - exact).abs() < 1e-10 * exact.abs(), "{} vs {exact}", out.value[0]);
    }

    #[test]
    fn finite_piece() {
        // int_0^1 t^0.3 dt = 1/1.3
        let f = |t: f64| Ok(vec![t.powf(0.3)]);
        let out = integrate_log_line(
            &f,
            Endpoint::Zero(Tail::power(0.3, 1.0)),
            Endpoint::Finite(1.0),
            &QuadSpec::default(),
        )
        .unwrap();
        assert!((out.value[0] - 1.0 / 1.3).abs() < 1e-14);
    }

    #[test]
    fn rejects_nonintegrable_tails() {
        let f = |t: f64| Ok(vec![1.0 / t]);
        assert!(integrate_log_line(
            &f,
            Endpoint::Zero(Tail::power(-1.0, 1.0)),
            Endpoint::Finite(1.0),
            &QuadSpec::default()
        )
        .is_err());
    }
}
