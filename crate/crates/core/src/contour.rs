//! Oriented contours in a slice plane `C_I` and the contour integrator used
//! by the S-functional calculus.
//!
//! Arcs are described in the `(u, v)` coordinates of `u + I v`. Every
//! contour is a union of closed, positively oriented loops whose point set is
//! symmetric under `v -> -v`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{max_abs, max_abs_diff, pairwise_sum, integrate_panels, GlRule, QuadOutcome};
use crate::qmatrix::{SpectralSphere, SPHERE_MERGE_TOL};
use crate::quat::Quaternion;
use crate::slice_fn::Excluded;

/// Largest allowed gap between consecutive arc endpoints.
pub const CHAIN_TOL: f64 = 1e-12;
/// Minimal ratio between the distance to the forbidden set and the spectral
/// radius around a centre for the single-circle contour.
pub const SINGLE_CIRCLE_RATIO: f64 = 1.5;

/// One oriented piece of a contour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContourArc {
    /// `c + r e^{iθ}` for `θ` running from `theta0` to `theta1`.
    Circle {
        cu: f64,
        cv: f64,
        r: f64,
        theta0: f64,
        theta1: f64,
    },
    /// Straight segment from `(u0, v0)` to `(u1, v1)`.
    Segment { u0: f64, v0: f64, u1: f64, v1: f64 },
}

impl ContourArc {
    /// Full counterclockwise circle.
    pub fn circle(cu: f64, cv: f64, r: f64) -> Self {
        ContourArc::Circle {
            cu,
            cv,
            r,
            theta0: 0.0,
            theta1: TAU,
        }
    }

    pub fn segment(from: Complex64, to: Complex64) -> Self {
        ContourArc::Segment {
            u0: from.re,
            v0: from.im,
            u1: to.re,
            v1: to.im,
        }
    }

    /// Point at parameter `t ∈ [0, 1]`.
    pub fn point(&self, t: f64) -> Complex64 {
        match *self {
            ContourArc::Circle {
                cu,
                cv,
                r,
                theta0,
                theta1,
            } => Complex64::new(cu, cv) + Complex64::from_polar(r, theta0 + t * (theta1 - theta0)),
            ContourArc::Segment { u0, v0, u1, v1 } => Complex64::new(u0 + t * (u1 - u0), v0 + t * (v1 - v0)),
        }
    }

    /// `dz/dt`.
    pub fn derivative(&self, t: f64) -> Complex64 {
        match *self {
            ContourArc::Circle { r, theta0, theta1, .. } => {
                let d = theta1 - theta0;
                Complex64::i() * Complex64::from_polar(r * d, theta0 + t * d)
            }
            ContourArc::Segment { u0, v0, u1, v1 } => Complex64::new(u1 - u0, v1 - v0),
        }
    }

    pub fn start(&self) -> Complex64 {
        self.point(0.0)
    }

    pub fn end(&self) -> Complex64 {
        self.point(1.0)
    }

    pub fn length(&self) -> f64 {
        match *self {
            ContourArc::Circle { r, theta0, theta1, .. } => r * (theta1 - theta0).abs(),
            ContourArc::Segment { u0, v0, u1, v1 } => (u1 - u0).hypot(v1 - v0),
        }
    }

    pub fn distance(&self, z: Complex64) -> f64 {
        match *self {
            ContourArc::Circle {
                cu,
                cv,
                r,
                theta0,
                theta1,
            } => {
                let d = z - Complex64::new(cu, cv);
                let (lo, hi) = if theta1 >= theta0 { (theta0, theta1) } else { (theta1, theta0) };
                let on_full = hi - lo >= TAU - 1e-15;
                let ang = (d.arg() - lo).rem_euclid(TAU);
                if on_full || ang <= hi - lo {
                    (d.norm() - r).abs()
                } else {
                    (z - self.start()).norm().min((z - self.end()).norm())
                }
            }
            ContourArc::Segment { .. } => {
                let a = self.start();
                let ab = self.end() - a;
                let len2 = ab.norm_sqr();
                let t = if len2 == 0.0 {
                    0.0
                } else {
                    (((z - a) * ab.conj()).re / len2).clamp(0.0, 1.0)
                };
                (z - (a + ab * t)).norm()
            }
        }
    }

    fn is_full_circle(&self) -> bool {
        matches!(*self, ContourArc::Circle { theta0, theta1, .. } if (theta1 - theta0).abs() >= TAU - 1e-15)
    }
}

fn default_axis() -> Quaternion {
    Quaternion::E1
}
fn default_nodes() -> usize {
    64
}
fn default_degree() -> usize {
    32
}
fn default_rtol() -> f64 {
    1e-9
}
fn default_max_nodes() -> usize {
    1 << 16
}

/// A discretised boundary `∂(U ∩ C_I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    /// The unit imaginary `I` of the slice plane.
    #[serde(default = "default_axis")]
    pub slice_axis: Quaternion,
    pub arcs: Vec<ContourArc>,
    /// Nodes per arc on the first pass.
    #[serde(default = "default_nodes")]
    pub nodes_per_arc: usize,
    /// Gauss–Legendre degree of each panel.
    #[serde(default = "default_degree")]
    pub panel_degree: usize,
    /// Two passes must agree to `rtol` relative to the result's max-norm.
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    /// Cap on the total node count of one pass.
    #[serde(default = "default_max_nodes")]
    pub max_nodes: usize,
}

impl ContourSpec {
    pub fn new(arcs: Vec<ContourArc>) -> Self {
        Self {
            slice_axis: default_axis(),
            arcs,
            nodes_per_arc: default_nodes(),
            panel_degree: default_degree(),
            rtol: default_rtol(),
            max_nodes: default_max_nodes(),
        }
    }

    /// Circle of radius `r` centred at `(cu, cv)`; a mirror circle is added when `cv != 0`.
    pub fn circle(cu: f64, cv: f64, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite() && cu.is_finite() && cv.is_finite()) {
            return Err(Error::InvalidParameter(format!("bad circle ({cu}, {cv}, {r})")));
        }
        if cv == 0.0 {
            return Ok(Self::new(vec![ContourArc::circle(cu, 0.0, r)]));
        }
        if r >= cv.abs() {
            return Err(Error::InvalidParameter(format!(
                "circle around ({cu}, {cv}) with radius {r} meets its mirror image"
            )));
        }
        Ok(Self::new(vec![ContourArc::circle(cu, cv.abs(), r), ContourArc::circle(cu, -cv.abs(), r)]))
    }

    /// Positively oriented rectangle `[u0, u1] × [-h, h]`.
    pub fn rectangle(u0: f64, u1: f64, h: f64) -> Result<Self> {
        if !(u1 > u0 && h > 0.0) {
            return Err(Error::InvalidParameter(format!("bad rectangle [{u0}, {u1}] x [-{h}, {h}]")));
        }
        let c = [
            Complex64::new(u0, -h),
            Complex64::new(u1, -h),
            Complex64::new(u1, h),
            Complex64::new(u0, h),
        ];
        Ok(Self::new((0..4).map(|k| ContourArc::segment(c[k], c[(k + 1) % 4])).collect()))
    }

    pub fn with_axis(mut self, axis: Quaternion) -> Result<Self> {
        let n = axis.imag().norm();
        if !(n > 0.0) || axis.w.abs() > 1e-12 * n {
            return Err(Error::InvalidParameter(format!("slice axis {axis} is not imaginary")));
        }
        self.slice_axis = axis.imag() / n;
        Ok(self)
    }

    pub fn with_nodes(mut self, nodes_per_arc: usize) -> Self {
        self.nodes_per_arc = nodes_per_arc.max(1);
        self
    }

    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = rtol;
        self
    }

    /// Largest arc length divided by its first-pass node count.
    pub fn node_spacing(&self) -> f64 {
        self.arcs.iter().map(|a| self.arc_spacing(a)).fold(0.0, f64::max)
    }

    fn arc_spacing(&self, arc: &ContourArc) -> f64 {
        arc.length() / (self.first_pass_panels() * self.panel_degree.max(1)) as f64
    }

    /// `(distance, spacing)` of the first arc that `z` is within one node spacing of.
    fn too_close(&self, z: Complex64) -> Option<(f64, f64)> {
        self.arcs.iter().find_map(|a| {
            let (d, h) = (a.distance(z), self.arc_spacing(a));
            (d <= h).then_some((d, h))
        })
    }

    fn first_pass_panels(&self) -> usize {
        self.nodes_per_arc.div_ceil(self.panel_degree.max(1)).max(1)
    }

    pub fn distance(&self, z: Complex64) -> f64 {
        self.arcs.iter().map(|a| a.distance(z)).fold(f64::INFINITY, f64::min)
    }

    /// Winding number of the contour around `z`.
    pub fn winding_number(&self, z: Complex64) -> i64 {
        let mut total = 0.0;
        for arc in &self.arcs {
            if arc.is_full_circle() {
                if let ContourArc::Circle { cu, cv, r, theta0, theta1 } = *arc {
                    if (z - Complex64::new(cu, cv)).norm() < r {
                        total += (theta1 - theta0).signum() * TAU;
                    }
                    continue;
                }
            }
            let m = 2048;
            let mut prev = (arc.point(0.0) - z).arg();
            for k in 1..=m {
                let cur = (arc.point(k as f64 / m as f64) - z).arg();
                total += (cur - prev + PI).rem_euclid(TAU) - PI;
                prev = cur;
            }
        }
        (total / TAU).round() as i64
    }

    /// Checks closedness, symmetry under `v -> -v` and the slice axis.
    pub fn validate(&self) -> Result<()> {
        if self.arcs.is_empty() {
            return Err(Error::InvalidParameter("contour has no arcs".into()));
        }
        let scale = self
            .arcs
            .iter()
            .map(|a| a.start().norm().max(a.length()))
            .fold(1.0f64, f64::max);
        let mut loop_start = self.arcs[0].start();
        for (k, arc) in self.arcs.iter().enumerate() {
            let end = arc.end();
            let next = self.arcs.get(k + 1).map(|a| a.start());
            if next.is_some_and(|n| (n - end).norm() <= CHAIN_TOL * scale) {
                continue;
            }
            if (end - loop_start).norm() > CHAIN_TOL * scale {
                return Err(Error::InvalidParameter(format!("contour arc {k} does not close its loop")));
            }
            if let Some(n) = next {
                loop_start = n;
            }
        }
        for arc in &self.arcs {
            for k in 0..16 {
                let z = arc.point((k as f64 + 0.5) / 16.0);
                if self.distance(z.conj()) > 1e-9 * scale {
                    return Err(Error::InvalidParameter(format!(
                        "contour is not symmetric under conjugation near {z}"
                    )));
                }
            }
        }
        let a = self.slice_axis;
        if (a.norm() - 1.0).abs() > 1e-12 || a.w.abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("slice axis {a} is not a unit imaginary")));
        }
        Ok(())
    }

    /// Requires every sphere in `inside` to be enclosed once, every sphere in
    /// `outside` and every forbidden point or ray to be outside, all at more
    /// than one node spacing from the contour.
    pub fn check_enclosure(&self, inside: &[SpectralSphere], outside: &[SpectralSphere], forbidden: &Excluded) -> Result<()> {
        for (set, want) in [(inside, 1), (outside, 0)] {
            for s in set {
                let z = Complex64::new(s.u, s.v);
                if let Some((d, h)) = self.too_close(z) {
                    return Err(Error::Enclosure(format!(
                        "sphere ({}, {}) at distance {d:.3e} from the contour (node spacing {h:.3e})",
                        s.u, s.v
                    )));
                }
                let w = self.winding_number(z);
                if w != want {
                    return Err(Error::Enclosure(format!(
                        "sphere ({}, {}) has winding number {w}, expected {want}",
                        s.u, s.v
                    )));
                }
            }
        }
        for p in &forbidden.points {
            if self.too_close(*p).is_some() || self.winding_number(*p) != 0 {
                return Err(Error::Enclosure(format!("singularity {p} of the function is not outside the contour")));
            }
        }
        for ray in &forbidden.rays {
            let start = Complex64::from(ray.start);
            let hits = self.arcs.iter().any(|arc| {
                let h = self.arc_spacing(arc);
                (0..=1024).any(|k| ray.distance(arc.point(k as f64 / 1024.0)) <= h)
            });
            if hits || self.winding_number(start) != 0 {
                return Err(Error::Enclosure(format!(
                    "branch cut starting at {} meets the region bounded by the contour",
                    ray.start
                )));
            }
        }
        Ok(())
    }

    /// Automatic contour around `inside`, keeping `outside` spheres and the
    /// forbidden set out.
    ///
    /// A single circle centred on the real axis is tried first; if no centre
    /// separates well enough, one circle per spectral point is used.
    pub fn around(inside: &[SpectralSphere], outside: &[SpectralSphere], forbidden: &Excluded) -> Result<Self> {
        if inside.is_empty() {
            return Err(Error::InvalidParameter("no spectral spheres to enclose".into()));
        }
        let pts_in = mirrored(inside);
        let pts_out = mirrored(outside);
        let rho = pts_in
            .iter()
            .chain(&pts_out)
            .map(|z| z.norm())
            .fold(1.0f64, f64::max);
        let away = |z: Complex64| {
            let d = pts_out.iter().map(|p| (z - p).norm()).fold(f64::INFINITY, f64::min);
            d.min(forbidden.distance(z))
        };
        let umin = pts_in.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let umax = pts_in.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let r_in = |c: f64| pts_in.iter().map(|z| (z - c).norm()).fold(0.0f64, f64::max);

        if pts_out.is_empty() && forbidden.is_empty() {
            let c = 0.5 * (umin + umax);
            let r = (2.0 * r_in(c)).max(0.5 * rho);
            return Self::circle(c, 0.0, r);
        }

        let (lo, hi) = (umin - 2.0 * rho, umax + 2.0 * rho);
        let mut best: Option<(f64, f64, f64)> = None;
        let mut best_ratio = 0.0;
        let steps = 800;
        for k in 0..=steps {
            let c = lo + (hi - lo) * k as f64 / steps as f64;
            let (ri, ro) = (r_in(c), away(Complex64::from(c)));
            let ratio = if ri > 0.0 { ro / ri } else { f64::INFINITY };
            if ro > 0.0 && ratio > best_ratio {
                best_ratio = ratio;
                best = Some((ri, ro, c));
            }
        }
        if let Some((ri, ro, c)) = best {
            if ro.is_finite() && ro >= SINGLE_CIRCLE_RATIO * ri {
                let r = (ri.max(ro / 16.0) * ro).sqrt();
                return Self::circle(c, 0.0, r);
            }
            if ro.is_infinite() {
                return Self::circle(c, 0.0, (2.0 * ri).max(0.5 * rho));
            }
        }

        let mut arcs = Vec::new();
        let all: Vec<Complex64> = pts_in.iter().chain(&pts_out).copied().collect();
        for p in &pts_in {
            let gap = all
                .iter()
                .filter(|q| (*q - p).norm() > 0.0)
                .map(|q| (q - p).norm())
                .fold(f64::INFINITY, f64::min);
            let mut r = 0.5 * gap.min(forbidden.distance(*p));
            if !r.is_finite() {
                r = 0.5 * rho;
            }
            if r <= 1e-10 * rho {
                return Err(Error::Enclosure(format!(
                    "no room for a contour around {p}: nearest obstacle at {:.3e}",
                    2.0 * r
                )));
            }
            arcs.push(ContourArc::circle(p.re, p.im, r));
        }
        Ok(Self::new(arcs))
    }

    /// [`ContourSpec::around`] the whole spectrum.
    pub fn auto(spectrum: &[SpectralSphere], forbidden: &Excluded) -> Result<Self> {
        Self::around(spectrum, &[], forbidden)
    }

    /// Integrates `f(z, dz/dt)` over all arcs, doubling the panel count until
    /// two passes agree to `rtol` or to the roundoff level of `∫|f| |dz|`.
    pub fn integrate<F>(&self, f: &F) -> Result<QuadOutcome>
    where
        F: Fn(Complex64, Complex64) -> Result<Vec<f64>> + Sync,
    {
        let rule = GlRule::cached(self.panel_degree.max(1));
        // each node also reports |f| so that the roundoff floor of the sum is known
        let with_abs = |z: Complex64, dz: Complex64| -> Result<Vec<f64>> {
            let mut y = f(z, dz)?;
            let abs: Vec<f64> = y.iter().map(|v| v.abs()).collect();
            y.extend(abs);
            Ok(y)
        };
        let pass = |panels: usize| -> Result<(Vec<f64>, f64)> {
            let parts = self
                .arcs
                .iter()
                .map(|arc| integrate_panels(0.0, 1.0, panels, &rule, true, &|t| with_abs(arc.point(t), arc.derivative(t))))
                .collect::<Result<Vec<_>>>()?;
            let dim = parts.first().map_or(0, Vec::len);
            let mut sum = pairwise_sum(&parts, dim);
            let l1 = max_abs(&sum[dim / 2..]);
            sum.truncate(dim / 2);
            Ok((sum, l1))
        };
        let per_pass = |panels: usize| panels * rule.len() * self.arcs.len();
        let mut panels = self.first_pass_panels();
        let (mut prev, _) = pass(panels)?;
        let mut warnings = Vec::new();
        loop {
            let next = panels * 2;
            let (cur, l1) = pass(next)?;
            let diff = max_abs_diff(&cur, &prev);
            let tol = self.rtol * max_abs(&cur) + 64.0 * f64::EPSILON * l1;
            let converged = diff <= tol;
            if converged || per_pass(next * 2) > self.max_nodes {
                if !converged {
                    warnings.push(format!(
                        "contour quadrature not converged at {} nodes: passes differ by {diff:.3e}",
                        per_pass(next)
                    ));
                }
                return Ok(QuadOutcome {
                    value: cur,
                    est_error: diff,
                    nodes_used: per_pass(next),
                    warnings,
                });
            }
            prev = cur;
            panels = next;
        }
    }
}

/// Sphere representatives in the upper half-plane together with their mirrors.
fn mirrored(spheres: &[SpectralSphere]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(2 * spheres.len());
    for s in spheres {
        if s.v.abs() <= SPHERE_MERGE_TOL {
            out.push(Complex64::from(s.u));
        } else {
            out.push(Complex64::new(s.u, s.v.abs()));
            out.push(Complex64::new(s.u, -s.v.abs()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slice_fn::Ray;

    fn sphere(u: f64, v: f64) -> SpectralSphere {
        SpectralSphere { u, v, mult: 1 }
    }

    #[test]
    fn circle_integral_of_inverse() {
        let c = ContourSpec::circle(0.5, 0.0, 2.0).unwrap();
        c.validate().unwrap();
        // (1/2πi) ∮ dz / (z - 1) = 1
        let out = c
            .integrate(&|z, dz| {
                let w = dz / (z - 1.0) / Complex64::new(0.0, TAU);
                Ok(vec![w.re, w.im])
            })
            .unwrap();
        assert!((out.value[0] - 1.0).abs() < 1e-12 && out.value[1].abs() < 1e-12);
        assert!(out.est_error >= 0.0 && out.warnings.is_empty());
    }

    #[test]
    fn rectangle_is_closed_and_symmetric() {
        let c = ContourSpec::rectangle(-1.0, 3.0, 2.0).unwrap();
        c.validate().unwrap();
        assert_eq!(c.winding_number(Complex64::new(1.0, 0.5)), 1);
        assert_eq!(c.winding_number(Complex64::new(4.0, 0.0)), 0);
        let out = c.integrate(&|z, dz| {
            let w = dz * z * z;
            Ok(vec![w.re, w.im])
        });
        assert!(crate::quad::max_abs(&out.unwrap().value) < 1e-12);
    }

    #[test]
    fn asymmetric_contour_rejected() {
        let c = ContourSpec::new(vec![ContourArc::circle(0.0, 1.0, 0.5)]);
        assert!(c.validate().is_err());
        assert!(ContourSpec::circle(0.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn open_chain_rejected() {
        let a = ContourArc::segment(Complex64::new(0.0, -1.0), Complex64::new(1.0, 0.0));
        let b = ContourArc::segment(Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
        assert!(ContourSpec::new(vec![a, b]).validate().is_err());
    }

    #[test]
    fn auto_single_circle_without_obstacles() {
        let spec = [sphere(1.0, 0.0), sphere(-2.0, 1.0)];
        let c = ContourSpec::auto(&spec, &Excluded::default()).unwrap();
        assert_eq!(c.arcs.len(), 1);
        c.check_enclosure(&spec, &[], &Excluded::default()).unwrap();
    }

    #[test]
    fn auto_avoids_cut() {
        let cut = Excluded {
            points: vec![],
            rays: vec![Ray {
                start: 0.0,
                toward_negative: true,
            }],
        };
        let spec = [sphere(4.0, 0.0), sphere(1.0, 0.5)];
        let c = ContourSpec::auto(&spec, &cut).unwrap();
        c.validate().unwrap();
        c.check_enclosure(&spec, &[], &cut).unwrap();

        // sector close to the cut forces one circle per point
        let spec = [sphere(-1.0, 0.2), sphere(4.0, 0.0)];
        let c = ContourSpec::auto(&spec, &cut).unwrap();
        assert_eq!(c.arcs.len(), 3);
        c.validate().unwrap();
        c.check_enclosure(&spec, &[], &cut).unwrap();
    }

    #[test]
    fn around_subset_excludes_rest() {
        let a = [sphere(2.0, 0.0)];
        let b = [sphere(0.0, 1.0)];
        let c = ContourSpec::around(&a, &b, &Excluded::default()).unwrap();
        c.check_enclosure(&a, &b, &Excluded::default()).unwrap();
        assert!(c.check_enclosure(&b, &a, &Excluded::default()).is_err());
    }

    #[test]
    fn enclosure_detects_near_points() {
        let c = ContourSpec::circle(0.0, 0.0, 1.0).unwrap();
        let err = c.check_enclosure(&[sphere(1.0 + 1e-9, 0.0)], &[], &Excluded::default());
        assert!(matches!(err, Err(Error::Enclosure(_))));
        let cut = Excluded {
            points: vec![],
            rays: vec![Ray {
                start: 0.5,
                toward_negative: true,
            }],
        };
        assert!(c.check_enclosure(&[], &[], &cut).is_err());
    }

    #[test]
    fn serde_roundtrip() {
        let c = ContourSpec::circle(1.0, 0.5, 0.25).unwrap().with_axis(Quaternion::E3).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        let back: ContourSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
