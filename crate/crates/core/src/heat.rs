//! The fractional heat equation `∂_t u + (-Δ)^α u = 0` on a periodic grid.
//!
//! Two right-hand sides are provided: the fractional Laplacian itself and
//! the divergence form `2 div(Vec f_β(∇)u)` with `β = 2α - 1`. Both are
//! diagonal in Fourier space and agree mode by mode.
//!
//! [`LogGridOperator`] models `T = Σ ξ_ℓ ∂_{ξ_ℓ} e_ℓ` on `ξ ∈ (0, ∞)³`
//! through the substitution `ξ = e^x`, under which `T = J^{-1} ∇ J`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{apply_real_multiplier, SpectralField, Wavenumbers};
use crate::nabla::{
    div_vec_multiplier, divergence, frac_laplacian, frac_nabla_closed, frac_nabla_quadrature, nabla_apply,
    scal_vec_split,
};
use crate::quad::QuadSpec;
use crate::quat::Quaternion;
use crate::report::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ExactPropagator,
    ExplicitEuler,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" | "exact-propagator" => Ok(Self::ExactPropagator),
            "euler" | "explicit-euler" => Ok(Self::ExplicitEuler),
            other => Err(Error::Parse(format!("unknown scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvolutionConfig {
    pub alpha: f64,
    pub beta: f64,
    pub dt: f64,
    pub steps: usize,
    pub scheme: Scheme,
}

impl EvolutionConfig {
    /// `α ∈ (0, 1]`, `dt > 0`; `β` is set to `2α - 1`.
    pub fn new(alpha: f64, dt: f64, steps: usize, scheme: Scheme) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            alpha,
            beta: 2.0 * alpha - 1.0,
            dt,
            steps,
            scheme,
        })
    }

    fn require_divergence_range(&self) -> Result<()> {
        if !(self.alpha > 0.5 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "the divergence form needs alpha in (1/2, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Largest stable Euler step, `2 / max |ξ|^{2α}`.
    pub fn euler_limit(&self, wn: &Wavenumbers) -> f64 {
        2.0 / wn.max_norm().powf(2.0 * self.alpha)
    }

    fn check_stability(&self, wn: &Wavenumbers) -> Result<()> {
        if self.scheme == Scheme::ExplicitEuler && self.dt > self.euler_limit(wn) {
            return Err(Error::Stability(format!(
                "dt = {} exceeds the explicit Euler bound {}",
                self.dt,
                self.euler_limit(wn)
            )));
        }
        Ok(())
    }
}

/// One-step multiplier of the direct form for a mode with `|ξ| = r`.
pub fn direct_multiplier(r: f64, cfg: &EvolutionConfig) -> f64 {
    let lambda = r.powf(2.0 * cfg.alpha);
    match cfg.scheme {
        Scheme::ExactPropagator => (-lambda * cfg.dt).exp(),
        Scheme::ExplicitEuler => 1.0 - cfg.dt * lambda,
    }
}

pub fn heat_step_direct(u: &SpectralField, cfg: &EvolutionConfig) -> Result<SpectralField> {
    u.require_real("heat step")?;
    let wn = Wavenumbers::for_field(u);
    cfg.check_stability(&wn)?;
    apply_real_multiplier(u, |k| direct_multiplier(wn.norm(k), cfg))
}

/// `2 div(Vec f_β(∇)u)` evaluated on the grid.
pub fn divergence_rhs(u: &SpectralField, beta: f64) -> Result<Vec<f64>> {
    let w = frac_nabla_closed(u, beta)?;
    let (_, vec) = scal_vec_split(&w);
    Ok(divergence(u.dims(), u.lengths(), &vec).into_iter().map(|x| 2.0 * x).collect())
}

pub fn heat_step_divergence(u: &SpectralField, cfg: &EvolutionConfig) -> Result<SpectralField> {
    cfg.require_divergence_range()?;
    u.require_real("heat step")?;
    let wn = Wavenumbers::for_field(u);
    cfg.check_stability(&wn)?;
    match cfg.scheme {
        Scheme::ExplicitEuler => {
            let rhs = divergence_rhs(u, cfg.beta)?;
            let values = u
                .values()
                .iter()
                .zip(&rhs)
                .map(|(q, r)| Quaternion::real(q.w + cfg.dt * r))
                .collect();
            u.with_values(values)
        }
        Scheme::ExactPropagator => apply_real_multiplier(u, |k| {
            let lambda = 2.0 * div_vec_multiplier(wn.xi(k), cfg.beta).re;
            (lambda * cfg.dt).exp()
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeatForm {
    Direct,
    Divergence,
    Both,
}

impl std::str::FromStr for HeatForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Self::Direct),
            "divergence" => Ok(Self::Divergence),
            "both" => Ok(Self::Both),
            other => Err(Error::Parse(format!("unknown form {other:?}"))),
        }
    }
}

/// Initial data of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Periodic bump `exp(-|x - L/2|²/(2σ²))` with `σ = min L / 10`.
    Gauss,
    /// `Σ a cos(2π k·x/L)` over `(k, a)` pairs.
    Modes(Vec<([i64; 3], f64)>),
    File(PathBuf),
}

impl std::str::FromStr for InitialCondition {
    type Err = Error;
    /// `gauss`, `modes:k1,k2,k3:a;...` or `file:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "gauss" {
            return Ok(Self::Gauss);
        }
        if let Some(p) = s.strip_prefix("file:") {
            return Ok(Self::File(PathBuf::from(p)));
        }
        let Some(spec) = s.strip_prefix("modes:") else {
            return Err(Error::Parse(format!("unknown initial condition {s:?}")));
        };
        let bad = || Error::Parse(format!("bad mode list {spec:?}, expected k1,k2,k3:amp;..."));
        let modes = spec
            .split(';')
            .filter(|m| !m.is_empty())
            .map(|m| {
                let (k, a) = m.split_once(':').ok_or_else(bad)?;
                let k: Vec<i64> = k.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
                let k: [i64; 3] = k.try_into().map_err(|_| bad())?;
                let a: f64 = a.trim().parse().map_err(|_| bad())?;
                if !a.is_finite() {
                    return Err(bad());
                }
                Ok((k, a))
            })
            .collect::<Result<Vec<_>>>()?;
        if modes.is_empty() {
            return Err(bad());
        }
        Ok(Self::Modes(modes))
    }
}

impl InitialCondition {
    pub fn build(&self, dims: [usize; 3], lengths: [f64; 3]) -> Result<SpectralField> {
        let tau = 2.0 * std::f64::consts::PI;
        match self {
            Self::Gauss => {
                let sigma = lengths.iter().cloned().fold(f64::INFINITY, f64::min) / 10.0;
                SpectralField::real_from_fn(dims, lengths, |x| {
                    let r2: f64 = (0..3).map(|a| (x[a] - lengths[a] / 2.0).powi(2)).sum();
                    (-r2 / (2.0 * sigma * sigma)).exp()
                })
            }
            Self::Modes(modes) => SpectralField::real_from_fn(dims, lengths, |x| {
                modes
                    .iter()
                    .map(|(k, a)| a * (tau * (0..3).map(|i| k[i] as f64 * x[i] / lengths[i]).sum::<f64>()).cos())
                    .sum()
            }),
            Self::File(p) => {
                let f = SpectralField::load(p)?;
                if f.dims() != dims || f.lengths() != lengths {
                    return Err(Error::Dimension(format!(
                        "{} holds a {:?}/{:?} grid, expected {dims:?}/{lengths:?}",
                        p.display(),
                        f.dims(),
                        f.lengths()
                    )));
                }
                Ok(f)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub evolution: EvolutionConfig,
    pub form: HeatForm,
    /// Snapshot every `m` steps (step 0 included); `None` for no snapshots.
    pub snap_every: Option<usize>,
}

/// One line of `norms.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormRow {
    pub step: usize,
    pub t: f64,
    pub l2: f64,
    pub min: f64,
    pub max: f64,
    /// `‖u_direct - u_divergence‖` when both forms run.
    pub form_delta: Option<f64>,
}

pub const NORMS_HEADER: &str = "step,t,l2,min,max,form_delta";

pub fn norms_csv(rows: &[NormRow]) -> String {
    let mut s = format!("{NORMS_HEADER}\n");
    for r in rows {
        let delta = r.form_delta.map(fmt_f64).unwrap_or_default();
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.step,
            fmt_f64(r.t),
            fmt_f64(r.l2),
            fmt_f64(r.min),
            fmt_f64(r.max),
            delta
        ));
    }
    s
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub rows: Vec<NormRow>,
    pub snapshots: Vec<(usize, SpectralField)>,
    pub final_field: SpectralField,
}

impl SimulationOutput {
    pub fn max_form_delta(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.form_delta).reduce(f64::max)
    }
}

pub fn snapshot_name(step: usize) -> String {
    format!("snap_{step:06}.sqf")
}

/// Steps the chosen form(s); with an output directory writes `norms.csv`
/// and SQF1 snapshots there.
pub fn run_simulation(initial: &SpectralField, sim: &SimulationConfig, out_dir: Option<&Path>) -> Result<SimulationOutput> {
    let cfg = &sim.evolution;
    initial.require_real("heat simulation")?;
    if sim.form != HeatForm::Direct {
        cfg.require_divergence_range()?;
    }
    if sim.snap_every == Some(0) {
        return Err(Error::InvalidParameter("snapshot interval must be positive".into()));
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    let step = |u: &SpectralField, divergence: bool| {
        if divergence {
            heat_step_divergence(u, cfg)
        } else {
            heat_step_direct(u, cfg)
        }
    };
    let primary_divergence = sim.form == HeatForm::Divergence;
    let mut u = initial.clone();
    let mut shadow = (sim.form == HeatForm::Both).then(|| initial.clone());
    let mut rows = Vec::with_capacity(cfg.steps + 1);
    let mut snapshots = Vec::new();
    for n in 0..=cfg.steps {
        if n > 0 {
            u = step(&u, primary_divergence)?;
            if let Some(s) = shadow.as_mut() {
                *s = step(s, true)?;
            }
        }
        let (min, max) = u.real_range();
        rows.push(NormRow {
            step: n,
            t: n as f64 * cfg.dt,
            l2: u.l2_norm(),
            min,
            max,
            form_delta: shadow.as_ref().map(|s| u.l2_diff(s)),
        });
        if sim.snap_every.is_some_and(|m| n % m == 0) {
            if let Some(dir) = out_dir {
                u.save(&dir.join(snapshot_name(n)))?;
            }
            snapshots.push((n, u.clone()));
        }
    }
    if let Some(dir) = out_dir {
        let p = dir.join("norms.csv");
        fs::write(&p, norms_csv(&rows)).map_err(|e| Error::io(format!("writing {}", p.display()), e))?;
    }
    Ok(SimulationOutput {
        rows,
        snapshots,
        final_field: u,
    })
}

/// Periodic grid in `x = ln ξ` covering `ξ ∈ e^{x0} · [1, e^{L})³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogGridOperator {
    pub dims: [usize; 3],
    pub x0: [f64; 3],
    pub lengths: [f64; 3],
}

impl LogGridOperator {
    pub fn new(dims: [usize; 3], x0: [f64; 3], lengths: [f64; 3]) -> Result<Self> {
        SpectralField::zeros(dims, lengths)?;
        Ok(Self { dims, x0, lengths })
    }

    fn x(&self, local: [f64; 3]) -> [f64; 3] {
        [local[0] + self.x0[0], local[1] + self.x0[1], local[2] + self.x0[2]]
    }

    /// `ξ = e^x` of grid point `k`.
    pub fn xi(&self, k: usize) -> [f64; 3] {
        let f = SpectralField::zeros(self.dims, self.lengths).expect("valid grid");
        self.x(f.coords(k)).map(f64::exp)
    }

    /// `J v = v ∘ ι` sampled on the `x` grid.
    pub fn pull_back(&self, v: impl Fn([f64; 3]) -> Quaternion + Sync) -> Result<SpectralField> {
        SpectralField::from_fn(self.dims, self.lengths, |loc| v(self.x(loc).map(f64::exp)))
    }

    /// `J^{-1}`: the samples as `(ξ, v(ξ))` pairs.
    pub fn push_forward(&self, jv: &SpectralField) -> Vec<([f64; 3], Quaternion)> {
        (0..jv.len()).map(|k| (self.x(jv.coords(k)).map(f64::exp), jv.values()[k])).collect()
    }

    /// `J T v = ∇ J v`.
    pub fn apply_t(&self, jv: &SpectralField) -> Result<SpectralField> {
        self.check(jv)?;
        nabla_apply(jv)
    }

    fn check(&self, jv: &SpectralField) -> Result<()> {
        if jv.dims() != self.dims || jv.lengths() != self.lengths {
            return Err(Error::Dimension("field does not live on this log grid".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct VarcoefResult {
    /// Route (a): `½ J^{-1} (-Δ)^{(α-1)/2} J T v`.
    pub closed: SpectralField,
    /// Route (b): `J^{-1} Vec f_α(∇) J v`, by the resolvent integral for `α < 1`.
    pub conjugated: SpectralField,
    pub rel_deviation: f64,
    pub est_error: f64,
    pub warnings: Vec<String>,
}

/// `Vec f_α(T)v` for a real `v` given as `J v` on the log grid, both routes.
pub fn varcoef_vec_fracpower(op: &LogGridOperator, jv: &SpectralField, alpha: f64, quad: &QuadSpec) -> Result<VarcoefResult> {
    op.check(jv)?;
    jv.require_real("variable-coefficient power")?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let jtv = op.apply_t(jv)?;
    let closed = frac_laplacian(&jtv, (alpha - 1.0) / 2.0)?.map(|q| q.scale(0.5));
    let (full, est_error, warnings) = if alpha < 1.0 {
        let r = frac_nabla_quadrature(jv, alpha, quad)?;
        (r.field, r.est_error, r.warnings)
    } else {
        (frac_nabla_closed(jv, alpha)?, 0.0, Vec::new())
    };
    let conjugated = full.map(|q| q.imag());
    let rel_deviation = conjugated.rel_l2_diff(&closed);
    Ok(VarcoefResult {
        closed,
        conjugated,
        rel_deviation,
        est_error,
        warnings,
    })
}
