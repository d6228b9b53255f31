use std::fmt;
use std::path::Path;

use serde::Serialize;
use squatcalc_core::acceptance::{run_criterion, CriterionOutcome, CRITERIA};
use squatcalc_core::calculus::funcalc_intrinsic;
use squatcalc_core::expr::parse_intrinsic;
use squatcalc_core::heat::{norms_csv, run_simulation, EvolutionConfig, SimulationConfig};
use squatcalc_core::nabla::{frac_laplacian, frac_nabla_closed, frac_nabla_quadrature, nabla_apply};
use squatcalc_core::random::{random_quaternion, seeded};
use squatcalc_core::report::{result_report, to_json, to_json_pretty, CsvTable, Format};
use squatcalc_core::{
    ContourSpec, Error, PowerMethod, QMatrixOperator, QuadSpec, Quaternion, SpectralField,
};

use crate::{FieldCommand, FieldOp, FracpowArgs, FuncalcArgs, HeatArgs, Output};

#[derive(Debug)]
pub enum Failure {
    /// The mathematics refused the input.
    Domain(String),
    /// Files, formats or flags.
    Input(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Input(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Domain(m) | Failure::Input(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_domain() {
            Failure::Domain(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

fn io_failure(what: &str, path: &Path, e: impl fmt::Display) -> Failure {
    Failure::Input(format!("{what} {}: {e}", path.display()))
}

fn read_matrix(path: &Path) -> Result<QMatrixOperator, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io_failure("reading", path, e))?;
    serde_json::from_str(&text).map_err(|e| io_failure("parsing matrix", path, e))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| io_failure("writing", p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Failure> {
    let mut s = to_json(value)?;
    s.push('\n');
    emit(&s, out)
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

pub fn spectrum(matrix: &Path, output: &Output) -> Result<(), Failure> {
    let t = read_matrix(matrix)?;
    let spheres = t.s_spectrum();
    emit(&result_report(spheres.as_slice(), output.format)?, output.out.as_deref())
}

#[derive(Serialize)]
struct FuncalcReport<'a> {
    operator: &'a QMatrixOperator,
    est_quadrature_error: f64,
    nodes_used: usize,
    contour_used: &'a ContourSpec,
    warnings: &'a [String],
}

pub fn funcalc(a: &FuncalcArgs) -> Result<(), Failure> {
    let t = read_matrix(&a.matrix)?;
    let f = parse_intrinsic(&a.expr)?;
    if a.contour != "auto" {
        return Err(Failure::Input(format!("--contour accepts only \"auto\", got {:?}", a.contour)));
    }
    let mut contour = match &a.circle {
        Some(c) => ContourSpec::circle(c[0], c[1], c[2])?,
        None => squatcalc_core::calculus::auto_contour(&t, f.domain.excluded())?,
    };
    if let Some(n) = a.nodes {
        if n == 0 {
            return Err(Failure::Input("--nodes must be positive".into()));
        }
        contour = contour.with_nodes(n);
    }
    if let Some(axis) = &a.axis {
        contour = contour.with_axis(axis.parse::<Quaternion>()?)?;
    }
    let r = funcalc_intrinsic(&f, &t, Some(&contour))?;
    warn_all(&r.warnings);
    match a.output.format {
        Format::Csv => emit(&r.operator.to_csv(), a.output.out.as_deref()),
        Format::Json => emit_json(
            &FuncalcReport {
                operator: &r.operator,
                est_quadrature_error: r.est_quadrature_error,
                nodes_used: r.nodes_used,
                contour_used: &r.contour,
                warnings: &r.warnings,
            },
            a.output.out.as_deref(),
        ),
    }
}

#[derive(Serialize)]
struct CrossDelta {
    method: &'static str,
    /// Max-norm difference relative to the reported operator.
    rel_delta: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct FracpowReport<'a> {
    alpha: f64,
    method: &'a str,
    operator: &'a QMatrixOperator,
    est_quadrature_error: f64,
    nodes_used: usize,
    warnings: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    cross_method_deltas: Option<Vec<CrossDelta>>,
}

const METHODS: [(&str, PowerMethod); 3] = [
    ("spectral", PowerMethod::Spectral),
    ("balakrishnan", PowerMethod::Balakrishnan),
    ("komatsu", PowerMethod::Komatsu),
];

pub fn fracpow(a: &FracpowArgs) -> Result<(), Failure> {
    if !a.alpha.is_finite() {
        return Err(Failure::Input(format!("--alpha must be finite, got {}", a.alpha)));
    }
    let t = read_matrix(&a.matrix)?;
    let quad = QuadSpec::default();
    let r = squatcalc_core::frac_power::frac_power(&t, a.alpha, a.method, &quad)?;
    warn_all(&r.warnings);
    let deltas = a.check.then(|| {
        let scale = r.operator.max_abs().max(f64::MIN_POSITIVE);
        METHODS
            .iter()
            .filter(|(_, m)| *m != a.method)
            .map(|(name, m)| match squatcalc_core::frac_power::frac_power(&t, a.alpha, *m, &quad) {
                Ok(o) => CrossDelta {
                    method: name,
                    rel_delta: Some(o.operator.max_abs_diff(&r.operator) / scale),
                    error: None,
                },
                Err(e) => CrossDelta {
                    method: name,
                    rel_delta: None,
                    error: Some(e.to_string()),
                },
            })
            .collect()
    });
    match a.output.format {
        Format::Csv => emit(&r.operator.to_csv(), a.output.out.as_deref()),
        Format::Json => emit_json(
            &FracpowReport {
                alpha: a.alpha,
                method: &r.method,
                operator: &r.operator,
                est_quadrature_error: r.est_quadrature_error,
                nodes_used: r.nodes_used,
                warnings: &r.warnings,
                cross_method_deltas: deltas,
            },
            a.output.out.as_deref(),
        ),
    }
}

#[derive(Serialize)]
struct FieldStats {
    dims: [usize; 3],
    lengths: [f64; 3],
    l2: f64,
    max_abs: f64,
    real_min: f64,
    real_max: f64,
    max_imag: f64,
}

fn grid(n: usize, l: f64) -> Result<([usize; 3], [f64; 3]), Failure> {
    if n < 2 {
        return Err(Failure::Input(format!("--grid must be at least 2, got {n}")));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(Failure::Input(format!("--box must be positive, got {l}")));
    }
    Ok(([n; 3], [l; 3]))
}

pub fn field(action: FieldCommand) -> Result<(), Failure> {
    match action {
        FieldCommand::Gen { grid: n, r#box, init, seed, out } => {
            let (dims, lengths) = grid(n, r#box)?;
            let f = if init == "random" {
                let mut rng = seeded(seed);
                let values = (0..n * n * n).map(|_| random_quaternion(&mut rng, 1.0)).collect();
                SpectralField::new(dims, lengths, values)?
            } else {
                init.parse::<squatcalc_core::heat::InitialCondition>()?.build(dims, lengths)?
            };
            f.save(&out)?;
            Ok(())
        }
        FieldCommand::Apply { op, alpha, input, out } => {
            let v = SpectralField::load(&input)?;
            let need_alpha = || alpha.ok_or_else(|| Failure::Input("--alpha is required for this operator".into()));
            let w = match op {
                FieldOp::Nabla => nabla_apply(&v)?,
                FieldOp::FracNabla => frac_nabla_closed(&v, need_alpha()?)?,
                FieldOp::FracNablaQuad => {
                    let r = frac_nabla_quadrature(&v, need_alpha()?, &QuadSpec::default())?;
                    warn_all(&r.warnings);
                    eprintln!("quadrature error estimate {:.3e}, {} nodes", r.est_error, r.nodes_used);
                    r.field
                }
                FieldOp::FracLaplacian => frac_laplacian(&v, need_alpha()?)?,
            };
            w.save(&out)?;
            Ok(())
        }
        FieldCommand::Norm { input, out } => {
            let v = SpectralField::load(&input)?;
            let (real_min, real_max) = v.real_range();
            emit_json(
                &FieldStats {
                    dims: v.dims(),
                    lengths: v.lengths(),
                    l2: v.l2_norm(),
                    max_abs: v.max_abs(),
                    real_min,
                    real_max,
                    max_imag: v.max_imag(),
                },
                out.as_deref(),
            )
        }
    }
}

pub fn heat(a: &HeatArgs) -> Result<(), Failure> {
    let (dims, lengths) = grid(a.grid, a.r#box)?;
    if a.snap_every == Some(0) {
        return Err(Failure::Input("--snap-every must be positive".into()));
    }
    let evolution = EvolutionConfig::new(a.alpha, a.dt, a.steps, a.scheme)?;
    let sim = SimulationConfig {
        evolution,
        form: a.form,
        snap_every: a.snap_every,
    };
    let u0 = a.init.build(dims, lengths)?;
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).map_err(|e| io_failure("creating", dir, e))?;
    }
    let out = run_simulation(&u0, &sim, a.out.as_deref())?;
    if a.out.is_none() {
        print!("{}", norms_csv(&out.rows));
    }
    if let Some(d) = out.max_form_delta() {
        eprintln!("largest direct/divergence L2 difference {d:.3e}");
    }
    Ok(())
}

pub fn selftest(only: &[u8], json: bool) -> Result<bool, Failure> {
    let ids: Vec<u8> = if only.is_empty() {
        CRITERIA.iter().map(|(id, _)| *id).collect()
    } else {
        only.to_vec()
    };
    let mut outcomes: Vec<CriterionOutcome> = Vec::new();
    for id in ids {
        let o = run_criterion(id).ok_or_else(|| Failure::Input(format!("no criterion {id}; valid ids are 1-11")))?;
        if !json {
            println!("{o}");
        }
        outcomes.push(o);
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    if json {
        let mut s = to_json_pretty(&outcomes)?;
        s.push('\n');
        print!("{s}");
    } else {
        println!("{passed}/{} criteria passed", outcomes.len());
    }
    Ok(passed == outcomes.len())
}
