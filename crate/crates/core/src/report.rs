//! Analysis runs and their reports.
//!
//! A run evaluates one immersion on a grid and executes the selected suites.
//! Checks split into assertions (identities that must hold for every
//! immersion; any failure gives exit code 1) and verdicts or diagnostics
//! (whether x^T is conformal, whether the surface is a soliton, the
//! containment dichotomy), which are reported but never fail a run.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use serde::Serialize;
use thiserror::Error;

use crate::applications::{identity_suite, self_similar_check, yamabe_check, IdentityLedger, SelfSimilarReport, SolitonReport};
use crate::canonical::{
    classify_field, lie_derivative_metric, lie_from_covariant, parallel_normal_direction_test, conformal_umbilic_check,
    FieldClass, ParallelNormalReport, ConformalUmbilicReport,
};
use crate::classifiers::{conformal_flatness_test, containment_test, dichotomy_finding, ConformalFlatness, ContainmentVerdict, DichotomyFinding};
use crate::dsl::{catalog, fd_discrepancy, fd_jet, parse, DslError, ImmersionSpec, ParamValue, Params, FD_STEP};
use crate::geometry::{build_frame, mean_curvature, normal_derivative_xn};
use crate::sampling::{ExcludedPoint, ResidualSeries, SampleSet, SeriesStats};

pub const SCHEMA_VERSION: &str = "1.0.0";
pub const TOOL_NAME: &str = "canfield";
pub const DEFAULT_SEED: u64 = 20240917;
pub const DEFAULT_FD_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Geometry,
    Conformal,
    Yamabe,
    SelfSimilar,
    Identities,
    Classify,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Geometry,
        Suite::Conformal,
        Suite::Yamabe,
        Suite::SelfSimilar,
        Suite::Identities,
        Suite::Classify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Conformal => "conformal",
            Suite::Yamabe => "yamabe",
            Suite::SelfSimilar => "self_similar",
            Suite::Identities => "identities",
            Suite::Classify => "classify",
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Suite, String> {
        let s = s.trim().replace('-', "_");
        if s == "all" {
            return Err("`all` expands to several suites".into());
        }
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite `{s}`"))
    }
}

/// Parses a comma-separated suite list; `all` selects every suite.
pub fn parse_suites(list: &str) -> Result<Vec<Suite>, String> {
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if item == "all" {
            out.extend(Suite::ALL);
        } else {
            out.push(item.parse()?);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
    Both,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<OutputFormat, String> {
        OutputFormat::from_str_ci(s.trim())
    }
}

impl OutputFormat {
    fn from_str_ci(s: &str) -> Result<OutputFormat, String> {
        <OutputFormat as ValueEnum>::from_str(s, true)
    }
}

/// Where the immersion comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum InputRef {
    File(PathBuf),
    /// `catalog:NAME[:key=value,...]`, vector values separated by `;`.
    Catalog { name: String, params: Params },
}

impl FromStr for InputRef {
    type Err = String;

    fn from_str(s: &str) -> Result<InputRef, String> {
        let Some(rest) = s.strip_prefix("catalog:") else {
            return Ok(InputRef::File(PathBuf::from(s)));
        };
        let (name, args) = rest.split_once(':').unwrap_or((rest, ""));
        if name.is_empty() {
            return Err("missing catalog entry name".into());
        }
        let mut params = Params::new();
        for item in args.split(',').map(str::trim).filter(|a| !a.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| format!("catalog parameter `{item}` is not key=value"))?;
            let nums = v
                .split(';')
                .map(|x| x.trim().parse::<f64>().map_err(|_| format!("parameter `{k}`: `{x}` is not a number")))
                .collect::<Result<Vec<f64>, String>>()?;
            let value = if v.contains(';') {
                ParamValue::Vector(nums)
            } else {
                ParamValue::Scalar(nums[0])
            };
            params.insert(k.trim().to_string(), value);
        }
        Ok(InputRef::Catalog {
            name: name.to_string(),
            params,
        })
    }
}

impl fmt::Display for InputRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputRef::File(p) => write!(f, "{}", p.display()),
            InputRef::Catalog { name, params } => {
                write!(f, "catalog:{name}")?;
                let parts: Vec<String> = params
                    .iter()
                    .map(|(k, v)| match v {
                        ParamValue::Scalar(x) => format!("{k}={x}"),
                        ParamValue::Vector(xs) => {
                            format!("{k}={}", xs.iter().map(f64::to_string).collect::<Vec<_>>().join(";"))
                        }
                    })
                    .collect();
                if !parts.is_empty() {
                    write!(f, ":{}", parts.join(","))?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: InputRef,
    pub suites: Vec<Suite>,
    pub grid: Option<Vec<usize>>,
    pub tol: f64,
    pub fd_tol: f64,
    pub fd_check: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
}

impl RunConfig {
    pub fn new(input: InputRef) -> RunConfig {
        RunConfig {
            input,
            suites: Suite::ALL.to_vec(),
            grid: None,
            tol: crate::canonical::DEFAULT_TOL,
            fd_tol: DEFAULT_FD_TOL,
            fd_check: false,
            seed: DEFAULT_SEED,
            out_dir: PathBuf::from("canfield-out"),
            format: OutputFormat::Json,
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.suites.is_empty() {
            return Err(RunError::Config("at least one suite must be selected".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) || !(self.fd_tol > 0.0 && self.fd_tol.is_finite()) {
            return Err(RunError::Config("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Input(#[from] DslError),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("configuration error: {0}")]
    Config(String),
}

pub fn load_spec(input: &InputRef) -> Result<ImmersionSpec, RunError> {
    match input {
        InputRef::File(path) => {
            let text = fs::read_to_string(path).map_err(|source| RunError::Read {
                path: path.clone(),
                source,
            })?;
            Ok(parse(&text)?)
        }
        InputRef::Catalog { name, params } => {
            let mut full = crate::dsl::catalog_defaults(name)?;
            full.extend(params.iter().map(|(k, v)| (k.clone(), v.clone())));
            Ok(catalog(name, &full)?)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub input: String,
    pub seed: u64,
    pub grid: Vec<usize>,
    pub tolerance: f64,
    pub fd_tolerance: f64,
    pub fd_check: bool,
    pub suites: Vec<Suite>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpecEcho {
    pub n: usize,
    pub m: usize,
    pub source: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointSummary {
    pub total: usize,
    pub valid: usize,
    pub excluded: Vec<ExcludedPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometrySection {
    pub scalar_curvature: SeriesStats,
    pub mean_curvature_norm: SeriesStats,
    pub xt_norm: SeriesStats,
    pub xn_norm: SeriesStats,
    pub invariants: Vec<ResidualSeries>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConformalSection {
    pub link: ConformalUmbilicReport,
    pub classification: FieldClass,
    pub parallel_normal: ParallelNormalReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifySection {
    pub containment: Option<ContainmentVerdict>,
    pub containment_note: Option<String>,
    pub conformal_flatness: Option<ConformalFlatness>,
    pub conformal_flatness_note: Option<String>,
    pub dichotomy: DichotomyFinding,
}

#[derive(Debug, Clone, Serialize)]
pub struct FdSection {
    pub step: f64,
    pub jets: ResidualSeries,
    pub potential: ResidualSeries,
}

/// One pass/fail check that decides the exit code.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub suite: Suite,
    pub name: String,
    pub anchor: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub schema_version: String,
    pub tool: ToolInfo,
    pub provenance: Provenance,
    pub spec: SpecEcho,
    pub points: PointSummary,
    pub geometry: Option<GeometrySection>,
    pub conformal: Option<ConformalSection>,
    pub yamabe: Option<SolitonReport>,
    pub self_similar: Option<SelfSimilarReport>,
    pub identities: Option<IdentityLedger>,
    pub classify: Option<ClassifySection>,
    pub fd_check: Option<FdSection>,
    pub assertions: Vec<Assertion>,
    pub findings: Vec<Finding>,
    pub failures: Vec<String>,
    /// Every residual series with per-point values, for CSV output.
    #[serde(skip)]
    pub series: Vec<ResidualSeries>,
}

impl AnalysisReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per (grid point, residual series).
    pub fn to_csv(&self, points: &[Vec<f64>]) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["index", "u", "quantity", "value"]).expect("in-memory write");
        for (i, u) in points.iter().enumerate() {
            let coords = u.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
            for s in &self.series {
                let v = s.values.get(i).copied().flatten().map(|v| v.to_string()).unwrap_or_default();
                w.write_record([i.to_string(), coords.clone(), s.name.clone(), v]).expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

fn geometry_section(set: &SampleSet) -> GeometrySection {
    let norm_of = |f: &dyn Fn(&crate::sampling::Sample) -> f64| SeriesStats::of(&set.map(f));
    let mut inv = Vec::new();
    inv.push(ResidualSeries::new("frame_orthonormality", "e_a · e_b = δ_ab on E^m", set.map(|s| s.frame.frame_defect()), 1e-12, false));
    inv.push(ResidualSeries::scaled(
        "sff_normality",
        "h(X,Y) ⊥ TM",
        set,
        set.map(|s| s.frame.sff_tangential_residual()),
        1e-10,
    ));
    inv.push(ResidualSeries::scaled(
        "gauss_formula",
        "∂_i∂_j x = Γ^k_ij ∂_k x + h_ij",
        set,
        set.map(|s| s.frame.gauss_formula_residual()),
        1e-10,
    ));
    inv.push(ResidualSeries::scaled(
        "position_split",
        "x = x^T + x^N",
        set,
        set.map(|s| s.split.residuals().0),
        1e-12,
    ));
    inv.push(ResidualSeries::new(
        "position_split_orthogonality",
        "<x^T, x^N> = 0",
        set.map(|s| s.split.residuals().1 / (s.scale() * s.scale())),
        1e-12,
        true,
    ));
    inv.push(ResidualSeries::scaled(
        "lie_derivative_routes",
        "g(∇_X x^T, Y) + g(X, ∇_Y x^T) = 2g(X,Y) + 2g(h(X,Y), x^N)",
        set,
        set.map(|s| lie_derivative_metric(&s.frame, &s.split).agreement),
        1e-10,
    ));
    inv.push(ResidualSeries::scaled(
        "lie_derivative_jet_route",
        "L_{x^T} g from differentiated x^T = 2g + 2<h, x^N>",
        set,
        set.map(|s| {
            let a = lie_derivative_metric(&s.frame, &s.split).route_a;
            (a - lie_from_covariant(&s.frame.metric, &s.fields.nabla_xt)).amax()
        }),
        1e-10,
    ));
    inv.push(ResidualSeries::scaled(
        "normal_derivative_routes",
        "D_Z x^N = -h(x^T, Z)",
        set,
        set.map(|s| {
            (0..s.frame.n)
                .map(|a| {
                    normal_derivative_xn(&s.jet, &s.frame, &s.split, &s.frame.onb_chart(a))
                        .map(|d| d.agreement)
                        .unwrap_or(f64::INFINITY)
                })
                .fold(0.0, f64::max)
        }),
        1e-8,
    ));
    inv.push(ResidualSeries::scaled(
        "riemann_symmetries",
        "R_ijkl = -R_jikl = -R_ijlk = R_klij",
        set,
        set.map(|s| s.curvature.symmetry_residual()),
        1e-10,
    ));
    inv.push(ResidualSeries::scaled(
        "first_bianchi",
        "R_ijkl + R_jkil + R_kijl = 0",
        set,
        set.map(|s| s.curvature.bianchi_residual()),
        1e-10,
    ));
    if set.n() >= 4 {
        inv.push(ResidualSeries::scaled(
            "weyl_trace_free",
            "g^{il} W_ijkl = 0",
            set,
            set.map(|s| s.curvature.weyl_trace_residual().unwrap_or(0.0)),
            1e-10,
        ));
    }
    GeometrySection {
        scalar_curvature: norm_of(&|s| s.curvature.scalar),
        mean_curvature_norm: norm_of(&|s| mean_curvature(&s.frame).norm()),
        xt_norm: norm_of(&|s| s.split.xt_norm),
        xn_norm: norm_of(&|s| s.split.xn_norm),
        invariants: inv,
    }
}

fn fd_section(set: &SampleSet, fd_tol: f64) -> FdSection {
    let spec = &set.spec;
    let jets = set.map(|s| {
        fd_discrepancy(spec, &s.u, FD_STEP)
            .map(|(a, b)| a.max(b))
            .unwrap_or(f64::INFINITY)
    });
    let potential = set.map(|s| {
        let Ok(fd) = fd_jet(spec, &s.u, FD_STEP) else {
            return f64::INFINITY;
        };
        let Ok(frame) = build_frame(&fd) else {
            return f64::INFINITY;
        };
        let split = crate::geometry::position_split(&fd, &frame);
        let lg = lie_derivative_metric(&frame, &split).route_a;
        let (phi, _) = crate::canonical::conformal_point(&lg, &frame.metric);
        (phi - s.fields.phi).abs()
    });
    FdSection {
        step: FD_STEP,
        jets: ResidualSeries::new("fd_jet_agreement", "exact partials = central differences", jets, fd_tol, false),
        potential: ResidualSeries::scaled("fd_potential_agreement", "φ from exact jets = φ from difference jets", set, potential, fd_tol),
    }
}

fn push_series(asserts: &mut Vec<Assertion>, suite: Suite, s: &ResidualSeries) {
    asserts.push(Assertion {
        suite,
        name: s.name.clone(),
        anchor: s.anchor.clone(),
        value: s.stats.max,
        tolerance: s.tolerance,
        pass: s.pass,
    });
}

/// Evaluates the configured suites. Only input and configuration problems are errors.
pub fn run(config: &RunConfig) -> Result<(AnalysisReport, SampleSet), RunError> {
    config.validate()?;
    let spec = load_spec(&config.input)?;
    let set = SampleSet::evaluate(&spec, config.grid.as_deref(), config.seed)?;
    let tol = config.tol;
    let has = |s: Suite| config.suites.contains(&s);

    let mut asserts = Vec::new();
    let mut findings = Vec::new();
    let mut series: Vec<ResidualSeries> = Vec::new();

    let geometry = has(Suite::Geometry).then(|| geometry_section(&set));
    if let Some(g) = &geometry {
        for s in &g.invariants {
            push_series(&mut asserts, Suite::Geometry, s);
            series.push(s.clone());
        }
    }

    let conformal = has(Suite::Conformal).then(|| {
        let link = conformal_umbilic_check(&set, tol);
        ConformalSection {
            classification: classify_field(&set, tol),
            parallel_normal: parallel_normal_direction_test(&set, tol),
            link,
        }
    });
    if let Some(c) = &conformal {
        let t = &c.link;
        asserts.push(Assertion {
            suite: Suite::Conformal,
            name: "conformal_iff_umbilical".into(),
            anchor: "L_{x^T} g = 2φg ⇔ g(h(X,Y), x^N) = η g(X,Y)".into(),
            value: t.disagreements.len() as f64,
            tolerance: 0.0,
            pass: t.biconditional_holds,
        });
        asserts.push(Assertion {
            suite: Suite::Conformal,
            name: "potential_link".into(),
            anchor: "φ = 1 + η".into(),
            value: t.max_phi_link,
            tolerance: 1e-10,
            pass: t.max_phi_link <= 1e-10,
        });
        if t.eta_coefficient.plus_one.stats.count > 0 {
            push_series(&mut asserts, Suite::Conformal, &t.eta_coefficient.plus_one);
            findings.push(Finding {
                id: "eta_coefficient".into(),
                message: format!(
                    "{}; measured max |L g - 2(η+1)g| = {:.3e}, min |L g - 2(η+2)g| = {:.3e}",
                    t.eta_coefficient.note, t.eta_coefficient.plus_one.stats.max, t.eta_coefficient.min_plus_two
                ),
            });
        }
        series.push(ResidualSeries::new("conformality", "L_{x^T} g = 2φg", t.conformal.residual.clone(), tol, false));
        series.push(ResidualSeries::new("umbilicity_xn", "g(h(X,Y), x^N) = η g(X,Y)", t.umbilic.residual.clone(), tol, false));
        series.push(t.eta_coefficient.plus_one.clone());
        series.push(c.parallel_normal.residual.clone());
        if c.classification.class == crate::canonical::FieldKind::Concircular && t.conformal.phi_spread > tol {
            findings.push(Finding {
                id: "conformal_is_concircular".into(),
                message: "∇x^T = I + A_{x^N} is self-adjoint, so a conformal x^T is concircular with \
                          varphi = φ; no conformal-only case occurs for x^T"
                    .into(),
            });
        }
    }

    let yamabe = has(Suite::Yamabe).then(|| yamabe_check(&set, tol));
    if let Some(y) = &yamabe {
        push_series(&mut asserts, Suite::Yamabe, &y.form_consistency);
        series.push(y.residual.clone());
        series.push(y.form_consistency.clone());
    }

    let need_ss = has(Suite::SelfSimilar) || has(Suite::Identities);
    let ss = need_ss.then(|| self_similar_check(&set, tol));
    if let (true, Some(s)) = (has(Suite::SelfSimilar), &ss) {
        if let Some(b) = s.pseudo_umbilic_biconditional {
            asserts.push(Assertion {
                suite: Suite::SelfSimilar,
                name: "conformal_iff_pseudo_umbilical".into(),
                anchor: "x^T conformal ⇔ g(h(X,Y), H) = |H|² g(X,Y)".into(),
                value: if b { 0.0 } else { 1.0 },
                tolerance: 0.0,
                pass: b,
            });
        }
        series.push(s.colinearity.clone());
        series.push(s.shrinker.clone());
    }

    let identities = has(Suite::Identities).then(|| identity_suite(&set, ss.as_ref().expect("computed above"), tol));
    if let Some(l) = &identities {
        for s in l.entries() {
            // the eigenvalue equation is a property of the fitted λ, not an identity
            if s.name != "obata" {
                push_series(&mut asserts, Suite::Identities, s);
            }
            series.push(s.clone());
        }
        if let Some(lap) = l.laplacian.ran() {
            if let Some(e) = lap.eigen {
                findings.push(Finding {
                    id: "constant_beta".into(),
                    message: format!("∇φ = β x^T with constant β = {:.12}; Δx^T = -λ x^T with λ = {:.12}", -e.lambda, e.lambda),
                });
            }
        }
    }
    let self_similar = if has(Suite::SelfSimilar) { ss } else { None };

    let classify = has(Suite::Classify).then(|| {
        let (containment, containment_note) = match containment_test(&set, tol) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let (conformal_flatness, conformal_flatness_note) = match conformal_flatness_test(&set, tol) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        };
        ClassifySection {
            containment,
            containment_note,
            conformal_flatness,
            conformal_flatness_note,
            dichotomy: dichotomy_finding(&set, tol),
        }
    });
    if let Some(c) = &classify {
        if c.dichotomy.tension {
            findings.push(Finding {
                id: "containment_dichotomy".into(),
                message: c.dichotomy.note.clone(),
            });
        }
    }

    let fd_check = config.fd_check.then(|| fd_section(&set, config.fd_tol));
    if let Some(fd) = &fd_check {
        push_series(&mut asserts, Suite::Geometry, &fd.jets);
        push_series(&mut asserts, Suite::Geometry, &fd.potential);
        series.push(fd.jets.clone());
        series.push(fd.potential.clone());
    }

    if !set.excluded.is_empty() {
        findings.push(Finding {
            id: "excluded_points".into(),
            message: format!("{} grid point(s) excluded from all aggregates", set.excluded.len()),
        });
    }

    let failures = asserts
        .iter()
        .filter(|a| !a.pass)
        .map(|a| format!("{}: {} = {:.3e} exceeds {:.1e}", a.name, a.anchor, a.value, a.tolerance))
        .collect();
    let report = AnalysisReport {
        schema_version: SCHEMA_VERSION.into(),
        tool: ToolInfo {
            name: TOOL_NAME.into(),
            version: env!("CARGO_PKG_VERSION").into(),
        },
        provenance: Provenance {
            input: config.input.to_string(),
            seed: config.seed,
            grid: set.counts.clone(),
            tolerance: tol,
            fd_tolerance: config.fd_tol,
            fd_check: config.fd_check,
            suites: config.suites.clone(),
        },
        spec: SpecEcho {
            n: spec.n,
            m: spec.m,
            source: spec.print(),
        },
        points: PointSummary {
            total: set.len(),
            valid: set.valid().count(),
            excluded: set.excluded.clone(),
        },
        geometry,
        conformal,
        yamabe,
        self_similar,
        identities,
        classify,
        fd_check,
        assertions: asserts,
        findings,
        failures,
        series,
    };
    Ok((report, set))
}

/// Writes `report.json` and/or `report.csv` into `dir`.
pub fn emit(report: &AnalysisReport, points: &[Vec<f64>], format: OutputFormat, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if matches!(format, OutputFormat::Json | OutputFormat::Both) {
        let p = dir.join("report.json");
        fs::write(&p, report.to_json())?;
        written.push(p);
    }
    if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
        let p = dir.join("report.csv");
        fs::write(&p, report.to_csv(points))?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog_input(s: &str) -> InputRef {
        s.parse().unwrap()
    }

    #[test]
    fn input_references() {
        assert_eq!(catalog_input("specs/a.imm"), InputRef::File("specs/a.imm".into()));
        let r = catalog_input("catalog:sphere:r=2,center=0.5;0;0");
        let InputRef::Catalog { name, params } = &r else { panic!() };
        assert_eq!(name, "sphere");
        assert_eq!(params["r"], ParamValue::Scalar(2.0));
        assert_eq!(params["center"], ParamValue::Vector(vec![0.5, 0.0, 0.0]));
        assert_eq!(r.to_string(), "catalog:sphere:center=0.5;0;0,r=2");
        assert!("catalog:sphere:r".parse::<InputRef>().is_err());
        assert!("catalog:sphere:r=x".parse::<InputRef>().is_err());
    }

    #[test]
    fn suite_lists() {
        assert_eq!(parse_suites("all").unwrap().len(), 6);
        assert_eq!(parse_suites("yamabe, conformal,yamabe").unwrap(), vec![Suite::Conformal, Suite::Yamabe]);
        assert_eq!(parse_suites("self-similar").unwrap(), vec![Suite::SelfSimilar]);
        assert!(parse_suites("bogus").is_err());
    }

    #[test]
    fn unit_sphere_report() {
        let mut cfg = RunConfig::new(catalog_input("catalog:sphere:r=1"));
        cfg.grid = Some(vec![6, 4]);
        let (rep, _) = run(&cfg).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures);
        let t = &rep.conformal.as_ref().unwrap().link;
        assert!(t.conformal.phi.iter().flatten().all(|p| p.abs() < 1e-14));
        assert!((rep.yamabe.as_ref().unwrap().lambda_fit - 2.0).abs() < 1e-12);
        let ss = rep.self_similar.as_ref().unwrap();
        assert!(ss.f_per_point.iter().flatten().all(|f| (f + 1.0).abs() < 1e-12));
        assert!(ss.is_self_shrinker);
    }

    #[test]
    fn cylinder_conformal_suite_passes_with_negative_verdict() {
        let mut cfg = RunConfig::new(catalog_input("catalog:cylinder"));
        cfg.suites = vec![Suite::Conformal];
        cfg.grid = Some(vec![4, 4]);
        let (rep, _) = run(&cfg).unwrap();
        assert_eq!(rep.exit_code(), 0);
        let v = &rep.conformal.as_ref().unwrap().link.conformal;
        assert!(!v.is_conformal);
        assert!((v.stats.max - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(rep.geometry.is_none());
    }

    #[test]
    fn csv_has_one_row_per_point_and_quantity() {
        let mut cfg = RunConfig::new(catalog_input("catalog:sphere:r=1"));
        cfg.grid = Some(vec![4, 3]);
        let (rep, set) = run(&cfg).unwrap();
        let csv = rep.to_csv(&set.points);
        assert_eq!(csv.lines().count(), 1 + 12 * rep.series.len());
    }

    #[test]
    fn fd_check_passes_on_torus() {
        let mut cfg = RunConfig::new(catalog_input("catalog:torus"));
        cfg.grid = Some(vec![4, 4]);
        cfg.fd_check = true;
        cfg.suites = vec![Suite::Geometry];
        let (rep, _) = run(&cfg).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures);
        assert!(rep.fd_check.as_ref().unwrap().jets.max() < 1e-6);
    }

    #[test]
    fn config_errors() {
        let mut cfg = RunConfig::new(catalog_input("catalog:torus"));
        cfg.suites.clear();
        assert!(matches!(run(&cfg), Err(RunError::Config(_))));
        let mut cfg = RunConfig::new(catalog_input("catalog:torus"));
        cfg.tol = 0.0;
        assert!(matches!(run(&cfg), Err(RunError::Config(_))));
        let cfg = RunConfig::new(catalog_input("catalog:nope"));
        assert!(matches!(run(&cfg), Err(RunError::Input(DslError::UnknownCatalogEntry(_)))));
    }
}
