//! The end-to-end verification suite behind `verify-all`.
//!
//! Every criterion is computed from full analysis runs over a fixed set of
//! catalog instances. Measurements record the observed value next to the limit
//! it is held to, so a failing criterion shows exactly which instance missed.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::applications::Gated;
use crate::dsl::{fd_discrepancy, random_interior_points, FD_STEP};
use crate::report::{load_spec, run, AnalysisReport, InputRef, RunConfig, RunError, SCHEMA_VERSION};
use crate::sampling::ResidualSeries;

/// Finite-difference spot checks per instance.
pub const FD_POINTS: usize = 100;
/// Distance kept from the domain boundary by the spot checks.
pub const FD_MARGIN: f64 = 1e-3;
pub const FD_RELATIVE_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    GreaterThan,
    Equal,
}

impl Relation {
    fn holds(self, value: f64, limit: f64) -> bool {
        match self {
            Relation::AtMost => value <= limit,
            Relation::AtLeast => value >= limit,
            Relation::GreaterThan => value > limit,
            Relation::Equal => value == limit,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::GreaterThan => ">",
            Relation::Equal => "==",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    pub subject: String,
    pub quantity: String,
    /// NaN (serialized as null) when the quantity could not be computed.
    pub value: f64,
    pub limit: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl Measurement {
    pub fn new(subject: &str, quantity: &str, value: f64, relation: Relation, limit: f64) -> Measurement {
        Measurement {
            subject: subject.to_string(),
            quantity: quantity.to_string(),
            value,
            limit,
            relation,
            pass: !value.is_nan() && relation.holds(value, limit),
        }
    }

    /// A yes/no condition, recorded as 1 (true) against the limit 1.
    pub fn flag(subject: &str, quantity: &str, ok: bool) -> Measurement {
        Measurement::new(subject, quantity, if ok { 1.0 } else { 0.0 }, Relation::Equal, 1.0)
    }

    pub fn describe(&self) -> String {
        format!(
            "{} {}: {:.3e} {} {:.1e}",
            self.subject,
            self.quantity,
            self.value,
            self.relation.symbol(),
            self.limit
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: String,
    pub pass: bool,
    pub measurements: Vec<Measurement>,
}

impl CriterionResult {
    fn new(id: u32, title: &str, measurements: Vec<Measurement>) -> CriterionResult {
        CriterionResult {
            id,
            title: title.to_string(),
            pass: !measurements.is_empty() && measurements.iter().all(|m| m.pass),
            measurements,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Measurement> {
        self.measurements.iter().filter(|m| !m.pass)
    }

    /// `PASS  3  title` or `FAIL  3  title`.
    pub fn line(&self) -> String {
        format!("{}  {:>2}  {}", if self.pass { "PASS" } else { "FAIL" }, self.id, self.title)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceSummary {
    pub label: String,
    pub input: String,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AcceptanceReport {
    pub schema_version: String,
    pub seed: u64,
    pub instances: Vec<InstanceSummary>,
    pub criteria: Vec<CriterionResult>,
    pub all_pass: bool,
}

impl AcceptanceReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("acceptance report serializes");
        s.push('\n');
        s
    }
}

/// Role of an instance in the conformal/umbilical biconditional.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Conformal,
    NonConformal,
    /// Used only by the criteria that cover every instance.
    Other,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub label: &'static str,
    pub input: &'static str,
    pub role: Role,
    pub hypersurface: bool,
}

pub fn instances() -> Vec<Instance> {
    let i = |label, input, role, hypersurface| Instance {
        label,
        input,
        role,
        hypersurface,
    };
    vec![
        i("sphere_r0.5", "catalog:sphere:r=0.5", Role::Conformal, true),
        i("sphere_r1", "catalog:sphere:r=1", Role::Conformal, true),
        i("sphere_r2", "catalog:sphere:r=2", Role::Conformal, true),
        i("sphere_off_center", "catalog:sphere:r=1,center=0.5;0;0", Role::Conformal, true),
        i("subspace", "catalog:subspace", Role::Conformal, true),
        i("plane_offset", "catalog:plane_offset:c=1", Role::Conformal, true),
        i("clifford_torus", "catalog:clifford_torus:a=1,b=1", Role::Conformal, false),
        i("flat_torus", "catalog:flat_torus:k=2", Role::Conformal, false),
        i("helix", "catalog:helix:a=1,b=1", Role::Conformal, false),
        i("circle", "catalog:circle:r=1", Role::Conformal, true),
        i("cylinder", "catalog:cylinder:r=1", Role::NonConformal, true),
        i("torus", "catalog:torus:R=3,r=1", Role::NonConformal, true),
        i("sphere4_r2", "catalog:sphere:n=4,r=2,center=0;0;0;0;0", Role::Other, true),
        i("graph4", "catalog:graph4", Role::Other, false),
    ]
}

struct Run {
    inst: Instance,
    report: AnalysisReport,
    json: String,
}

fn series_max(s: &ResidualSeries) -> f64 {
    if s.stats.count == 0 {
        f64::NAN
    } else {
        s.stats.max
    }
}

fn gated_max(g: &Gated<ResidualSeries>) -> f64 {
    g.ran().map(series_max).unwrap_or(f64::NAN)
}

fn invariant<'a>(r: &'a AnalysisReport, name: &str) -> Option<&'a ResidualSeries> {
    r.geometry.as_ref()?.invariants.iter().find(|s| s.name == name)
}

fn criterion_biconditional(runs: &[Run]) -> CriterionResult {
    let mut ms = Vec::new();
    for run in runs.iter().filter(|r| r.inst.role != Role::Other) {
        let l = run.inst.label;
        let link = &run.report.conformal.as_ref().expect("conformal suite ran").link;
        let (conf, umb) = (series_max_stats(&link.conformal.stats), series_max_stats(&link.umbilic.stats));
        if run.inst.role == Role::Conformal {
            ms.push(Measurement::new(l, "max conformality residual", conf, Relation::AtMost, 1e-8));
            ms.push(Measurement::new(l, "max umbilicity residual", umb, Relation::AtMost, 1e-8));
            ms.push(Measurement::new(l, "max |φ - 1 - η|", link.max_phi_link, Relation::AtMost, 1e-10));
        } else {
            ms.push(Measurement::new(l, "max conformality residual", conf, Relation::AtLeast, 1e-2));
            ms.push(Measurement::new(l, "max umbilicity residual", umb, Relation::AtLeast, 1e-2));
        }
        ms.push(Measurement::flag(l, "conformal iff umbilical at every point", link.biconditional_holds));
    }
    CriterionResult::new(1, "conformal x^T iff umbilical with respect to x^N", ms)
}

fn series_max_stats(s: &crate::sampling::SeriesStats) -> f64 {
    if s.count == 0 {
        f64::NAN
    } else {
        s.max
    }
}

fn criterion_lie_routes(runs: &[Run]) -> CriterionResult {
    let mut ms = Vec::new();
    for run in runs {
        for name in ["lie_derivative_routes", "lie_derivative_jet_route"] {
            let v = invariant(&run.report, name).map(series_max).unwrap_or(f64::NAN);
            ms.push(Measurement::new(run.inst.label, &format!("{name} / scale"), v, Relation::AtMost, 1e-10));
        }
    }
    CriterionResult::new(2, "Lie derivative of g along x^T agrees across routes", ms)
}

fn criterion_eta_coefficient(runs: &[Run], tol: f64) -> CriterionResult {
    let mut ms = Vec::new();
    for run in runs.iter().filter(|r| r.inst.role == Role::Conformal) {
        let l = run.inst.label;
        let e = &run.report.conformal.as_ref().expect("conformal suite ran").link.eta_coefficient;
        ms.push(Measurement::new(l, "max |L g - 2(η+1) g|", series_max(&e.plus_one), Relation::AtMost, tol));
        ms.push(Measurement::new(l, "min |L g - 2(η+2) g|", e.min_plus_two, Relation::GreaterThan, 1e-2));
        let noted = run.report.findings.iter().any(|f| f.id == "eta_coefficient");
        ms.push(Measurement::flag(l, "report carries the coefficient finding", noted));
    }
    CriterionResult::new(3, "conformal factor is 2(η+1), not 2(η+2)", ms)
}

fn criterion_yamabe(runs: &[Run]) -> CriterionResult {
    let mut ms = Vec::new();
    for (label, r) in [("sphere_r0.5", 0.5), ("sphere_r1", 1.0), ("sphere_r2", 2.0)] {
        let y = find(runs, label).report.yamabe.as_ref().expect("yamabe suite ran");
        let expected = 2.0 / (r * r);
        ms.push(Measurement::new(label, "|λ - 2/r²|", (y.lambda_fit - expected).abs(), Relation::AtMost, 1e-6));
        ms.push(Measurement::new(label, "max soliton residual", series_max(&y.residual), Relation::AtMost, 1e-8));
    }
    // For any λ the residual is at least the trace-free part of ½ L g, which
    // is (n/2) times the conformality residual.
    let cyl = find(runs, "cylinder");
    let conf = &cyl.report.conformal.as_ref().expect("conformal suite ran").link.conformal;
    let bound = 0.5 * cyl.report.spec.n as f64 * series_max_stats(&conf.stats);
    ms.push(Measurement::new("cylinder", "lower bound on residual over all λ", bound, Relation::AtLeast, 1e-2));
    let y = cyl.report.yamabe.as_ref().expect("yamabe suite ran");
    ms.push(Measurement::new("cylinder", "max soliton residual at fitted λ", series_max(&y.residual), Relation::AtLeast, 1e-2));
    CriterionResult::new(4, "round spheres are Yamabe solitons, the cylinder is not", ms)
}

fn criterion_self_similar(runs: &[Run]) -> CriterionResult {
    let mut ms = Vec::new();
    for (label, r) in [("sphere_r0.5", 0.5), ("sphere_r1", 1.0), ("sphere_r2", 2.0)] {
        let ss = find(runs, label).report.self_similar.as_ref().expect("self-similar suite ran");
        let dev = ss
            .f_per_point
            .iter()
            .flatten()
            .map(|f| (f + r * r).abs())
            .fold(if ss.f_stats.count == 0 { f64::NAN } else { 0.0 }, f64::max);
        ms.push(Measurement::new(label, "max |f + r²|", dev, Relation::AtMost, 1e-10));
        if r == 1.0 {
            ms.push(Measurement::new(label, "max |H + x^N| / scale", series_max(&ss.shrinker), Relation::AtMost, 1e-10));
        } else {
            ms.push(Measurement::new(label, "min |H + x^N| / scale", ss.shrinker.stats.min, Relation::GreaterThan, 1e-10));
        }
    }
    for run in runs.iter().filter(|r| r.inst.hypersurface) {
        let ss = run.report.self_similar.as_ref().expect("self-similar suite ran");
        let worst = ss
            .colinearity
            .values
            .iter()
            .zip(&ss.f_per_point)
            .filter(|(_, f)| f.is_some())
            .filter_map(|(v, _)| *v)
            .fold(0.0, f64::max);
        ms.push(Measurement::new(run.inst.label, "max |x^N - f H| / scale where H ≠ 0", worst, Relation::AtMost, 1e-8));
    }
    CriterionResult::new(5, "sphere family is self-similar with f = -r², shrinker exactly at r = 1", ms)
}

fn criterion_identities(runs: &[Run]) -> CriterionResult {
    let mut ms = Vec::new();
    for run in runs.iter().filter(|r| r.inst.role == Role::Conformal) {
        let l = run.inst.label;
        let id = run.report.identities.as_ref().expect("identity suite ran");
        ms.push(Measurement::new(l, "max |R(X,Y)x^T - (Xφ)Y + (Yφ)X| / scale", gated_max(&id.curvature), Relation::AtMost, 1e-8));
        ms.push(Measurement::new(l, "max |Ric(Y,x^T) + (n-1)Yφ| / scale", gated_max(&id.ricci.conformal_form), Relation::AtMost, 1e-8));
        let (lap, align) = id
            .laplacian
            .ran()
            .map(|r| (series_max(&r.laplacian), series_max(&r.alignment)))
            .unwrap_or((f64::NAN, f64::NAN));
        ms.push(Measurement::new(l, "max |Δx^T - ∇φ| / scale", lap, Relation::AtMost, 1e-7));
        ms.push(Measurement::new(l, "max |∇φ - β x^T| / scale", align, Relation::AtMost, 1e-8));
    }
    let plane = find(runs, "subspace");
    let hess = plane
        .report
        .identities
        .as_ref()
        .and_then(|id| id.hessian.ran())
        .map(|h| gated_max(&h.hessian))
        .unwrap_or(f64::NAN);
    ms.push(Measurement::new("subspace", "max |H_F - g| / scale", hess, Relation::AtMost, 1e-10));
    CriterionResult::new(6, "curvature, Ricci, Laplacian and Hessian identities for conformal x^T", ms)
}

fn criterion_ricci_hypothesis(runs: &[Run]) -> CriterionResult {
    let mut ms = Vec::new();
    for run in runs {
        let ss = run.report.self_similar.as_ref().expect("self-similar suite ran");
        if !ss.is_generalized_self_similar {
            continue;
        }
        let id = run.report.identities.as_ref().expect("identity suite ran");
        let v = id.self_similar_identity.ran().map(|r| series_max(&r.identity)).unwrap_or(f64::NAN);
        ms.push(Measurement::new(run.inst.label, "max |expression + (2/n)Σ|h(e_i,x^T)|²| / scale", v, Relation::AtMost, 1e-8));
    }
    CriterionResult::new(7, "Ricci identity on generalized self-similar submanifolds", ms)
}

fn criterion_curvature(runs: &[Run]) -> CriterionResult {
    let mut ms = Vec::new();
    for (label, expected) in [("sphere_r1", 2.0), ("cylinder", 0.0), ("clifford_torus", 0.0), ("flat_torus", 0.0)] {
        let g = find(runs, label).report.geometry.as_ref().expect("geometry suite ran");
        let s = &g.scalar_curvature;
        let dev = if s.count == 0 {
            f64::NAN
        } else {
            (s.max - expected).abs().max((s.min - expected).abs())
        };
        ms.push(Measurement::new(label, &format!("max |R - {expected}|"), dev, Relation::AtMost, 1e-10));
    }
    for run in runs {
        for name in ["riemann_symmetries", "first_bianchi"] {
            let v = invariant(&run.report, name).map(series_max).unwrap_or(f64::NAN);
            ms.push(Measurement::new(run.inst.label, &format!("{name} / scale"), v, Relation::AtMost, 1e-10));
        }
    }
    CriterionResult::new(8, "scalar curvature from the Gauss equation", ms)
}

fn criterion_jets(runs: &[Run], seed: u64) -> Result<CriterionResult, RunError> {
    let mut ms = Vec::new();
    for (k, run) in runs.iter().enumerate() {
        let spec = load_spec(&run.inst.input.parse().map_err(RunError::Config)?)?;
        let mut worst = 0.0f64;
        for u in random_interior_points(&spec, FD_POINTS, FD_MARGIN, seed.wrapping_add(k as u64)) {
            let (d1, d2) = fd_discrepancy(&spec, &u, FD_STEP)?;
            worst = worst.max(d1).max(d2);
        }
        ms.push(Measurement::new(run.inst.label, "max relative jet error", worst, Relation::AtMost, FD_RELATIVE_LIMIT));
    }
    Ok(CriterionResult::new(9, "exact jets agree with central differences", ms))
}

fn find<'a>(runs: &'a [Run], label: &str) -> &'a Run {
    runs.iter().find(|r| r.inst.label == label).expect("instance is part of the fixed set")
}

/// Criteria 1 to 9 plus the serialized per-instance reports.
pub struct CriteriaRun {
    pub criteria: Vec<CriterionResult>,
    pub instances: Vec<InstanceSummary>,
    /// Per-instance report JSON, keyed by label.
    pub reports: BTreeMap<String, String>,
}

pub fn run_criteria(seed: u64) -> Result<CriteriaRun, RunError> {
    let mut runs = Vec::new();
    for inst in instances() {
        let input: InputRef = inst.input.parse().map_err(RunError::Config)?;
        let mut cfg = RunConfig::new(input);
        cfg.seed = seed;
        let (report, _) = run(&cfg)?;
        let json = report.to_json();
        runs.push(Run { inst, report, json });
    }
    let tol = crate::canonical::DEFAULT_TOL;
    let criteria = vec![
        criterion_biconditional(&runs),
        criterion_lie_routes(&runs),
        criterion_eta_coefficient(&runs, tol),
        criterion_yamabe(&runs),
        criterion_self_similar(&runs),
        criterion_identities(&runs),
        criterion_ricci_hypothesis(&runs),
        criterion_curvature(&runs),
        criterion_jets(&runs, seed)?,
    ];
    Ok(CriteriaRun {
        criteria,
        instances: runs
            .iter()
            .map(|r| InstanceSummary {
                label: r.inst.label.to_string(),
                input: r.inst.input.to_string(),
                passed: r.report.passed(),
            })
            .collect(),
        reports: runs.into_iter().map(|r| (r.inst.label.to_string(), r.json)).collect(),
    })
}

fn serialized(run: &CriteriaRun) -> String {
    let mut s = serde_json::to_string(&run.criteria).expect("criteria serialize");
    for (label, json) in &run.reports {
        s.push_str(label);
        s.push_str(json);
    }
    s
}

/// Runs criteria 1 to 9 twice, the second time on a single worker thread, and
/// adds criterion 10 comparing the two serializations byte for byte.
pub fn verify_all(seed: u64) -> Result<(AcceptanceReport, BTreeMap<String, String>), RunError> {
    let first = run_criteria(seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| RunError::Config(format!("cannot build worker pool: {e}")))?;
    let second = pool.install(|| run_criteria(seed))?;
    let (a, b) = (serialized(&first), serialized(&second));
    let differing = a.bytes().zip(b.bytes()).filter(|(x, y)| x != y).count() + a.len().abs_diff(b.len());
    let mut criteria = first.criteria;
    criteria.push(CriterionResult::new(
        10,
        "reruns with the same seed are byte-identical",
        vec![
            Measurement::new("all instances", "differing bytes between runs", differing as f64, Relation::Equal, 0.0),
            Measurement::new("all instances", "serialized length", a.len() as f64, Relation::GreaterThan, 0.0),
        ],
    ));
    let all_pass = criteria.iter().all(|c| c.pass);
    Ok((
        AcceptanceReport {
            schema_version: SCHEMA_VERSION.to_string(),
            seed,
            instances: first.instances,
            criteria,
            all_pass,
        },
        first.reports,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measurement_relations() {
        assert!(Measurement::new("a", "q", 1e-9, Relation::AtMost, 1e-8).pass);
        assert!(!Measurement::new("a", "q", 1e-7, Relation::AtMost, 1e-8).pass);
        assert!(!Measurement::new("a", "q", f64::NAN, Relation::AtLeast, 0.0).pass);
        assert!(Measurement::flag("a", "q", true).pass);
        assert!(!Measurement::flag("a", "q", false).pass);
    }

    #[test]
    fn empty_criterion_fails() {
        assert!(!CriterionResult::new(1, "t", vec![]).pass);
    }

    #[test]
    fn instance_inputs_parse() {
        for i in instances() {
            let input: InputRef = i.input.parse().unwrap();
            load_spec(&input).unwrap();
        }
    }
}
