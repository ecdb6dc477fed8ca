//! Named reference immersions.
//!
//! Each entry renders an immersion definition as source text and parses it, so
//! a catalog spec is exactly what [`parse`](super::parse) would produce for the
//! same text.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::ast::{ImmersionSpec, MAX_AMBIENT};
use super::parse;
use super::DslError;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Scalar(v)
    }
}

impl From<Vec<f64>> for ParamValue {
    fn from(v: Vec<f64>) -> Self {
        ParamValue::Vector(v)
    }
}

pub type Params = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, Copy)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    /// Parameters that must be given explicitly.
    pub required: &'static [&'static str],
}

const ENTRIES: &[CatalogEntry] = &[
    CatalogEntry {
        name: "sphere",
        summary: "round n-sphere of radius r about `center` (default origin) in E^(n+1)",
        required: &["r"],
    },
    CatalogEntry {
        name: "subspace",
        summary: "linear n-subspace through the origin of E^m",
        required: &[],
    },
    CatalogEntry {
        name: "plane_offset",
        summary: "affine hyperplane x_(n+1) = c in E^(n+1)",
        required: &["c"],
    },
    CatalogEntry {
        name: "cylinder",
        summary: "circular cylinder of radius r about the x3 axis",
        required: &["r"],
    },
    CatalogEntry {
        name: "torus",
        summary: "torus of revolution with center-circle radius R and tube radius r",
        required: &["R", "r"],
    },
    CatalogEntry {
        name: "clifford_torus",
        summary: "product of circles of radii a and b in E^4",
        required: &["a", "b"],
    },
    CatalogEntry {
        name: "flat_torus",
        summary: "product of k unit circles in E^(2k)",
        required: &[],
    },
    CatalogEntry {
        name: "helix",
        summary: "circular helix (a cos t, a sin t, b t)",
        required: &["a", "b"],
    },
    CatalogEntry {
        name: "circle",
        summary: "planar circle of radius r about `center` in E^2",
        required: &["r"],
    },
    CatalogEntry {
        name: "graph4",
        summary: "4-dimensional quadratic graph in E^6 (generic, not conformally flat)",
        required: &[],
    },
];

pub fn catalog_entries() -> &'static [CatalogEntry] {
    ENTRIES
}

fn entry(name: &str) -> Result<&'static CatalogEntry, DslError> {
    ENTRIES
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| DslError::UnknownCatalogEntry(name.to_string()))
}

/// A complete parameter map with every entry parameter at its default.
pub fn catalog_defaults(name: &str) -> Result<Params, DslError> {
    let e = entry(name)?;
    let mut p = Params::new();
    let s = |v: f64| ParamValue::Scalar(v);
    match e.name {
        "sphere" => {
            p.insert("n".into(), s(2.0));
            p.insert("r".into(), s(1.0));
            p.insert("center".into(), ParamValue::Vector(vec![0.0; 3]));
        }
        "subspace" => {
            p.insert("n".into(), s(2.0));
            p.insert("m".into(), s(3.0));
        }
        "plane_offset" => {
            p.insert("n".into(), s(2.0));
            p.insert("c".into(), s(1.0));
        }
        "cylinder" => {
            p.insert("r".into(), s(1.0));
        }
        "torus" => {
            p.insert("R".into(), s(3.0));
            p.insert("r".into(), s(1.0));
        }
        "clifford_torus" => {
            p.insert("a".into(), s(1.0));
            p.insert("b".into(), s(1.0));
        }
        "flat_torus" => {
            p.insert("k".into(), s(4.0));
        }
        "helix" => {
            p.insert("a".into(), s(1.0));
            p.insert("b".into(), s(1.0));
        }
        "circle" => {
            p.insert("r".into(), s(1.0));
            p.insert("center".into(), ParamValue::Vector(vec![0.5, 0.0]));
        }
        "graph4" => {
            p.insert("a".into(), s(1.0));
        }
        _ => unreachable!(),
    }
    Ok(p)
}

struct Builder<'a> {
    entry: &'static CatalogEntry,
    params: &'a Params,
}

impl Builder<'_> {
    fn bad(&self, param: &str, reason: impl Into<String>) -> DslError {
        DslError::BadParameter {
            entry: self.entry.name.into(),
            param: param.into(),
            reason: reason.into(),
        }
    }

    fn scalar_or(&self, name: &str, default: Option<f64>) -> Result<f64, DslError> {
        match self.params.get(name) {
            Some(ParamValue::Scalar(v)) if v.is_finite() => Ok(*v),
            Some(ParamValue::Scalar(_)) => Err(self.bad(name, "must be finite")),
            Some(ParamValue::Vector(_)) => Err(self.bad(name, "expected a scalar")),
            None if self.entry.required.contains(&name) || default.is_none() => Err(DslError::MissingParameter {
                entry: self.entry.name.into(),
                param: name.into(),
            }),
            None => Ok(default.unwrap()),
        }
    }

    fn count(&self, name: &str, default: usize, range: std::ops::RangeInclusive<usize>) -> Result<usize, DslError> {
        let v = self.scalar_or(name, Some(default as f64))?;
        if v.fract() != 0.0 || v < 0.0 || !range.contains(&(v as usize)) {
            return Err(self.bad(name, format!("expected an integer in {range:?}, got {v}")));
        }
        Ok(v as usize)
    }

    fn positive(&self, name: &str, default: Option<f64>) -> Result<f64, DslError> {
        let v = self.scalar_or(name, default)?;
        if v <= 0.0 {
            return Err(self.bad(name, format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    fn vector_or_zero(&self, name: &str, len: usize) -> Result<Vec<f64>, DslError> {
        match self.params.get(name) {
            None => Ok(vec![0.0; len]),
            Some(ParamValue::Vector(v)) if v.len() == len && v.iter().all(|x| x.is_finite()) => Ok(v.clone()),
            Some(ParamValue::Vector(v)) => Err(self.bad(name, format!("expected {len} finite components, got {}", v.len()))),
            Some(ParamValue::Scalar(_)) => Err(self.bad(name, "expected a vector")),
        }
    }

    fn check_unknown(&self, known: &[&str]) -> Result<(), DslError> {
        match self.params.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(self.bad(k, "not a parameter of this entry")),
            None => Ok(()),
        }
    }
}

fn num(v: f64) -> String {
    if v < 0.0 {
        format!("({v:?})")
    } else {
        format!("{v:?}")
    }
}

fn render(n: usize, m: usize, params: &[(&str, f64)], domain: &[(f64, f64)], grid: &[usize], comps: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "dim {n} -> {m};");
    for (k, v) in params {
        let _ = writeln!(s, "param {k} = {};", num(*v));
    }
    for (i, (lo, hi)) in domain.iter().enumerate() {
        let _ = writeln!(s, "domain u{} in [{}, {}];", i + 1, num(*lo), num(*hi));
    }
    let g: Vec<String> = grid.iter().map(|g| g.to_string()).collect();
    let _ = writeln!(s, "grid {};", g.join(", "));
    for (k, c) in comps.iter().enumerate() {
        let _ = writeln!(s, "x{} = {};", k + 1, c);
    }
    s
}

fn default_grid(n: usize) -> usize {
    match n {
        1 => 32,
        2 => 16,
        3 => 8,
        _ => 4,
    }
}

/// Source text of a catalog immersion; `catalog` parses exactly this.
pub fn catalog_source(name: &str, params: &Params) -> Result<String, DslError> {
    use std::f64::consts::{FRAC_PI_2, PI};
    let b = Builder { entry: entry(name)?, params };
    let src = match b.entry.name {
        "sphere" => {
            b.check_unknown(&["n", "r", "center"])?;
            let n = b.count("n", 2, 1..=MAX_AMBIENT - 1)?;
            let r = b.positive("r", None)?;
            let center = b.vector_or_zero("center", n + 1)?;
            let mut ps: Vec<(String, f64)> = vec![("r".into(), r)];
            for (k, c) in center.iter().enumerate() {
                ps.push((format!("c{}", k + 1), *c));
            }
            // nested hyperspherical coordinates
            let comps: Vec<String> = (0..=n)
                .map(|k| {
                    let mut factors = Vec::new();
                    match k {
                        0 => factors.push("cos(u1)".to_string()),
                        _ => factors.push(format!("sin(u{k})")),
                    }
                    for j in (k.max(1) + 1)..=n {
                        factors.push(format!("cos(u{j})"));
                    }
                    format!("c{} + r * {}", k + 1, factors.join(" * "))
                })
                .collect();
            let domain: Vec<(f64, f64)> = (0..n).map(|i| if i == 0 { (-PI, PI) } else { (-FRAC_PI_2, FRAC_PI_2) }).collect();
            let ps_ref: Vec<(&str, f64)> = ps.iter().map(|(k, v)| (k.as_str(), *v)).collect();
            render(n, n + 1, &ps_ref, &domain, &vec![default_grid(n); n], &comps)
        }
        "subspace" => {
            b.check_unknown(&["n", "m"])?;
            let n = b.count("n", 2, 1..=MAX_AMBIENT - 1)?;
            let m = b.count("m", n + 1, (n + 1)..=MAX_AMBIENT)?;
            let comps: Vec<String> = (0..m).map(|k| if k < n { format!("u{}", k + 1) } else { "0.0".into() }).collect();
            render(n, m, &[], &vec![(-1.0, 1.0); n], &vec![default_grid(n).min(8); n], &comps)
        }
        "plane_offset" => {
            b.check_unknown(&["n", "c"])?;
            let n = b.count("n", 2, 1..=MAX_AMBIENT - 1)?;
            let c = b.scalar_or("c", None)?;
            let mut comps: Vec<String> = (0..n).map(|k| format!("u{}", k + 1)).collect();
            comps.push("c".into());
            render(n, n + 1, &[("c", c)], &vec![(-2.0, 2.0); n], &vec![default_grid(n).min(8); n], &comps)
        }
        "cylinder" => {
            b.check_unknown(&["r"])?;
            let r = b.positive("r", None)?;
            let comps = ["r * cos(u1)".into(), "r * sin(u1)".into(), "u2".into()];
            render(2, 3, &[("r", r)], &[(-PI, PI), (-1.0, 1.0)], &[16, 16], &comps)
        }
        "torus" => {
            b.check_unknown(&["R", "r"])?;
            let big = b.positive("R", None)?;
            let r = b.positive("r", None)?;
            if r >= big {
                return Err(b.bad("r", "tube radius must be smaller than R"));
            }
            let comps = [
                "(R + r * cos(u2)) * cos(u1)".into(),
                "(R + r * cos(u2)) * sin(u1)".into(),
                "r * sin(u2)".into(),
            ];
            render(2, 3, &[("R", big), ("r", r)], &[(-PI, PI), (-PI, PI)], &[16, 16], &comps)
        }
        "clifford_torus" => {
            b.check_unknown(&["a", "b"])?;
            let a = b.positive("a", None)?;
            let bb = b.positive("b", None)?;
            let comps = [
                "a * cos(u1)".into(),
                "a * sin(u1)".into(),
                "b * cos(u2)".into(),
                "b * sin(u2)".into(),
            ];
            render(2, 4, &[("a", a), ("b", bb)], &[(-PI, PI), (-PI, PI)], &[16, 16], &comps)
        }
        "flat_torus" => {
            b.check_unknown(&["k"])?;
            let k = b.count("k", 4, 1..=MAX_AMBIENT / 2)?;
            let comps: Vec<String> = (1..=k).flat_map(|i| [format!("cos(u{i})"), format!("sin(u{i})")]).collect();
            render(k, 2 * k, &[], &vec![(-PI, PI); k], &vec![default_grid(k); k], &comps)
        }
        "helix" => {
            b.check_unknown(&["a", "b"])?;
            let a = b.positive("a", None)?;
            let bb = b.scalar_or("b", None)?;
            let comps = ["a * cos(u1)".into(), "a * sin(u1)".into(), "b * u1".into()];
            render(1, 3, &[("a", a), ("b", bb)], &[(-2.0 * PI, 2.0 * PI)], &[32], &comps)
        }
        "circle" => {
            b.check_unknown(&["r", "center"])?;
            let r = b.positive("r", None)?;
            let c = b.vector_or_zero("center", 2)?;
            let comps = ["c1 + r * cos(u1)".into(), "c2 + r * sin(u1)".into()];
            render(1, 2, &[("r", r), ("c1", c[0]), ("c2", c[1])], &[(-PI, PI)], &[32], &comps)
        }
        "graph4" => {
            b.check_unknown(&["a"])?;
            let a = b.scalar_or("a", Some(1.0))?;
            let comps = [
                "u1".into(),
                "u2".into(),
                "u3".into(),
                "u4".into(),
                "a * (u1^2 + 0.5 * u2 * u3 - 0.3 * u4^2)".into(),
                "a * (u1 * u4 - u2^2 + 0.7 * u3^2)".into(),
            ];
            render(4, 6, &[("a", a)], &vec![(-0.5, 0.5); 4], &[4, 4, 4, 4], &comps)
        }
        _ => unreachable!(),
    };
    Ok(src)
}

/// Builds the named catalog immersion.
pub fn catalog(name: &str, params: &Params) -> Result<ImmersionSpec, DslError> {
    parse(&catalog_source(name, params)?)
}
