//! Checks built on top of the canonical field: Yamabe solitons, generalized
//! self-similar submanifolds, and pointwise identities satisfied by a conformal
//! x^T (curvature, Ricci, Laplacian, gradient and Hessian identities).
//!
//! Identity checks that presuppose a hypothesis are gated: when the hypothesis
//! fails on the grid the check is skipped with a reason instead of reporting
//! meaningless residuals.

mod identities;
mod self_similar;
mod yamabe;

use serde::Serialize;

use crate::sampling::Sample;

pub use identities::{
    curvature_identity_check, hessian_obata_check, identity_suite, laplacian_gradient_check, ricci_identity_checks,
    ricci_hypothesis_check, EigenFit, HessianReport, IdentityLedger, LaplacianReport, RicciReport, RicciHypothesisReport,
};
pub use self_similar::{self_similar_check, SelfSimilarReport};
pub use yamabe::{yamabe_check, SolitonReport};

/// Why a gated check did not run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    NotConformal,
    NonconstantPhi,
    MissingPrereq,
}

/// Result of a check that may be skipped.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Gated<T> {
    Ran(T),
    Skipped { reason: SkipReason, note: String },
}

impl<T> Gated<T> {
    pub fn ran(&self) -> Option<&T> {
        match self {
            Gated::Ran(t) => Some(t),
            Gated::Skipped { .. } => None,
        }
    }

    pub fn skip_reason(&self) -> Option<SkipReason> {
        match self {
            Gated::Ran(_) => None,
            Gated::Skipped { reason, .. } => Some(*reason),
        }
    }

    fn skipped(reason: SkipReason, note: &str) -> Gated<T> {
        Gated::Skipped {
            reason,
            note: note.to_string(),
        }
    }
}

/// Chart directions used for vector identities: an orthonormal frame plus the seeded random ones.
pub(crate) fn test_directions(s: &Sample) -> Vec<Vec<f64>> {
    (0..s.frame.n).map(|a| s.frame.onb_chart(a)).chain(s.directions.iter().cloned()).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Chart vector a - b.
pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::dsl::{catalog, catalog_defaults, ParamValue};
    use crate::sampling::SampleSet;

    pub fn set_of(name: &str, overrides: &[(&str, ParamValue)]) -> SampleSet {
        let mut p = catalog_defaults(name).unwrap();
        for (k, v) in overrides {
            p.insert(k.to_string(), v.clone());
        }
        let spec = catalog(name, &p).unwrap();
        let counts: Vec<usize> = spec.grid.iter().map(|&c| c.min(6)).collect();
        SampleSet::evaluate(&spec, Some(&counts), 3).unwrap()
    }

    pub fn sphere(r: f64) -> SampleSet {
        set_of("sphere", &[("r", r.into())])
    }

    pub fn off_center() -> SampleSet {
        set_of("sphere", &[("r", 1.0.into()), ("center", vec![0.5, 0.0, 0.0].into())])
    }
}
