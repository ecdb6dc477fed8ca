//! Global shape diagnostics on sampled point clouds: containment in a
//! hypersphere about the origin or in a hyperplane, and conformal flatness
//! through the Weyl tensor.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::canonical::{parallel_normal_direction_test, conformal_umbilic_check};
use crate::sampling::{SampleSet, SeriesStats};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifierError {
    #[error("containment test needs at least {needed} valid points, got {have}")]
    TooFewPoints { needed: usize, have: usize },
    #[error("conformal flatness is tested through the Weyl tensor, which needs n >= 4 (n = {n})")]
    DimensionTooLow { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ContainmentKind {
    HypersphereOrigin,
    Hyperplane,
    Neither,
    Both,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContainmentVerdict {
    pub kind: ContainmentKind,
    pub sphere_radius: Option<f64>,
    /// stddev(|x|) / mean(|x|).
    pub sphere_residual: f64,
    pub plane_normal: Option<Vec<f64>>,
    /// Signed distance of the fitted plane from the origin along `plane_normal`.
    pub plane_offset: Option<f64>,
    pub origin_in_plane: bool,
    /// Max distance of a sample to the fitted plane.
    pub plane_residual: f64,
    /// Smallest over largest singular value of the centered cloud.
    pub singular_ratio: f64,
}

/// Sphere test by the spread of |x|; plane test by the SVD of the centered cloud.
pub fn containment_test(set: &SampleSet, tol: f64) -> Result<ContainmentVerdict, ClassifierError> {
    let pts: Vec<&DVector<f64>> = set.valid().map(|s| &s.split.x).collect();
    let needed = set.n() + 2;
    if pts.len() < needed {
        return Err(ClassifierError::TooFewPoints {
            needed,
            have: pts.len(),
        });
    }
    let m = set.m();
    let count = pts.len() as f64;

    let norms: Vec<f64> = pts.iter().map(|p| p.norm()).collect();
    let mean_norm = norms.iter().sum::<f64>() / count;
    let sd = (norms.iter().map(|r| (r - mean_norm).powi(2)).sum::<f64>() / count).sqrt();
    let sphere_residual = if mean_norm > 0.0 { sd / mean_norm } else { f64::INFINITY };
    let is_sphere = sphere_residual <= tol;

    let centroid = pts.iter().fold(DVector::zeros(m), |acc, p| acc + *p) / count;
    // rows are centered points; pad to at least m rows so all right singular vectors exist
    let rows = pts.len().max(m);
    let mut cloud = DMatrix::zeros(rows, m);
    for (r, p) in pts.iter().enumerate() {
        cloud.row_mut(r).copy_from(&(*p - &centroid).transpose());
    }
    let svd = cloud.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let (mut lo, mut hi) = (0, 0);
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s < svd.singular_values[lo] {
            lo = i;
        }
        if *s > svd.singular_values[hi] {
            hi = i;
        }
    }
    let largest = svd.singular_values[hi];
    let singular_ratio = if largest > 0.0 { svd.singular_values[lo] / largest } else { 0.0 };
    let normal: DVector<f64> = v_t.row(lo).transpose();
    let plane_residual = pts.iter().map(|p| (*p - &centroid).dot(&normal).abs()).fold(0.0, f64::max);
    let is_plane = singular_ratio <= tol;
    let offset = centroid.dot(&normal);
    let diameter = 1.0 + pts.iter().map(|p| (*p - &centroid).norm()).fold(0.0, f64::max);

    let kind = match (is_sphere, is_plane) {
        (true, true) => ContainmentKind::Both,
        (true, false) => ContainmentKind::HypersphereOrigin,
        (false, true) => ContainmentKind::Hyperplane,
        (false, false) => ContainmentKind::Neither,
    };
    Ok(ContainmentVerdict {
        kind,
        sphere_radius: is_sphere.then_some(mean_norm),
        sphere_residual,
        plane_normal: is_plane.then(|| normal.iter().copied().collect()),
        plane_offset: is_plane.then_some(offset),
        origin_in_plane: is_plane && offset.abs() <= tol * diameter,
        plane_residual,
        singular_ratio,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConformalFlatness {
    /// Weyl norms in a g-orthonormal frame, one per point.
    pub weyl: SeriesStats,
    pub is_conformally_flat: bool,
    pub tolerance: f64,
}

pub fn conformal_flatness_test(set: &SampleSet, tol: f64) -> Result<ConformalFlatness, ClassifierError> {
    if set.n() < 4 {
        return Err(ClassifierError::DimensionTooLow { n: set.n() });
    }
    let vals = set.map(|s| s.curvature.weyl_norm().unwrap_or(0.0) / s.scale());
    let weyl = SeriesStats::of(&vals);
    Ok(ConformalFlatness {
        is_conformally_flat: weyl.max <= tol,
        weyl,
        tolerance: tol,
    })
}

/// Outcome of the containment dichotomy for a conformal x^T with parallel normal direction.
#[derive(Debug, Clone, Serialize)]
pub struct DichotomyFinding {
    /// Conformal x^T, x^N nowhere zero and x^N/|x^N| parallel.
    pub hypotheses_hold: bool,
    pub containment: Option<ContainmentKind>,
    /// Hypotheses hold but the sample lies in neither alternative.
    pub tension: bool,
    pub note: String,
}

/// Evaluates the dichotomy as a diagnostic; never an assertion.
pub fn dichotomy_finding(set: &SampleSet, tol: f64) -> DichotomyFinding {
    let link = conformal_umbilic_check(set, tol);
    let parallel = parallel_normal_direction_test(set, tol);
    let hypotheses_hold = link.conformal.is_conformal && parallel.vanishing.is_empty() && parallel.is_parallel;
    let containment = containment_test(set, tol).ok().map(|c| c.kind);
    let tension = hypotheses_hold && containment == Some(ContainmentKind::Neither);
    let note = if tension {
        "x^T is conformal, x^N is nowhere zero with parallel direction, yet the sample lies neither in a \
         hypersphere about the origin nor in a hyperplane"
            .to_string()
    } else if hypotheses_hold {
        "hypotheses hold and the sample lies in one of the alternatives".to_string()
    } else {
        "hypotheses do not hold on this grid".to_string()
    };
    DichotomyFinding {
        hypotheses_hold,
        containment,
        tension,
        note,
    }
}
