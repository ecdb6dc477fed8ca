//! Analysis of the canonical field `x^T`: its Lie derivative of the metric,
//! conformality, umbilicity with respect to normal fields, the link between
//! the two, torse-forming classification and parallelism of `x^N/|x^N|`.
//!
//! Symmetric 2-forms are compared in a g-orthonormal frame obtained from the
//! Cholesky factor of the metric, so residuals do not depend on the chart.

mod classify;
mod parallel;
mod conformal_umbilic;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::geometry::{shape_operator_unchecked, GeometryFrame, PositionSplit};
use crate::sampling::{SampleSet, SeriesStats};

pub use classify::{classify_field, torse_forming_fit, FieldClass, FieldKind, TorseFit};
pub use parallel::{parallel_normal_direction_test, ParallelNormalReport};
pub use conformal_umbilic::{conformal_umbilic_check, EtaCoefficientCheck, ConformalUmbilicReport};

/// Default tolerance for residuals computed from exact jets.
pub const DEFAULT_TOL: f64 = 1e-8;

/// A reference normal vector counts as vanishing below this multiple of the point scale.
pub const VANISHING_TOL: f64 = 1e-10;

/// Components of a symmetric form in the g-orthonormal frame `L^{-T}` where `g = L L^T`.
pub fn orthonormal_form(g: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let l = g.clone().cholesky().expect("metric is positive definite").l();
    let linv = l.try_inverse().expect("triangular factor is invertible");
    &linv * b * linv.transpose()
}

/// Splits a form into `mu g` plus a trace-free remainder; returns `(mu, |remainder|_g)`.
pub fn trace_split(g: &DMatrix<f64>, b: &DMatrix<f64>) -> (f64, f64) {
    let c = orthonormal_form(g, b);
    let n = c.nrows();
    let mu = c.trace() / n as f64;
    let dev = c - DMatrix::identity(n, n) * mu;
    (mu, dev.norm())
}

/// L_{x^T} g by two routes.
#[derive(Debug, Clone)]
pub struct LieDerivative {
    /// 2 g + 2 <h, x^N>.
    pub route_a: DMatrix<f64>,
    /// g(∇_i x^T, ∂_j) + g(∂_i, ∇_j x^T) with ∇x^T = I + A_{x^N}.
    pub route_b: DMatrix<f64>,
    /// Max entry of |route_a - route_b|.
    pub agreement: f64,
}

/// (∇_j x^T)^k at (k, j) from the shape operator of x^N.
pub fn covariant_xt_from_shape(frame: &GeometryFrame, split: &PositionSplit) -> DMatrix<f64> {
    let n = frame.n;
    DMatrix::identity(n, n) + shape_operator_unchecked(frame, &split.xn)
}

/// Symmetrized lowering of an endomorphism given as (∇_j v)^k at (k, j).
pub fn lie_from_covariant(g: &DMatrix<f64>, nabla: &DMatrix<f64>) -> DMatrix<f64> {
    let lowered = g * nabla;
    &lowered + lowered.transpose()
}

pub fn lie_derivative_metric(frame: &GeometryFrame, split: &PositionSplit) -> LieDerivative {
    let n = frame.n;
    let route_a = DMatrix::from_fn(n, n, |i, j| 2.0 * frame.metric[(i, j)] + 2.0 * frame.h(i, j).dot(&split.xn));
    let route_b = lie_from_covariant(&frame.metric, &covariant_xt_from_shape(frame, split));
    let agreement = (&route_a - &route_b).amax();
    LieDerivative {
        route_a,
        route_b,
        agreement,
    }
}

/// Outcome of the pointwise test L g = 2 φ g.
#[derive(Debug, Clone, Serialize)]
pub struct ConformalVerdict {
    pub is_conformal: bool,
    pub tolerance: f64,
    pub phi: Vec<Option<f64>>,
    pub residual: Vec<Option<f64>>,
    pub stats: SeriesStats,
    /// L g vanishes on the whole grid, so the field is conformal with φ = 0.
    pub trivially_conformal: bool,
    /// max φ - min φ over the grid.
    pub phi_spread: f64,
}

/// φ = tr(g^{-1} L)/(2n) and |L - 2φ g|_g / n at one point.
pub fn conformal_point(lg: &DMatrix<f64>, g: &DMatrix<f64>) -> (f64, f64) {
    let n = g.nrows() as f64;
    let (mu, dev) = trace_split(g, lg);
    (mu / 2.0, dev / n)
}

pub fn conformality_test(lg: &[Option<DMatrix<f64>>], g: &[Option<DMatrix<f64>>], tol: f64) -> ConformalVerdict {
    assert_eq!(lg.len(), g.len(), "sample sets must match");
    let pairs: Vec<Option<(f64, f64)>> = lg
        .iter()
        .zip(g)
        .map(|(l, g)| match (l, g) {
            (Some(l), Some(g)) => Some(conformal_point(l, g)),
            _ => None,
        })
        .collect();
    let phi: Vec<Option<f64>> = pairs.iter().map(|p| p.map(|p| p.0)).collect();
    let residual: Vec<Option<f64>> = pairs.iter().map(|p| p.map(|p| p.1)).collect();
    let stats = SeriesStats::of(&residual);
    let trivially_conformal = lg.iter().flatten().all(|l| l.amax() <= tol);
    let lo = SeriesStats::min_of(&phi).unwrap_or(0.0);
    let hi = phi.iter().flatten().copied().fold(lo, f64::max);
    ConformalVerdict {
        is_conformal: residual.iter().flatten().all(|r| *r <= tol),
        tolerance: tol,
        phi,
        residual,
        stats,
        trivially_conformal,
        phi_spread: hi - lo,
    }
}

/// Conformality of x^T over a sample set, with L g from the second fundamental form.
pub fn conformality_of_set(set: &SampleSet, tol: f64) -> ConformalVerdict {
    let lg = set.map(|s| lie_derivative_metric(&s.frame, &s.split).route_a);
    let g = set.map(|s| s.frame.metric.clone());
    conformality_test(&lg, &g, tol)
}

/// Which normal field umbilicity is tested against.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "vector", rename_all = "snake_case")]
pub enum NormalRef {
    PositionNormal,
    MeanCurvature,
    /// A fixed ambient vector, projected onto the normal space at each point.
    Explicit(Vec<f64>),
}

impl NormalRef {
    pub fn label(&self) -> &'static str {
        match self {
            NormalRef::PositionNormal => "x^N",
            NormalRef::MeanCurvature => "H",
            NormalRef::Explicit(_) => "explicit",
        }
    }

    pub fn resolve(&self, frame: &GeometryFrame, split: &PositionSplit) -> DVector<f64> {
        match self {
            NormalRef::PositionNormal => split.xn.clone(),
            NormalRef::MeanCurvature => crate::geometry::mean_curvature(frame),
            NormalRef::Explicit(v) => frame.normal_part(&DVector::from_column_slice(v)),
        }
    }
}

/// Outcome of the pointwise test <h, ξ> = μ g.
#[derive(Debug, Clone, Serialize)]
pub struct UmbilicVerdict {
    pub is_umbilical: bool,
    pub reference_normal: NormalRef,
    pub tolerance: f64,
    pub mu: Vec<Option<f64>>,
    pub residual: Vec<Option<f64>>,
    pub stats: SeriesStats,
    /// Grid indices where the reference normal vanishes (μ = 0, residual = 0 there).
    pub vanishing: Vec<usize>,
}

/// μ = tr(g^{-1}<h, ξ>)/n and (2/n)|<h, ξ> - μ g|_g, the same normalization as the
/// conformality residual since L g - 2φ g = 2 (<h, x^N> - η g).
pub fn umbilic_point(frame: &GeometryFrame, xi: &DVector<f64>) -> (f64, f64) {
    let n = frame.n;
    let paired = DMatrix::from_fn(n, n, |i, j| frame.h(i, j).dot(xi));
    let (mu, dev) = trace_split(&frame.metric, &paired);
    (mu, 2.0 * dev / n as f64)
}

pub fn umbilicity_test(set: &SampleSet, reference: &NormalRef, tol: f64) -> UmbilicVerdict {
    let mut vanishing = Vec::new();
    let pairs: Vec<Option<(f64, f64)>> = set
        .samples
        .iter()
        .map(|s| {
            let s = s.as_ref()?;
            let xi = reference.resolve(&s.frame, &s.split);
            if xi.norm() <= VANISHING_TOL * s.scale() {
                vanishing.push(s.index);
                return Some((0.0, 0.0));
            }
            Some(umbilic_point(&s.frame, &xi))
        })
        .collect();
    let mu: Vec<Option<f64>> = pairs.iter().map(|p| p.map(|p| p.0)).collect();
    let residual: Vec<Option<f64>> = pairs.iter().map(|p| p.map(|p| p.1)).collect();
    UmbilicVerdict {
        is_umbilical: residual.iter().flatten().all(|r| *r <= tol),
        reference_normal: reference.clone(),
        tolerance: tol,
        stats: SeriesStats::of(&residual),
        mu,
        residual,
        vanishing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{catalog, catalog_defaults, ParamValue};
    use crate::sampling::SampleSet;

    pub(crate) fn set_of(name: &str, overrides: &[(&str, ParamValue)]) -> SampleSet {
        let mut p = catalog_defaults(name).unwrap();
        for (k, v) in overrides {
            p.insert(k.to_string(), v.clone());
        }
        let spec = catalog(name, &p).unwrap();
        let counts: Vec<usize> = spec.grid.iter().map(|&c| c.min(6)).collect();
        SampleSet::evaluate(&spec, Some(&counts), 1).unwrap()
    }

    pub(crate) fn off_center() -> SampleSet {
        set_of("sphere", &[("r", 1.0.into()), ("center", vec![0.5, 0.0, 0.0].into())])
    }

    #[test]
    fn lie_derivative_examples() {
        for s in set_of("subspace", &[]).valid() {
            let l = lie_derivative_metric(&s.frame, &s.split);
            assert!((&l.route_a - 2.0 * &s.frame.metric).amax() < 1e-14);
            assert!(l.agreement < 1e-14);
        }
        for s in set_of("sphere", &[("r", 1.0.into())]).valid() {
            let l = lie_derivative_metric(&s.frame, &s.split);
            assert!(l.route_a.amax() < 1e-14);
        }
        for s in set_of("cylinder", &[]).valid() {
            let l = lie_derivative_metric(&s.frame, &s.split);
            let want = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 2.0]);
            assert!((&l.route_a - &want).amax() < 1e-14);
            assert!((&l.route_b - &want).amax() < 1e-14);
        }
    }

    #[test]
    fn lie_derivative_matches_differentiated_field() {
        for s in set_of("torus", &[]).valid() {
            let l = lie_derivative_metric(&s.frame, &s.split);
            let from_jets = lie_from_covariant(&s.frame.metric, &s.fields.nabla_xt);
            assert!((&l.route_a - &from_jets).amax() < 1e-12 * s.scale());
        }
    }

    #[test]
    fn plane_through_origin_is_conformal_with_unit_potential() {
        let v = conformality_of_set(&set_of("subspace", &[]), DEFAULT_TOL);
        assert!(v.is_conformal);
        assert!(!v.trivially_conformal);
        for phi in v.phi.iter().flatten() {
            assert!((phi - 1.0).abs() < 1e-14);
        }
        assert!(v.stats.max < 1e-14);
    }

    #[test]
    fn cylinder_is_not_conformal() {
        let v = conformality_of_set(&set_of("cylinder", &[]), DEFAULT_TOL);
        assert!(!v.is_conformal);
        for (phi, r) in v.phi.iter().flatten().zip(v.residual.iter().flatten()) {
            assert!((phi - 0.5).abs() < 1e-14);
            assert!((r - 0.5f64.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn off_center_sphere_potential() {
        let set = off_center();
        let v = conformality_of_set(&set, DEFAULT_TOL);
        assert!(v.is_conformal);
        assert!(v.phi_spread > 0.5);
        let c = DVector::from_column_slice(&[0.5, 0.0, 0.0]);
        for s in set.valid() {
            let x = &s.split.x;
            let oracle = 1.0 - x.dot(&(x - &c));
            assert!((v.phi[s.index].unwrap() - oracle).abs() < 1e-12);
        }
        // the two points on the axis through the center
        let x = DVector::from_column_slice(&[1.5, 0.0, 0.0]);
        assert!((1.0 - x.dot(&(&x - &c)) + 0.5).abs() < 1e-15);
        let x = DVector::from_column_slice(&[-0.5, 0.0, 0.0]);
        assert!((1.0 - x.dot(&(&x - &c)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn origin_sphere_is_trivially_conformal() {
        let v = conformality_of_set(&set_of("sphere", &[("r", 1.0.into())]), DEFAULT_TOL);
        assert!(v.is_conformal && v.trivially_conformal);
        assert!(v.phi.iter().flatten().all(|p| p.abs() < 1e-14));
    }

    #[test]
    fn umbilicity_examples() {
        let u = umbilicity_test(&set_of("sphere", &[("r", 1.0.into())]), &NormalRef::PositionNormal, DEFAULT_TOL);
        assert!(u.is_umbilical);
        assert!(u.mu.iter().flatten().all(|m| (m + 1.0).abs() < 1e-13));

        let u = umbilicity_test(&set_of("plane_offset", &[("c", 1.0.into())]), &NormalRef::PositionNormal, DEFAULT_TOL);
        assert!(u.is_umbilical && u.vanishing.is_empty());
        assert!(u.mu.iter().flatten().all(|m| *m == 0.0));

        let u = umbilicity_test(&set_of("cylinder", &[]), &NormalRef::PositionNormal, DEFAULT_TOL);
        assert!(!u.is_umbilical);
        assert!(u.residual.iter().flatten().all(|r| (r - 0.5f64.sqrt()).abs() < 1e-14));
    }

    #[test]
    fn vanishing_reference_normal() {
        let set = set_of("subspace", &[]);
        let u = umbilicity_test(&set, &NormalRef::MeanCurvature, DEFAULT_TOL);
        assert_eq!(u.vanishing.len(), set.len());
        assert!(u.is_umbilical);
        let u = umbilicity_test(&set, &NormalRef::PositionNormal, DEFAULT_TOL);
        assert_eq!(u.vanishing.len(), set.len());
    }

    #[test]
    fn explicit_reference_normal() {
        let set = set_of("sphere", &[("r", 2.0.into())]);
        let u = umbilicity_test(&set, &NormalRef::Explicit(vec![0.0, 0.0, 1.0]), DEFAULT_TOL);
        assert!(u.is_umbilical);
        let u = umbilicity_test(&set_of("cylinder", &[]), &NormalRef::Explicit(vec![1.0, 0.0, 0.0]), DEFAULT_TOL);
        assert!(!u.is_umbilical);
    }

    #[test]
    fn curves_are_umbilical_for_any_normal() {
        let set = set_of("helix", &[]);
        assert!(conformality_of_set(&set, DEFAULT_TOL).stats.max == 0.0);
        for r in [NormalRef::PositionNormal, NormalRef::MeanCurvature, NormalRef::Explicit(vec![0.3, -1.0, 2.0])] {
            assert!(umbilicity_test(&set, &r, DEFAULT_TOL).stats.max == 0.0);
        }
    }

    #[test]
    fn cholesky_frame_is_orthonormal() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert!((orthonormal_form(&g, &g) - DMatrix::identity(2, 2)).amax() < 1e-15);
    }
}
