//! Torse-forming classification of x^T.
//!
//! A field v is torse-forming when ∇_X v = φX + α(X)v. In a g-orthonormal frame
//! ∇v is a matrix N and the model is `φ I + v αᵀ`. For fixed v the best fit has
//! closed form: with P the projector orthogonal to v, φ = tr(P N)/(n-1) and
//! αᵀ = vᵀ(N - φI)/|v|², leaving residual |P (N - φI)|.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::covariant_xt_from_shape;
use crate::sampling::{SampleSet, SeriesStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Zero,
    Concurrent,
    Concircular,
    TorseForming,
    ConformalOnly,
    None,
}

impl FieldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Zero => "zero",
            FieldKind::Concurrent => "concurrent",
            FieldKind::Concircular => "concircular",
            FieldKind::TorseForming => "torse-forming",
            FieldKind::ConformalOnly => "conformal-only",
            FieldKind::None => "none",
        }
    }
}

/// Least-squares torse-forming fit at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct TorseFit {
    pub varphi: f64,
    /// α in g-orthonormal components.
    pub alpha: DVector<f64>,
    /// Frobenius norm of the misfit divided by n.
    pub residual: f64,
}

/// Fits N ≈ φ I + v αᵀ where N and v are given in an orthonormal frame.
pub fn torse_forming_fit(nabla: &DMatrix<f64>, v: &DVector<f64>) -> TorseFit {
    let n = nabla.nrows();
    let nf = n as f64;
    let vv = v.norm_squared();
    let id = DMatrix::<f64>::identity(n, n);
    if vv == 0.0 || n == 1 {
        // α is unconstrained (v = 0) or absorbed by φ (n = 1)
        let varphi = nabla.trace() / nf;
        let residual = (nabla - &id * varphi).norm() / nf;
        return TorseFit {
            varphi,
            alpha: DVector::zeros(n),
            residual,
        };
    }
    let p = &id - v * v.transpose() / vv;
    let varphi = (&p * nabla).trace() / (nf - 1.0);
    let shifted = nabla - &id * varphi;
    let alpha = shifted.transpose() * v / vv;
    let residual = (&p * &shifted).norm() / nf;
    TorseFit { varphi, alpha, residual }
}

/// Max residuals of each candidate class over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassResiduals {
    /// |x^T| / scale.
    pub zero: f64,
    /// |N - I| / n.
    pub concurrent: f64,
    /// |N - (tr N / n) I| / n.
    pub concircular: f64,
    pub torse_forming: f64,
    /// Trace-free part of the symmetrized N, divided by n.
    pub conformal: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldClass {
    pub class: FieldKind,
    pub tolerance: f64,
    pub varphi: Vec<Option<f64>>,
    /// α in chart components.
    pub alpha: Vec<Option<Vec<f64>>>,
    pub residuals: ClassResiduals,
    pub varphi_stats: SeriesStats,
    /// x^T vanishes on the whole grid, so no fit was possible.
    pub degenerate_fit: bool,
}

struct PointClass {
    fit: TorseFit,
    alpha_chart: Vec<f64>,
    zero: f64,
    concurrent: f64,
    concircular: f64,
    conformal: f64,
}

/// Classifies x^T using ∇x^T = I + A_{x^N}, most restrictive class first.
pub fn classify_field(set: &SampleSet, tol: f64) -> FieldClass {
    let per_point = set.map(|s| {
        let frame = &s.frame;
        let n = frame.n;
        let nf = n as f64;
        // columns of e hold chart components of the orthonormal frame
        let e = DMatrix::from_fn(n, n, |k, a| frame.onb_chart(a)[k]);
        let e_inv = e.transpose() * &frame.metric;
        let m = e_inv.clone() * covariant_xt_from_shape(frame, &s.split) * &e;
        let v = &e_inv * DVector::from_column_slice(&s.split.xt_chart);
        let id = DMatrix::<f64>::identity(n, n);
        let fit = torse_forming_fit(&m, &v);
        let mean = m.trace() / nf;
        let sym = (&m + m.transpose()) * 0.5;
        let alpha_chart = (e_inv.transpose() * &fit.alpha).iter().copied().collect();
        PointClass {
            alpha_chart,
            zero: s.split.xt_norm / s.scale(),
            concurrent: (&m - &id).norm() / nf,
            concircular: (&m - &id * mean).norm() / nf,
            conformal: (sym - &id * mean).norm() / nf,
            fit,
        }
    });
    let worst = |f: &dyn Fn(&PointClass) -> f64| per_point.iter().flatten().map(f).fold(0.0, f64::max);
    let residuals = ClassResiduals {
        zero: worst(&|p| p.zero),
        concurrent: worst(&|p| p.concurrent),
        concircular: worst(&|p| p.concircular),
        torse_forming: worst(&|p| p.fit.residual),
        conformal: worst(&|p| p.conformal),
    };
    let class = if residuals.zero <= tol {
        FieldKind::Zero
    } else if residuals.concurrent <= tol {
        FieldKind::Concurrent
    } else if residuals.concircular <= tol {
        FieldKind::Concircular
    } else if residuals.torse_forming <= tol {
        FieldKind::TorseForming
    } else if residuals.conformal <= tol {
        FieldKind::ConformalOnly
    } else {
        FieldKind::None
    };
    let varphi: Vec<Option<f64>> = per_point.iter().map(|p| p.as_ref().map(|p| p.fit.varphi)).collect();
    FieldClass {
        class,
        tolerance: tol,
        alpha: per_point.iter().map(|p| p.as_ref().map(|p| p.alpha_chart.clone())).collect(),
        varphi_stats: SeriesStats::of(&varphi),
        varphi,
        residuals,
        degenerate_fit: class == FieldKind::Zero,
    }
}
