use nalgebra::DMatrix;
use serde::Serialize;

use crate::canonical::{lie_derivative_metric, lie_from_covariant, orthonormal_form};
use crate::sampling::{ResidualSeries, SampleSet};

/// Fit of ½ L_{x^T} g = (R - λ) g with a single λ over the grid.
#[derive(Debug, Clone, Serialize)]
pub struct SolitonReport {
    pub lambda_fit: f64,
    /// Variance of the pointwise λ estimates R - φ.
    pub lambda_variance: f64,
    /// |½ L g - (R - λ) g|_g at the fitted λ.
    pub residual: ResidualSeries,
    /// |<h, x^N> - (R - λ - 1) g|_g at the fitted λ.
    pub residual_sff_form: ResidualSeries,
    /// | |L g - 2(R-λ) g| - 2 |<h, x^N> - (R-λ-1) g| | / scale, with L g from differentiated jets.
    pub form_consistency: ResidualSeries,
    pub is_soliton: bool,
    #[serde(skip)]
    pub r_samples: Vec<Option<f64>>,
}

pub fn yamabe_check(set: &SampleSet, tol: f64) -> SolitonReport {
    // pointwise λ from the trace: tr(½ L g) = n (R - λ)
    let estimates = set.map(|s| {
        let lg = lie_derivative_metric(&s.frame, &s.split).route_a;
        let phi = orthonormal_form(&s.frame.metric, &lg).trace() / (2.0 * s.frame.n as f64);
        s.curvature.scalar - phi
    });
    let vals: Vec<f64> = estimates.iter().flatten().copied().collect();
    let count = vals.len().max(1) as f64;
    let lambda = vals.iter().sum::<f64>() / count;
    let lambda_variance = vals.iter().map(|v| (v - lambda).powi(2)).sum::<f64>() / count;

    let per_point = set.map(|s| {
        let g = &s.frame.metric;
        let n = s.frame.n;
        let r = s.curvature.scalar;
        let lg_jet = lie_from_covariant(g, &s.fields.nabla_xt);
        let full = orthonormal_form(g, &(&lg_jet - g * (2.0 * (r - lambda)))).norm();
        let paired = DMatrix::from_fn(n, n, |i, j| s.frame.h(i, j).dot(&s.split.xn));
        let sff = orthonormal_form(g, &(paired - g * (r - lambda - 1.0))).norm();
        (full / 2.0, sff, (full - 2.0 * sff).abs() / s.scale())
    });
    let pick = |k: usize| -> Vec<Option<f64>> {
        per_point
            .iter()
            .map(|p| p.map(|p| [p.0, p.1, p.2][k]))
            .collect()
    };
    let residual = ResidualSeries::new("yamabe_soliton", "½ L g = (R - λ) g", pick(0), tol, false);
    SolitonReport {
        lambda_fit: lambda,
        lambda_variance,
        is_soliton: residual.pass && residual.stats.count > 0,
        residual,
        residual_sff_form: ResidualSeries::new("yamabe_soliton_sff_form", "<h, x^N> = (R - λ - 1) g", pick(1), tol, false),
        form_consistency: ResidualSeries::new(
            "yamabe_form_consistency",
            "L g - 2(R-λ) g = 2(<h, x^N> - (R-λ-1) g)",
            pick(2),
            1e-10,
            true,
        ),
        r_samples: set.map(|s| s.curvature.scalar),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::applications::fixtures::{set_of, sphere};

    #[test]
    fn round_spheres_are_solitons() {
        for r in [0.5, 1.0, 2.0] {
            let y = yamabe_check(&sphere(r), 1e-8);
            assert!((y.lambda_fit - 2.0 / (r * r)).abs() < 1e-10, "r={r}: {}", y.lambda_fit);
            assert!(y.is_soliton);
            assert!(y.residual.max() < 1e-10);
            assert!(y.lambda_variance < 1e-20);
            assert!(y.form_consistency.pass);
        }
    }

    #[test]
    fn cylinder_admits_no_lambda() {
        let y = yamabe_check(&set_of("cylinder", &[]), 1e-8);
        assert!(!y.is_soliton);
        // R = 0 and ½ L g = diag(0, 1): the best λ is -1/2, leaving diag(-1/2, 1/2)
        assert!((y.lambda_fit + 0.5).abs() < 1e-12);
        assert!((y.residual.stats.min - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(y.form_consistency.pass);
    }

    #[test]
    fn forms_agree_on_curved_examples() {
        for name in ["torus", "clifford_torus"] {
            let y = yamabe_check(&set_of(name, &[]), 1e-8);
            assert!(y.form_consistency.pass, "{name}: {}", y.form_consistency.max());
        }
    }
}
