use nalgebra::DMatrix;
use serde::Serialize;

use super::{dot, sub, test_directions, Gated, SelfSimilarReport, SkipReason};
use crate::canonical::{conformality_of_set, orthonormal_form, ConformalVerdict};
use crate::sampling::{ResidualSeries, SampleSet, SeriesStats};

/// The Laplacian identity is compared at this multiple of the base tolerance,
/// since it involves third derivatives of the immersion.
pub const LAPLACIAN_TOL_FACTOR: f64 = 10.0;

const NOT_CONFORMAL: &str = "x^T is not conformal on the grid";

fn gate(conformal: &ConformalVerdict) -> Option<Gated<()>> {
    (!conformal.is_conformal).then(|| Gated::skipped(SkipReason::NotConformal, NOT_CONFORMAL))
}

/// max over direction pairs of |R(X,Y)x^T - (Xφ)Y + (Yφ)X|_g / scale.
pub fn curvature_identity_check(set: &SampleSet, conformal: &ConformalVerdict, tol: f64) -> Gated<ResidualSeries> {
    if let Some(Gated::Skipped { reason, note }) = gate(conformal) {
        return Gated::Skipped { reason, note };
    }
    let raw = set.map(|s| {
        let dirs = test_directions(s);
        let xt = &s.split.xt_chart;
        let dphi = &s.fields.dphi;
        let mut worst = 0.0f64;
        for (a, x) in dirs.iter().enumerate() {
            for y in &dirs[a + 1..] {
                let lhs = s.curvature.apply(x, y, xt);
                let (xp, yp) = (dot(dphi, x), dot(dphi, y));
                let rhs: Vec<f64> = y.iter().zip(x).map(|(yk, xk)| xp * yk - yp * xk).collect();
                worst = worst.max(s.frame.chart_norm(&sub(&lhs, &rhs)));
            }
        }
        worst
    });
    Gated::Ran(ResidualSeries::scaled("curvature_identity", "R(X,Y)x^T = (Xφ)Y - (Yφ)X", set, raw, tol))
}

#[derive(Debug, Clone, Serialize)]
pub struct RicciReport {
    /// Ric(x^T,x^T) against n <H, h(x^T,x^T)> - Σ |h(e_i, x^T)|².
    pub gauss_form: ResidualSeries,
    /// Ric(Y, x^T) + (n-1) Yφ over test directions.
    pub conformal_form: Gated<ResidualSeries>,
}

/// Σ_i |h(e_i, x^T)|² over a g-orthonormal frame.
fn sum_h_xt_sq(s: &crate::sampling::Sample) -> f64 {
    (0..s.frame.n)
        .map(|a| s.frame.h_apply(&s.frame.onb_chart(a), &s.split.xt_chart).norm_squared())
        .sum()
}

pub fn ricci_identity_checks(set: &SampleSet, conformal: &ConformalVerdict, tol: f64) -> RicciReport {
    let raw = set.map(|s| {
        let xt = &s.split.xt_chart;
        let n = s.frame.n as f64;
        let h = crate::geometry::mean_curvature(&s.frame);
        let lhs = s.curvature.ricci_apply(xt, xt);
        let rhs = n * h.dot(&s.frame.h_apply(xt, xt)) - sum_h_xt_sq(s);
        (lhs - rhs).abs()
    });
    let gauss_form = ResidualSeries::scaled(
        "ricci_gauss_form",
        "Ric(x^T,x^T) = n g(H, h(x^T,x^T)) - Σ|h(e_i,x^T)|²",
        set,
        raw,
        tol,
    );
    let conformal_form = match gate(conformal) {
        Some(Gated::Skipped { reason, note }) => Gated::Skipped { reason, note },
        _ => {
            let raw = set.map(|s| {
                let n = s.frame.n as f64;
                test_directions(s)
                    .iter()
                    .map(|y| (s.curvature.ricci_apply(y, &s.split.xt_chart) + (n - 1.0) * dot(&s.fields.dphi, y)).abs())
                    .fold(0.0, f64::max)
            });
            Gated::Ran(ResidualSeries::scaled("ricci_conformal_form", "Ric(Y,x^T) = -(n-1) Yφ", set, raw, tol))
        }
    };
    RicciReport {
        gauss_form,
        conformal_form,
    }
}

/// λ with Δx^T = -λ x^T, from a constant β in ∇φ = β x^T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenFit {
    pub lambda: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LaplacianReport {
    /// |Δx^T - ∇φ|_g / scale.
    pub laplacian: ResidualSeries,
    /// Component of ∇φ orthogonal to x^T, where |x^T| > tol scale.
    pub alignment: ResidualSeries,
    /// β = g(∇φ, x^T)/|x^T|² where defined.
    #[serde(skip)]
    pub beta: Vec<Option<f64>>,
    pub beta_stats: SeriesStats,
    pub beta_constant: bool,
    pub eigen: Option<EigenFit>,
}

pub fn laplacian_gradient_check(set: &SampleSet, conformal: &ConformalVerdict, tol: f64) -> Gated<LaplacianReport> {
    if let Some(Gated::Skipped { reason, note }) = gate(conformal) {
        return Gated::Skipped { reason, note };
    }
    let lap = set.map(|s| s.frame.chart_norm(&sub(&s.fields.laplacian_xt, &s.fields.grad_phi)));
    let laplacian = ResidualSeries::scaled("laplacian_gradient", "Δx^T = ∇φ", set, lap, LAPLACIAN_TOL_FACTOR * tol);

    // where x^T vanishes β is undefined and all of ∇φ counts against alignment
    let split: Vec<Option<(Option<f64>, f64)>> = set.map(|s| {
        let xt = &s.split.xt_chart;
        let nt = s.split.xt_norm;
        let grad = &s.fields.grad_phi;
        if nt <= tol * s.scale() {
            return (None, s.frame.chart_norm(grad));
        }
        let beta = s.frame.inner(grad, xt) / (nt * nt);
        let perp: Vec<f64> = grad.iter().zip(xt).map(|(g, x)| g - beta * x).collect();
        (Some(beta), s.frame.chart_norm(&perp))
    });
    let beta: Vec<Option<f64>> = split.iter().map(|p| p.and_then(|p| p.0)).collect();
    let alignment = ResidualSeries::scaled(
        "gradient_alignment",
        "∇φ = β x^T",
        set,
        split.iter().map(|p| p.map(|p| p.1)).collect(),
        tol,
    );
    let beta_stats = SeriesStats::of(&beta);
    let beta_constant = beta_stats.count > 0 && beta_stats.max - beta_stats.min <= tol * (1.0 + beta_stats.mean.abs());
    let eigen = (laplacian.pass && alignment.pass && beta_constant).then(|| {
        let vals: Vec<f64> = beta.iter().flatten().copied().collect();
        let variance = vals.iter().map(|b| (b - beta_stats.mean).powi(2)).sum::<f64>() / vals.len() as f64;
        EigenFit {
            lambda: -beta_stats.mean,
            variance,
        }
    });
    Gated::Ran(LaplacianReport {
        laplacian,
        alignment,
        beta,
        beta_stats,
        beta_constant,
        eigen,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HessianReport {
    /// |∇F - φ x^T|_g / scale with F = ½|x^T|².
    pub gradient: ResidualSeries,
    /// |H_F - φ² g|_g / scale; needs constant φ.
    pub hessian: Gated<ResidualSeries>,
    /// |Hess φ + λ φ g|_g / scale for the fitted eigenvalue.
    pub obata: Option<ResidualSeries>,
}

pub fn hessian_obata_check(
    set: &SampleSet,
    conformal: &ConformalVerdict,
    eigen: Option<&EigenFit>,
    tol: f64,
) -> Gated<HessianReport> {
    if let Some(Gated::Skipped { reason, note }) = gate(conformal) {
        return Gated::Skipped { reason, note };
    }
    let grad = set.map(|s| {
        let f = &s.fields;
        let want: Vec<f64> = s.split.xt_chart.iter().map(|x| f.phi * x).collect();
        s.frame.chart_norm(&sub(&f.grad_half_sq, &want))
    });
    let gradient = ResidualSeries::scaled("half_square_gradient", "∇F = φ x^T", set, grad, tol);

    let hessian = if conformal.phi_spread <= tol {
        let raw = set.map(|s| {
            let g = &s.frame.metric;
            let phi = s.fields.phi;
            orthonormal_form(g, &(&s.fields.hess_half_sq - g * (phi * phi))).norm()
        });
        Gated::Ran(ResidualSeries::scaled("half_square_hessian", "H_F = φ² g", set, raw, tol))
    } else {
        Gated::skipped(SkipReason::NonconstantPhi, "φ varies over the grid")
    };

    let obata = eigen.map(|e| {
        let raw = set.map(|s| {
            let g = &s.frame.metric;
            let target: DMatrix<f64> = &s.fields.hess_phi + g * (e.lambda * s.fields.phi);
            orthonormal_form(g, &target).norm()
        });
        ResidualSeries::scaled("obata", "Hess φ + λ φ g = 0", set, raw, tol)
    });
    Gated::Ran(HessianReport {
        gradient,
        hessian,
        obata,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RicciHypothesisReport {
    /// Ric(x^T,x^T) + (n/2)[x^T φ + |H|² (x^T f)] per point.
    #[serde(skip)]
    pub expression: Vec<Option<f64>>,
    pub expression_stats: SeriesStats,
    /// |x^Tφ + |H|²(x^T f) + (2/n)Ric(x^T,x^T) + (2/n)Σ|h(e_i,x^T)|²| / scale.
    pub identity: ResidualSeries,
    /// Points where H vanishes; the |H|² (x^T f) term is taken as zero there.
    pub h_vanishing: Vec<usize>,
}

pub fn ricci_hypothesis_check(set: &SampleSet, self_similar: &SelfSimilarReport, tol: f64) -> Gated<RicciHypothesisReport> {
    if !self_similar.is_generalized_self_similar {
        return Gated::skipped(SkipReason::MissingPrereq, "not a generalized self-similar submanifold");
    }
    let per_point = set.map(|s| {
        let xt = &s.split.xt_chart;
        let n = s.frame.n as f64;
        let f = &s.fields;
        let xt_phi = dot(&f.dphi, xt);
        let xt_f = f.ss_factor.as_ref().map_or(0.0, |(_, df)| dot(df, xt));
        let hh = if f.ss_factor.is_some() { f.mean_curvature_sq } else { 0.0 };
        let ric = s.curvature.ricci_apply(xt, xt);
        let lhs = xt_phi + hh * xt_f + 2.0 / n * ric;
        let rhs = -2.0 / n * sum_h_xt_sq(s);
        let expression = ric + n / 2.0 * (xt_phi + hh * xt_f);
        (expression, (lhs - rhs).abs())
    });
    let expression: Vec<Option<f64>> = per_point.iter().map(|p| p.map(|p| p.0)).collect();
    let identity = ResidualSeries::scaled(
        "self_similar_ricci_identity",
        "x^Tφ + |H|²(x^T f) + (2/n)Ric(x^T,x^T) = -(2/n)Σ|h(e_i,x^T)|²",
        set,
        per_point.iter().map(|p| p.map(|p| p.1)).collect(),
        tol,
    );
    Gated::Ran(RicciHypothesisReport {
        expression_stats: SeriesStats::of(&expression),
        expression,
        identity,
        h_vanishing: self_similar.h_vanishing.clone(),
    })
}

/// All identity checks for one sample set.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityLedger {
    pub curvature: Gated<ResidualSeries>,
    pub ricci: RicciReport,
    pub laplacian: Gated<LaplacianReport>,
    pub hessian: Gated<HessianReport>,
    pub self_similar_identity: Gated<RicciHypothesisReport>,
}

impl IdentityLedger {
    /// Every residual series that ran, in a fixed order.
    pub fn entries(&self) -> Vec<&ResidualSeries> {
        let mut out = Vec::new();
        out.extend(self.curvature.ran());
        out.push(&self.ricci.gauss_form);
        out.extend(self.ricci.conformal_form.ran());
        if let Some(l) = self.laplacian.ran() {
            out.push(&l.laplacian);
            out.push(&l.alignment);
        }
        if let Some(h) = self.hessian.ran() {
            out.push(&h.gradient);
            out.extend(h.hessian.ran());
            out.extend(h.obata.as_ref());
        }
        out.extend(self.self_similar_identity.ran().map(|t| &t.identity));
        out
    }
}

pub fn identity_suite(set: &SampleSet, self_similar: &SelfSimilarReport, tol: f64) -> IdentityLedger {
    let conformal = conformality_of_set(set, tol);
    let laplacian = laplacian_gradient_check(set, &conformal, tol);
    let eigen = laplacian.ran().and_then(|l| l.eigen);
    IdentityLedger {
        curvature: curvature_identity_check(set, &conformal, tol),
        ricci: ricci_identity_checks(set, &conformal, tol),
        hessian: hessian_obata_check(set, &conformal, eigen.as_ref(), tol),
        laplacian,
        self_similar_identity: ricci_hypothesis_check(set, self_similar, tol),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::applications::fixtures::{off_center, set_of, sphere};
    use crate::applications::self_similar_check;

    const TOL: f64 = 1e-8;

    fn ledger(set: &SampleSet) -> IdentityLedger {
        identity_suite(set, &self_similar_check(set, TOL), TOL)
    }

    #[test]
    fn off_center_sphere_identities() {
        let set = off_center();
        let l = ledger(&set);
        let curv = l.curvature.ran().unwrap();
        assert!(curv.pass && curv.stats.count == set.len());
        assert!(l.ricci.gauss_form.pass);
        assert!(l.ricci.conformal_form.ran().unwrap().pass);
        let lap = l.laplacian.ran().unwrap();
        assert!(lap.laplacian.pass && lap.alignment.pass);
        // ∇φ = -x^T / r² on a sphere of radius r about any center
        assert!((lap.beta_stats.mean + 1.0).abs() < 1e-12);
        let eig = lap.eigen.unwrap();
        assert!((eig.lambda - 1.0).abs() < 1e-12);
        let hess = l.hessian.ran().unwrap();
        assert!(hess.gradient.pass);
        assert_eq!(hess.hessian.skip_reason(), Some(SkipReason::NonconstantPhi));
        assert!(hess.obata.as_ref().unwrap().pass);
        let t = l.self_similar_identity.ran().unwrap();
        assert!(t.identity.pass);
        assert!(t.expression_stats.max < 0.0, "negative at generic points");
    }

    #[test]
    fn off_center_sphere_beta_scales_with_radius() {
        let set = set_of("sphere", &[("r", 2.0.into()), ("center", vec![0.5, 0.2, 0.0].into())]);
        let lap = ledger(&set).laplacian.ran().cloned().unwrap();
        assert!((lap.beta_stats.mean + 0.25).abs() < 1e-12);
        assert!((lap.eigen.unwrap().lambda - 0.25).abs() < 1e-12);
    }

    #[test]
    fn plane_through_origin_identities() {
        let l = ledger(&set_of("subspace", &[]));
        let hess = l.hessian.ran().unwrap();
        let hf = hess.hessian.ran().unwrap();
        assert!(hf.max() <= 1e-10);
        assert!(hess.gradient.max() <= 1e-12);
        let lap = l.laplacian.ran().unwrap();
        assert!(lap.laplacian.max() < 1e-12);
        assert_eq!(lap.eigen.unwrap().lambda, 0.0);
        assert!(l.self_similar_identity.ran().unwrap().identity.max() < 1e-14);
    }

    #[test]
    fn offset_plane_hessian() {
        let l = ledger(&set_of("plane_offset", &[("c", 1.0.into())]));
        assert!(l.hessian.ran().unwrap().hessian.ran().unwrap().max() <= 1e-10);
        assert_eq!(l.self_similar_identity.skip_reason(), Some(SkipReason::MissingPrereq));
    }

    #[test]
    fn origin_sphere_is_all_zero() {
        let l = ledger(&sphere(1.0));
        for e in l.entries() {
            assert!(e.max() < 1e-12, "{}: {}", e.name, e.max());
        }
        let lap = l.laplacian.ran().unwrap();
        assert_eq!(lap.beta_stats.count, 0);
        assert!(lap.eigen.is_none());
    }

    #[test]
    fn gates_fire_on_negatives() {
        for name in ["cylinder", "torus"] {
            let l = ledger(&set_of(name, &[]));
            assert_eq!(l.curvature.skip_reason(), Some(SkipReason::NotConformal));
            assert_eq!(l.ricci.conformal_form.skip_reason(), Some(SkipReason::NotConformal));
            assert_eq!(l.laplacian.skip_reason(), Some(SkipReason::NotConformal));
            assert_eq!(l.hessian.skip_reason(), Some(SkipReason::NotConformal));
            // unconditional checks still run
            assert!(l.ricci.gauss_form.pass, "{name}");
            assert!(l.self_similar_identity.ran().unwrap().identity.pass, "{name}");
        }
    }

    #[test]
    fn cylinder_ricci_both_sides_vanish() {
        let set = set_of("cylinder", &[]);
        for s in set.valid() {
            let xt = &s.split.xt_chart;
            assert!(s.curvature.ricci_apply(xt, xt).abs() < 1e-14);
            assert!(s.frame.h_apply(&s.frame.onb_chart(0), xt).norm() < 1e-14);
        }
    }
}
