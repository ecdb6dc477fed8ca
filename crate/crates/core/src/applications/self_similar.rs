use serde::Serialize;

use crate::canonical::{conformality_of_set, umbilicity_test, NormalRef, UmbilicVerdict, VANISHING_TOL};
use crate::geometry::mean_curvature;
use crate::sampling::{ResidualSeries, SampleSet, SeriesStats};

/// Whether x^N = f H (generalized self-similar) and H = -x^N (self-shrinker).
#[derive(Debug, Clone, Serialize)]
pub struct SelfSimilarReport {
    /// f = <x^N, H>/|H|², absent where H vanishes.
    pub f_per_point: Vec<Option<f64>>,
    pub f_stats: SeriesStats,
    /// |x^N - f H| / scale; equals |x^N| / scale where H vanishes.
    pub colinearity: ResidualSeries,
    /// |H + x^N| / scale.
    pub shrinker: ResidualSeries,
    pub is_generalized_self_similar: bool,
    pub is_self_shrinker: bool,
    /// Grid indices where H vanishes.
    pub h_vanishing: Vec<usize>,
    /// Grid indices where both H and x^N vanish, so x^N = f H holds for any f.
    pub vacuous: Vec<usize>,
    /// Umbilicity with respect to H, computed when the submanifold is generalized self-similar.
    pub pseudo_umbilic: Option<UmbilicVerdict>,
    /// Conformal x^T ⇔ pseudo-umbilical, evaluated on the whole grid.
    pub pseudo_umbilic_biconditional: Option<bool>,
}

pub fn self_similar_check(set: &SampleSet, tol: f64) -> SelfSimilarReport {
    let mut h_vanishing = Vec::new();
    let mut vacuous = Vec::new();
    let per_point = set.map(|s| {
        let h = mean_curvature(&s.frame);
        let xn = &s.split.xn;
        let shrink = (&h + xn).norm();
        let tiny = VANISHING_TOL * s.scale();
        if h.norm() <= tiny {
            return (None, xn.norm(), shrink, true, xn.norm() <= tiny);
        }
        let f = xn.dot(&h) / h.norm_squared();
        (Some(f), (xn - &h * f).norm(), shrink, false, false)
    });
    for (i, p) in per_point.iter().enumerate() {
        if let Some(p) = p {
            if p.3 {
                h_vanishing.push(i);
            }
            if p.4 {
                vacuous.push(i);
            }
        }
    }
    let f_per_point: Vec<Option<f64>> = per_point.iter().map(|p| p.and_then(|p| p.0)).collect();
    let colinearity = ResidualSeries::scaled(
        "self_similar_colinearity",
        "x^N = f H",
        set,
        per_point.iter().map(|p| p.map(|p| p.1)).collect(),
        tol,
    );
    let shrinker = ResidualSeries::scaled(
        "self_shrinker",
        "H = -x^N",
        set,
        per_point.iter().map(|p| p.map(|p| p.2)).collect(),
        tol,
    );
    let is_gss = colinearity.pass && colinearity.stats.count > 0;
    let (pseudo_umbilic, biconditional) = if is_gss {
        let pu = umbilicity_test(set, &NormalRef::MeanCurvature, tol);
        let conformal = conformality_of_set(set, tol);
        let agree = conformal.is_conformal == pu.is_umbilical;
        (Some(pu), Some(agree))
    } else {
        (None, None)
    };
    SelfSimilarReport {
        f_stats: SeriesStats::of(&f_per_point),
        f_per_point,
        is_self_shrinker: shrinker.pass && shrinker.stats.count > 0,
        colinearity,
        shrinker,
        is_generalized_self_similar: is_gss,
        h_vanishing,
        vacuous,
        pseudo_umbilic,
        pseudo_umbilic_biconditional: biconditional,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::applications::fixtures::{off_center, set_of, sphere};

    #[test]
    fn sphere_family_factor_and_shrinker() {
        for r in [0.5, 1.0, 2.0] {
            let rep = self_similar_check(&sphere(r), 1e-8);
            assert!(rep.is_generalized_self_similar);
            for f in rep.f_per_point.iter().flatten() {
                assert!((f + r * r).abs() < 1e-10);
            }
            assert_eq!(rep.is_self_shrinker, r == 1.0, "r={r}");
            if r == 1.0 {
                assert!(rep.shrinker.max() < 1e-10);
            } else {
                // |H + x| = |1 - 1/r²| r, divided by the scale
                assert!(rep.shrinker.stats.min > 1e-2);
            }
            assert_eq!(rep.pseudo_umbilic_biconditional, Some(true));
        }
    }

    #[test]
    fn hypersurfaces_are_self_similar_where_h_is_nonzero() {
        for set in [set_of("cylinder", &[]), set_of("torus", &[]), off_center(), set_of("circle", &[])] {
            let rep = self_similar_check(&set, 1e-8);
            assert!(rep.is_generalized_self_similar, "{}", set.spec.print());
            assert!(rep.h_vanishing.is_empty());
        }
    }

    #[test]
    fn cylinder_pseudo_umbilic_biconditional() {
        let rep = self_similar_check(&set_of("cylinder", &[]), 1e-8);
        let pu = rep.pseudo_umbilic.as_ref().unwrap();
        assert!(!pu.is_umbilical);
        assert_eq!(rep.pseudo_umbilic_biconditional, Some(true));
    }

    #[test]
    fn plane_through_origin_is_vacuous() {
        let set = set_of("subspace", &[]);
        let rep = self_similar_check(&set, 1e-8);
        assert_eq!(rep.h_vanishing.len(), set.len());
        assert_eq!(rep.vacuous.len(), set.len());
        assert!(rep.f_per_point.iter().all(Option::is_none));
        assert!(rep.is_generalized_self_similar);
    }

    #[test]
    fn offset_plane_is_not_self_similar() {
        let rep = self_similar_check(&set_of("plane_offset", &[("c", 1.0.into())]), 1e-8);
        assert!(!rep.is_generalized_self_similar);
        assert!(rep.vacuous.is_empty());
    }

    #[test]
    fn helix_is_not_self_similar() {
        assert!(!self_similar_check(&set_of("helix", &[]), 1e-8).is_generalized_self_similar);
    }
}
