use serde::Serialize;

use crate::sampling::{ResidualSeries, SampleSet};

/// Whether x^N/|x^N| is parallel in the normal bundle.
///
/// Since D_Z x^N = -h(x^T, Z), the unit field ν = x^N/|x^N| is parallel exactly
/// when h(x^T, Z) stays along ν. The residual is the component of
/// h(x^T, Z)/|x^N| orthogonal to ν, maximized over an orthonormal frame and
/// the seeded random directions.
#[derive(Debug, Clone, Serialize)]
pub struct ParallelNormalReport {
    pub is_parallel: bool,
    pub residual: ResidualSeries,
    /// Grid indices where |x^N| ≤ tol (1 + |x|); excluded from the residual.
    pub vanishing: Vec<usize>,
}

pub fn parallel_normal_direction_test(set: &SampleSet, tol: f64) -> ParallelNormalReport {
    let mut vanishing = Vec::new();
    let values: Vec<Option<f64>> = set
        .samples
        .iter()
        .map(|s| {
            let s = s.as_ref()?;
            let split = &s.split;
            if split.xn_norm <= tol * (1.0 + split.x.norm()) {
                vanishing.push(s.index);
                return None;
            }
            let nu = &split.xn / split.xn_norm;
            let frame_dirs = (0..s.frame.n).map(|a| s.frame.onb_chart(a));
            let worst = frame_dirs
                .chain(s.directions.iter().cloned())
                .map(|z| {
                    let w = s.frame.h_apply(&split.xt_chart, &z) / split.xn_norm;
                    let along = w.dot(&nu);
                    (w - &nu * along).norm()
                })
                .fold(0.0, f64::max);
            Some(worst)
        })
        .collect();
    let residual = ResidualSeries::new("normal_direction_transport", "D_Z (x^N/|x^N|) = 0", values, tol, false);
    ParallelNormalReport {
        is_parallel: residual.pass && residual.stats.count > 0,
        residual,
        vanishing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::tests::{off_center, set_of};
    use crate::canonical::DEFAULT_TOL;

    #[test]
    fn hypersurfaces_and_flat_cases_are_parallel() {
        for set in [set_of("plane_offset", &[("c", 1.0.into())]), off_center(), set_of("torus", &[]), set_of("clifford_torus", &[])] {
            let r = parallel_normal_direction_test(&set, DEFAULT_TOL);
            assert!(r.is_parallel, "{}", set.spec.print());
            assert!(r.vanishing.is_empty());
        }
    }

    #[test]
    fn plane_through_origin_has_no_normal_part() {
        let set = set_of("subspace", &[]);
        let r = parallel_normal_direction_test(&set, DEFAULT_TOL);
        assert_eq!(r.vanishing.len(), set.len());
        assert!(!r.is_parallel);
    }

    #[test]
    fn helix_normal_direction_turns() {
        let r = parallel_normal_direction_test(&set_of("helix", &[]), DEFAULT_TOL);
        assert!(!r.is_parallel);
        assert!(r.residual.max() > 1e-3);
    }
}
