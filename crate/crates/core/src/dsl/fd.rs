//! Central finite-difference jets, used only to cross-check the exact ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{eval_jet, DslError, ImmersionSpec, JetPoint};

pub const FD_STEP: f64 = 1e-5;

fn shifted(u: &[f64], axis: usize, h: f64) -> Vec<f64> {
    let mut v = u.to_vec();
    v[axis] += h;
    v
}

/// First partials by central differences of f, second partials by central
/// differences of the exact first partials (symmetrized).
pub fn fd_jet(spec: &ImmersionSpec, u: &[f64], step: f64) -> Result<JetPoint, DslError> {
    let (n, m) = (spec.n, spec.m);
    let center = eval_jet(spec, u, 1)?;
    let mut d1 = vec![0.0; m * n];
    let mut d2 = vec![0.0; m * n * n];
    for j in 0..n {
        let plus = eval_jet(spec, &shifted(u, j, step), 1)?;
        let minus = eval_jet(spec, &shifted(u, j, -step), 1)?;
        for k in 0..m {
            d1[k * n + j] = (plus.f[k] - minus.f[k]) / (2.0 * step);
            for i in 0..n {
                d2[(k * n + i) * n + j] = (plus.d1(k, i) - minus.d1(k, i)) / (2.0 * step);
            }
        }
    }
    for k in 0..m {
        for i in 0..n {
            for j in 0..i {
                let a = (k * n + i) * n + j;
                let b = (k * n + j) * n + i;
                let avg = 0.5 * (d2[a] + d2[b]);
                d2[a] = avg;
                d2[b] = avg;
            }
        }
    }
    Ok(JetPoint::from_parts(u.to_vec(), center.f, d1, Some(d2)))
}

/// Relative discrepancy of first and second partials between exact and
/// finite-difference jets, each measured against max(1, |exact|).
pub fn fd_discrepancy(spec: &ImmersionSpec, u: &[f64], step: f64) -> Result<(f64, f64), DslError> {
    let exact = eval_jet(spec, u, 2)?;
    let approx = fd_jet(spec, u, step)?;
    let (n, m) = (spec.n, spec.m);
    let (mut e1, mut n1, mut e2, mut n2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..m {
        for i in 0..n {
            e1 = e1.max((exact.d1(k, i) - approx.d1(k, i)).abs());
            n1 = n1.max(exact.d1(k, i).abs());
            for j in 0..n {
                e2 = e2.max((exact.d2(k, i, j) - approx.d2(k, i, j)).abs());
                n2 = n2.max(exact.d2(k, i, j).abs());
            }
        }
    }
    Ok((e1 / n1.max(1.0), e2 / n2.max(1.0)))
}

/// Uniform random chart points at least `margin` inside the domain box.
pub fn random_interior_points(spec: &ImmersionSpec, count: usize, margin: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            spec.domain
                .iter()
                .map(|iv| rng.random_range(iv.lo + margin..iv.hi - margin))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{catalog, catalog_defaults, parse};

    #[test]
    fn fd_matches_exact_on_helix() {
        let s = catalog("helix", &catalog_defaults("helix").unwrap()).unwrap();
        let (r1, r2) = fd_discrepancy(&s, &[0.3], FD_STEP).unwrap();
        assert!(r1 < 1e-8 && r2 < 1e-8, "{r1} {r2}");
    }

    #[test]
    fn fd_error_shrinks_with_step() {
        let s = parse("dim 1 -> 2; x1 = exp(u1); x2 = sin(3*u1);").unwrap();
        let coarse = fd_discrepancy(&s, &[0.2], 1e-2).unwrap().0;
        let fine = fd_discrepancy(&s, &[0.2], 1e-3).unwrap().0;
        // second-order scheme: a tenfold smaller step cuts the error about a hundredfold
        assert!(coarse / fine > 50.0, "{coarse} {fine}");
    }

    #[test]
    fn points_respect_margin() {
        let s = catalog("torus", &catalog_defaults("torus").unwrap()).unwrap();
        for p in random_interior_points(&s, 50, 0.1, 9) {
            for (v, iv) in p.iter().zip(&s.domain) {
                assert!(*v >= iv.lo + 0.1 && *v < iv.hi - 0.1);
            }
        }
    }
}
