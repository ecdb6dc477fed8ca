use nalgebra::DMatrix;

use super::GeometryFrame;

/// Intrinsic curvature obtained from the second fundamental form.
#[derive(Debug, Clone)]
pub struct CurvaturePack {
    pub n: usize,
    /// R_ijkl at `((i * n + j) * n + k) * n + l`.
    pub riemann: Vec<f64>,
    pub ricci: DMatrix<f64>,
    pub scalar: f64,
    /// Weyl tensor, same layout as `riemann`; only for n ≥ 4.
    pub weyl: Option<Vec<f64>>,
    metric: DMatrix<f64>,
    metric_inv: DMatrix<f64>,
}

fn idx(n: usize, i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * n + j) * n + k) * n + l
}

/// Gauss equation: R_ijkl = <h_il, h_jk> - <h_ik, h_jl>.
pub fn curvature(frame: &GeometryFrame) -> CurvaturePack {
    let n = frame.n;
    let gram = DMatrix::from_fn(n * n, n * n, |a, b| frame.h(a / n, a % n).dot(frame.h(b / n, b % n)));
    let hh = |a: usize, b: usize, c: usize, d: usize| gram[(a * n + b, c * n + d)];

    let mut riemann = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    riemann[idx(n, i, j, k, l)] = hh(i, l, j, k) - hh(i, k, j, l);
                }
            }
        }
    }

    let ginv = &frame.metric_inv;
    let ricci = DMatrix::from_fn(n, n, |j, k| {
        let mut s = 0.0;
        for i in 0..n {
            for l in 0..n {
                s += ginv[(i, l)] * riemann[idx(n, i, j, k, l)];
            }
        }
        s
    });
    let scalar = (0..n)
        .flat_map(|j| (0..n).map(move |k| (j, k)))
        .map(|(j, k)| ginv[(j, k)] * ricci[(j, k)])
        .sum();

    let weyl = (n >= 4).then(|| weyl_tensor(n, &riemann, &ricci, scalar, &frame.metric));

    CurvaturePack {
        n,
        riemann,
        ricci,
        scalar,
        weyl,
        metric: frame.metric.clone(),
        metric_inv: frame.metric_inv.clone(),
    }
}

fn weyl_tensor(n: usize, riemann: &[f64], ricci: &DMatrix<f64>, scalar: f64, g: &DMatrix<f64>) -> Vec<f64> {
    // Kulkarni–Nomizu pairing matched to R_ijkl = K (g_il g_jk - g_ik g_jl) for constant curvature K.
    let kn = |a: &DMatrix<f64>, b: &DMatrix<f64>, i: usize, j: usize, k: usize, l: usize| {
        a[(i, l)] * b[(j, k)] + a[(j, k)] * b[(i, l)] - a[(i, k)] * b[(j, l)] - a[(j, l)] * b[(i, k)]
    };
    let nf = n as f64;
    let c1 = 1.0 / (nf - 2.0);
    let c2 = scalar / (2.0 * (nf - 1.0) * (nf - 2.0));
    let mut w = vec![0.0; riemann.len()];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let p = idx(n, i, j, k, l);
                    w[p] = riemann[p] - c1 * kn(ricci, g, i, j, k, l) + c2 * kn(g, g, i, j, k, l);
                }
            }
        }
    }
    w
}

impl CurvaturePack {
    pub fn r(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.riemann[idx(self.n, i, j, k, l)]
    }

    /// Chart components of R(X, Y)Z.
    pub fn apply(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut lowered = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let w = x[i] * y[j] * z[k];
                    if w == 0.0 {
                        continue;
                    }
                    for (l, slot) in lowered.iter_mut().enumerate() {
                        *slot += w * self.r(i, j, k, l);
                    }
                }
            }
        }
        (0..n)
            .map(|a| (0..n).map(|l| self.metric_inv[(a, l)] * lowered[l]).sum())
            .collect()
    }

    /// Ric(Y, Z).
    pub fn ricci_apply(&self, y: &[f64], z: &[f64]) -> f64 {
        let mut s = 0.0;
        for j in 0..self.n {
            for k in 0..self.n {
                s += self.ricci[(j, k)] * y[j] * z[k];
            }
        }
        s
    }

    /// Max violation of R_ijkl = -R_jikl = -R_ijlk = R_klij.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let r = self.r(i, j, k, l);
                        worst = worst
                            .max((r + self.r(j, i, k, l)).abs())
                            .max((r + self.r(i, j, l, k)).abs())
                            .max((r - self.r(k, l, i, j)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Max |R_ijkl + R_jkil + R_kijl| (first Bianchi identity).
    pub fn bianchi_residual(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let s = self.r(i, j, k, l) + self.r(j, k, i, l) + self.r(k, i, j, l);
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    /// Max over all single traces of the Weyl tensor; None below dimension 4.
    pub fn weyl_trace_residual(&self) -> Option<f64> {
        let w = self.weyl.as_ref()?;
        let n = self.n;
        let mut worst = 0.0f64;
        // traces over (i,l), (i,k), (j,k): the others follow from the symmetries
        for a in 0..n {
            for b in 0..n {
                let (mut t1, mut t2, mut t3) = (0.0, 0.0, 0.0);
                for p in 0..n {
                    for q in 0..n {
                        let g = self.metric_inv[(p, q)];
                        t1 += g * w[idx(n, p, a, b, q)];
                        t2 += g * w[idx(n, p, a, q, b)];
                        t3 += g * w[idx(n, a, p, q, b)];
                    }
                }
                worst = worst.max(t1.abs()).max(t2.abs()).max(t3.abs());
            }
        }
        Some(worst)
    }

    /// Norm of the Weyl tensor in a g-orthonormal frame.
    pub fn weyl_norm(&self) -> Option<f64> {
        let w = self.weyl.as_ref()?;
        Some(tensor4_norm(self.n, w, &self.metric_inv))
    }

    pub fn riemann_norm(&self) -> f64 {
        tensor4_norm(self.n, &self.riemann, &self.metric_inv)
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }
}

/// sqrt(T_ijkl T^ijkl) with indices raised by g^{-1}.
fn tensor4_norm(n: usize, t: &[f64], ginv: &DMatrix<f64>) -> f64 {
    // raise one index at a time
    let raise = |src: &[f64], slot: usize| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let target = [i, j, k, l];
                        let mut s = 0.0;
                        for p in 0..n {
                            let mut source = target;
                            source[slot] = p;
                            s += ginv[(target[slot], p)] * src[idx(n, source[0], source[1], source[2], source[3])];
                        }
                        out[idx(n, i, j, k, l)] = s;
                    }
                }
            }
        }
        out
    };
    let mut up = t.to_vec();
    for slot in 0..4 {
        up = raise(&up, slot);
    }
    t.iter().zip(&up).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{catalog, catalog_defaults, eval_jet, ParamValue};
    use crate::geometry::build_frame;

    fn frame_of(name: &str, overrides: &[(&str, ParamValue)], u: &[f64]) -> GeometryFrame {
        let mut p = catalog_defaults(name).unwrap();
        for (k, v) in overrides {
            p.insert(k.to_string(), v.clone());
        }
        let s = catalog(name, &p).unwrap();
        build_frame(&eval_jet(&s, u, 2).unwrap()).unwrap()
    }

    #[test]
    fn unit_sphere_scalar_curvature_is_two() {
        let c = curvature(&frame_of("sphere", &[], &[0.4, 0.9]));
        assert!((c.scalar - 2.0).abs() < 1e-12);
        // Ric = g for the unit 2-sphere
        assert!((&c.ricci - c.metric()).norm() < 1e-12);
        assert!(c.weyl.is_none());
    }

    #[test]
    fn flat_examples() {
        for name in ["cylinder", "clifford_torus", "subspace"] {
            let c = curvature(&frame_of(name, &[], &[0.3, 0.2]));
            assert!(c.scalar.abs() < 1e-14, "{name}: {}", c.scalar);
            assert!(c.ricci.norm() < 1e-14);
        }
    }

    #[test]
    fn symmetries_on_generic_surface() {
        let c = curvature(&frame_of("torus", &[], &[0.3, 1.2]));
        assert!(c.symmetry_residual() < 1e-14);
        assert!(c.bianchi_residual() < 1e-14);
    }

    #[test]
    fn round_four_sphere_is_conformally_flat() {
        let f = frame_of(
            "sphere",
            &[("n", 4.0.into()), ("r", 2.0.into()), ("center", vec![0.0; 5].into())],
            &[0.2, 0.1, -0.3, 0.4],
        );
        let c = curvature(&f);
        assert!((c.scalar - 4.0 * 3.0 / 4.0).abs() < 1e-12);
        assert!(c.weyl_norm().unwrap() < 1e-12);
        assert!(c.weyl_trace_residual().unwrap() < 1e-12);
    }

    #[test]
    fn generic_graph_has_weyl_curvature() {
        let c = curvature(&frame_of("graph4", &[], &[0.1, -0.2, 0.15, 0.05]));
        assert!(c.weyl_norm().unwrap() > 1e-3);
        assert!(c.weyl_trace_residual().unwrap() < 1e-12);
        assert!(c.symmetry_residual() < 1e-13);
        assert!(c.bianchi_residual() < 1e-13);
    }
}
