use nalgebra::{DMatrix, DVector};

use super::GeometryError;
use crate::dsl::jet::dot;
use crate::dsl::{eval_taylor, ImmersionSpec, Jet, JetPoint, Layout};

/// Geometry of the immersion as Taylor fields around a chart point.
///
/// If the immersion is expanded to order K, tangents and the metric are valid
/// to order K-1 and everything built from second partials (Γ, h, H, the
/// potential of x^T) to order K-2.
#[derive(Debug, Clone)]
pub struct TaylorGeometry {
    pub n: usize,
    pub m: usize,
    pub x: Vec<Jet>,
    /// `tangent[i][k]` = ∂x_k/∂u_i.
    pub tangent: Vec<Vec<Jet>>,
    pub metric: Vec<Vec<Jet>>,
    pub metric_inv: Vec<Vec<Jet>>,
    /// `christoffel[k][i][j]` = Γ^k_ij.
    pub christoffel: Vec<Vec<Vec<Jet>>>,
    /// `sff[i][j][k]`: ambient component k of h_ij.
    pub sff: Vec<Vec<Vec<Jet>>>,
    /// Chart components v^k of x^T.
    pub xt_chart: Vec<Jet>,
    pub xn: Vec<Jet>,
    pub mean_curvature: Vec<Jet>,
}

fn invert(a: &[Vec<Jet>]) -> Result<Vec<Vec<Jet>>, GeometryError> {
    let n = a.len();
    let layout = a[0][0].layout().clone();
    let mut lhs: Vec<Vec<Jet>> = a.to_vec();
    let mut inv: Vec<Vec<Jet>> = (0..n)
        .map(|i| (0..n).map(|j| Jet::constant(&layout, if i == j { 1.0 } else { 0.0 })).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| lhs[r][col].value().abs().total_cmp(&lhs[s][col].value().abs()))
            .unwrap();
        lhs.swap(col, pivot);
        inv.swap(col, pivot);
        let p = lhs[col][col].recip().map_err(|_| GeometryError::SingularMetric)?;
        for j in 0..n {
            lhs[col][j] = &lhs[col][j] * &p;
            inv[col][j] = &inv[col][j] * &p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = lhs[r][col].clone();
            for j in 0..n {
                lhs[r][j] = &lhs[r][j] - &(&factor * &lhs[col][j]);
                inv[r][j] = &inv[r][j] - &(&factor * &inv[col][j]);
            }
        }
    }
    // symmetrize
    let sym = (0..n)
        .map(|i| (0..n).map(|j| (&inv[i][j] + &inv[j][i]).scale(0.5)).collect())
        .collect();
    Ok(sym)
}

fn axpy(acc: &mut [Jet], a: &Jet, x: &[Jet]) {
    for (s, xi) in acc.iter_mut().zip(x) {
        *s = &*s + &(a * xi);
    }
}

impl TaylorGeometry {
    pub fn new(x: Vec<Jet>) -> Result<TaylorGeometry, GeometryError> {
        let layout = x[0].layout().clone();
        let order = x.iter().map(Jet::order).min().unwrap_or(0);
        if order < 2 {
            return Err(GeometryError::OrderTooLow { needed: 2, have: order });
        }
        let n = layout.nvars();
        let m = x.len();
        let zero = Jet::zero(&layout);

        let tangent: Vec<Vec<Jet>> = (0..n).map(|i| x.iter().map(|c| c.derivative(i)).collect()).collect();
        let mut metric = vec![vec![zero.clone(); n]; n];
        for i in 0..n {
            for j in i..n {
                let g = dot(&tangent[i], &tangent[j]);
                metric[j][i] = g.clone();
                metric[i][j] = g;
            }
        }
        let metric_inv = invert(&metric)?;

        let mut christoffel = vec![vec![vec![zero.clone(); n]; n]; n];
        let mut sff = vec![vec![vec![zero.clone(); m]; n]; n];
        for i in 0..n {
            for j in i..n {
                let second: Vec<Jet> = tangent[i].iter().map(|t| t.derivative(j)).collect();
                let lowered: Vec<Jet> = (0..n).map(|l| dot(&second, &tangent[l])).collect();
                let mut h = second.clone();
                for k in 0..n {
                    let gamma = dot(&metric_inv[k], &lowered);
                    axpy(&mut h, &(-&gamma), &tangent[k]);
                    christoffel[k][j][i] = gamma.clone();
                    christoffel[k][i][j] = gamma;
                }
                sff[j][i] = h.clone();
                sff[i][j] = h;
            }
        }

        let lowered_x: Vec<Jet> = (0..n).map(|l| dot(&x, &tangent[l])).collect();
        let xt_chart: Vec<Jet> = (0..n).map(|k| dot(&metric_inv[k], &lowered_x)).collect();
        let mut xn = x.clone();
        for k in 0..n {
            axpy(&mut xn, &(-&xt_chart[k]), &tangent[k]);
        }

        let mut mean_curvature = vec![zero.clone(); m];
        for i in 0..n {
            for j in 0..n {
                axpy(&mut mean_curvature, &metric_inv[i][j], &sff[i][j]);
            }
        }
        let inv_n = 1.0 / n as f64;
        let mean_curvature = mean_curvature.iter().map(|c| c.scale(inv_n)).collect();

        Ok(TaylorGeometry {
            n,
            m,
            x,
            tangent,
            metric,
            metric_inv,
            christoffel,
            sff,
            xt_chart,
            xn,
            mean_curvature,
        })
    }

    /// Rebuilds Taylor fields from the partials stored in a jet point.
    pub fn from_jet_point(jet: &JetPoint) -> Result<TaylorGeometry, GeometryError> {
        let layout = Layout::shared(jet.n, jet.order);
        let comps = (0..jet.m)
            .map(|k| {
                let mut coeffs = vec![0.0; layout.len()];
                for (idx, c) in coeffs.iter_mut().enumerate() {
                    let e = layout.exponents(idx);
                    let vars: Vec<usize> = e.iter().enumerate().flat_map(|(v, &p)| std::iter::repeat_n(v, p as usize)).collect();
                    let factorial: f64 = e.iter().map(|&p| (1..=p as u32).map(f64::from).product::<f64>()).product();
                    let value = match vars.as_slice() {
                        [] => jet.f[k],
                        [i] => jet.d1(k, *i),
                        [i, j] => jet.d2(k, *i, *j),
                        [i, j, l] => jet.d3(k, *i, *j, *l),
                        _ => unreachable!("jet points stop at third order"),
                    };
                    *c = value / factorial;
                }
                Jet::from_coeffs(&layout, jet.order, coeffs)
            })
            .collect();
        TaylorGeometry::new(comps)
    }

    pub fn from_spec(spec: &ImmersionSpec, u: &[f64], order: usize) -> Result<TaylorGeometry, GeometryError> {
        TaylorGeometry::new(eval_taylor(spec, u, order)?)
    }

    /// Normal projection of an ambient field.
    pub fn normal_part_field(&self, v: &[Jet]) -> Vec<Jet> {
        let lowered: Vec<Jet> = (0..self.n).map(|l| dot(v, &self.tangent[l])).collect();
        let mut out = v.to_vec();
        for k in 0..self.n {
            let c = dot(&self.metric_inv[k], &lowered);
            axpy(&mut out, &(-&c), &self.tangent[k]);
        }
        out
    }

    /// x^T as an ambient field.
    pub fn xt_ambient(&self) -> Vec<Jet> {
        let mut out = vec![Jet::zero(self.x[0].layout()); self.m];
        for k in 0..self.n {
            axpy(&mut out, &self.xt_chart[k], &self.tangent[k]);
        }
        out
    }

    /// Potential φ of x^T: trace(g^{-1} L_{x^T} g) / 2n = 1 + <H, x^N>.
    pub fn potential(&self) -> Jet {
        self.umbilic_factor_xn().add_scalar(1.0)
    }

    /// η = trace(g^{-1} <h, x^N>) / n = <H, x^N>.
    pub fn umbilic_factor_xn(&self) -> Jet {
        dot(&self.mean_curvature, &self.xn)
    }

    pub fn mean_curvature_sq(&self) -> Jet {
        dot(&self.mean_curvature, &self.mean_curvature)
    }

    /// f with x^N = f H, by projection onto H; None where H vanishes.
    pub fn self_similar_factor(&self) -> Option<Jet> {
        let hh = self.mean_curvature_sq();
        if hh.value() == 0.0 {
            return None;
        }
        dot(&self.xn, &self.mean_curvature).div(&hh).ok()
    }

    /// F = |x^T|² / 2.
    pub fn half_norm_xt_sq(&self) -> Jet {
        let xt = self.xt_ambient();
        dot(&xt, &xt).scale(0.5)
    }

    /// `nabla[j][k]` = (∇_j x^T)^k = ∂_j v^k + Γ^k_jl v^l.
    pub fn covariant_xt(&self) -> Vec<Vec<Jet>> {
        (0..self.n)
            .map(|j| {
                (0..self.n)
                    .map(|k| {
                        let mut acc = self.xt_chart[k].derivative(j);
                        for l in 0..self.n {
                            acc = &acc + &(&self.christoffel[k][j][l] * &self.xt_chart[l]);
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    /// Rough Laplacian g^{ij} (∇²x^T)(∂_i, ∂_j) in chart components.
    pub fn laplacian_xt_chart(&self) -> Result<Vec<f64>, GeometryError> {
        let have = self.christoffel[0][0][0].order();
        if have < 1 {
            return Err(GeometryError::OrderTooLow { needed: 3, have: have + 2 });
        }
        let n = self.n;
        let nabla = self.covariant_xt();
        let mut out = vec![0.0; n];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let mut second = nabla[j][k].derivative(i).value();
                    for l in 0..n {
                        second += self.christoffel[k][i][l].value() * nabla[j][l].value();
                        second -= self.christoffel[l][i][j].value() * nabla[l][k].value();
                    }
                    s += self.metric_inv[i][j].value() * second;
                }
            }
            *slot = s;
        }
        Ok(out)
    }

    /// ∂_l s at the base point.
    pub fn differential(&self, s: &Jet) -> Vec<f64> {
        (0..self.n).map(|l| s.derivative(l).value()).collect()
    }

    /// Chart components of grad s.
    pub fn gradient(&self, s: &Jet) -> Vec<f64> {
        let ds = self.differential(s);
        (0..self.n)
            .map(|k| (0..self.n).map(|l| self.metric_inv[k][l].value() * ds[l]).sum())
            .collect()
    }

    /// Covariant Hessian ∂_i∂_j s - Γ^k_ij ∂_k s.
    pub fn hessian(&self, s: &Jet) -> Result<DMatrix<f64>, GeometryError> {
        if s.order() < 2 {
            return Err(GeometryError::OrderTooLow { needed: 2, have: s.order() });
        }
        let ds = self.differential(s);
        Ok(DMatrix::from_fn(self.n, self.n, |i, j| {
            let mut v = s.partial_along(&[i, j]).unwrap();
            for (k, dk) in ds.iter().enumerate() {
                v -= self.christoffel[k][i][j].value() * dk;
            }
            v
        }))
    }

    pub fn metric_value(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.metric[i][j].value())
    }

    pub fn tangent_value(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.m, self.n, |k, i| self.tangent[i][k].value())
    }

    /// Ambient vector from chart components at the base point.
    pub fn to_ambient(&self, chart: &[f64]) -> DVector<f64> {
        self.tangent_value() * DVector::from_column_slice(chart)
    }
}

/// Δx^T at `u` as an ambient vector (rough Laplacian, exact third-order jets).
pub fn laplacian_xt(spec: &ImmersionSpec, u: &[f64]) -> Result<DVector<f64>, GeometryError> {
    let geo = TaylorGeometry::from_spec(spec, u, 3)?;
    let chart = geo.laplacian_xt_chart()?;
    Ok(geo.to_ambient(&chart))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{catalog, eval_jet, parse, ParamValue, Params};

    fn off_center() -> ImmersionSpec {
        let mut p = Params::new();
        p.insert("r".into(), ParamValue::Scalar(1.0));
        p.insert("center".into(), ParamValue::Vector(vec![0.5, 0.0, 0.0]));
        catalog("sphere", &p).unwrap()
    }

    #[test]
    fn rebuilt_jets_match_direct_evaluation() {
        let s = off_center();
        let u = [0.4, -0.2];
        let direct = TaylorGeometry::from_spec(&s, &u, 3).unwrap();
        let rebuilt = TaylorGeometry::from_jet_point(&eval_jet(&s, &u, 3).unwrap()).unwrap();
        let a = direct.potential();
        let b = rebuilt.potential();
        assert!((a.value() - b.value()).abs() < 1e-14);
        for (x, y) in direct.differential(&a).iter().zip(rebuilt.differential(&b)) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn off_center_sphere_potential_closed_form() {
        let s = off_center();
        for u in [[0.0, 0.0], [std::f64::consts::PI, 0.0], [1.0, 0.5]] {
            let geo = TaylorGeometry::from_spec(&s, &u, 2).unwrap();
            let x: Vec<f64> = geo.x.iter().map(Jet::value).collect();
            let expect = 1.0 - (x[0] * (x[0] - 0.5) + x[1] * x[1] + x[2] * x[2]);
            assert!((geo.potential().value() - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn laplacian_vanishes_on_plane_and_origin_sphere() {
        let plane = parse("dim 2 -> 3; x1 = u1; x2 = u2; x3 = 0;").unwrap();
        assert!(laplacian_xt(&plane, &[0.3, 0.4]).unwrap().norm() < 1e-15);
        let mut p = Params::new();
        p.insert("r".into(), ParamValue::Scalar(1.0));
        let sphere = catalog("sphere", &p).unwrap();
        assert!(laplacian_xt(&sphere, &[0.3, 0.4]).unwrap().norm() < 1e-13);
    }

    #[test]
    fn laplacian_needs_third_order() {
        let s = off_center();
        let geo = TaylorGeometry::from_spec(&s, &[0.1, 0.1], 2).unwrap();
        assert!(matches!(geo.laplacian_xt_chart(), Err(GeometryError::OrderTooLow { .. })));
    }

    #[test]
    fn hessian_of_half_square_on_plane() {
        let plane = parse("dim 2 -> 3; x1 = u1; x2 = u2; x3 = 0;").unwrap();
        let geo = TaylorGeometry::from_spec(&plane, &[0.3, -0.6], 3).unwrap();
        let f = geo.half_norm_xt_sq();
        let hess = geo.hessian(&f).unwrap();
        assert!((hess - DMatrix::identity(2, 2)).norm() < 1e-15);
        assert_eq!(geo.gradient(&f), vec![0.3, -0.6]);
    }
}
