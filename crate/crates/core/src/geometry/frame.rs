use nalgebra::{DMatrix, DVector};

use super::taylor::TaylorGeometry;
use super::GeometryError;
use crate::dsl::JetPoint;

/// Relative singular value below which a chart point is not an immersion point.
pub const RANK_TOLERANCE: f64 = 1e-8;

/// Tangent-space data and the second fundamental form at one chart point.
#[derive(Debug, Clone)]
pub struct GeometryFrame {
    pub n: usize,
    pub m: usize,
    pub position: DVector<f64>,
    /// m×n, column i is ∂f/∂u_i.
    pub tangent_basis: DMatrix<f64>,
    pub metric: DMatrix<f64>,
    pub metric_inv: DMatrix<f64>,
    pub onb_tangent: Vec<DVector<f64>>,
    pub onb_normal: Vec<DVector<f64>>,
    /// Ambient second partials ∂²f/∂u_i∂u_j, row-major in (i, j).
    second: Vec<DVector<f64>>,
    /// Ambient-valued second fundamental form h_ij, row-major in (i, j).
    sff: Vec<DVector<f64>>,
    /// Γ^k_ij stored at `(k * n + i) * n + j`.
    christoffel: Vec<f64>,
    /// `1 + |x| + |d1| + |d2|` at the point.
    pub scale: f64,
}

impl GeometryFrame {
    pub fn h(&self, i: usize, j: usize) -> &DVector<f64> {
        &self.sff[i * self.n + j]
    }

    pub fn second(&self, i: usize, j: usize) -> &DVector<f64> {
        &self.second[i * self.n + j]
    }

    pub fn christoffel(&self, k: usize, i: usize, j: usize) -> f64 {
        self.christoffel[(k * self.n + i) * self.n + j]
    }

    pub fn tangent(&self, i: usize) -> DVector<f64> {
        self.tangent_basis.column(i).into_owned()
    }

    /// h(X, Y) for chart vectors X, Y.
    pub fn h_apply(&self, x: &[f64], y: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for i in 0..self.n {
            for j in 0..self.n {
                let w = x[i] * y[j];
                if w != 0.0 {
                    out.axpy(w, self.h(i, j), 1.0);
                }
            }
        }
        out
    }

    /// g(X, Y) for chart vectors.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.metric[(i, j)] * x[i] * y[j];
            }
        }
        s
    }

    pub fn chart_norm(&self, x: &[f64]) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }

    /// Ambient image T·x of a chart vector.
    pub fn to_ambient(&self, x: &[f64]) -> DVector<f64> {
        &self.tangent_basis * DVector::from_column_slice(x)
    }

    /// Chart components of the tangential part of an ambient vector.
    pub fn to_chart(&self, v: &DVector<f64>) -> Vec<f64> {
        let rhs = self.tangent_basis.transpose() * v;
        (&self.metric_inv * rhs).iter().copied().collect()
    }

    pub fn tangential_part(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for e in &self.onb_tangent {
            out.axpy(e.dot(v), e, 1.0);
        }
        out
    }

    pub fn normal_part(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for xi in &self.onb_normal {
            out.axpy(xi.dot(v), xi, 1.0);
        }
        out
    }

    /// Chart components of the orthonormal tangent vector `e_a`.
    pub fn onb_chart(&self, a: usize) -> Vec<f64> {
        self.to_chart(&self.onb_tangent[a])
    }

    /// Max deviation of the tangent+normal frame from an orthonormal basis of E^m.
    pub fn frame_defect(&self) -> f64 {
        let all: Vec<&DVector<f64>> = self.onb_tangent.iter().chain(&self.onb_normal).collect();
        let mut worst = 0.0f64;
        for (a, u) in all.iter().enumerate() {
            for (b, v) in all.iter().enumerate() {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((u.dot(v) - target).abs());
            }
        }
        if all.len() != self.m {
            return f64::INFINITY;
        }
        worst
    }

    /// max_ij |d2_ij - Γ^k_ij ∂_k f - h_ij|: the tangential/normal split of second partials.
    pub fn gauss_formula_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                let mut r = self.second(i, j) - self.h(i, j);
                for k in 0..self.n {
                    r.axpy(-self.christoffel(k, i, j), &self.tangent_basis.column(k).into_owned(), 1.0);
                }
                worst = worst.max(r.norm());
            }
        }
        worst
    }

    /// max over pairs of |<h_ij, ∂_k f>|: h must be normal.
    pub fn sff_tangential_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for h in &self.sff {
            for k in 0..self.n {
                worst = worst.max(h.dot(&self.tangent_basis.column(k)).abs());
            }
        }
        worst
    }
}

/// Modified Gram–Schmidt with column pivoting; returns an orthonormal basis of
/// the column span, taken in order of decreasing residual norm.
fn pivoted_gram_schmidt(columns: &[DVector<f64>], against: &[DVector<f64>], count: usize) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = against.to_vec();
    let mut remaining: Vec<DVector<f64>> = columns.to_vec();
    let mut out = Vec::with_capacity(count);
    while out.len() < count && !remaining.is_empty() {
        for r in remaining.iter_mut() {
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dot(r);
                    r.axpy(-c, q, 1.0);
                }
            }
        }
        let (best, _) = remaining
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.norm()))
            .fold((0, -1.0), |acc, (i, nrm)| if nrm > acc.1 { (i, nrm) } else { acc });
        let v = remaining.swap_remove(best);
        let mut q = v.clone();
        // one more pass keeps the new vector orthogonal to full precision
        for b in &basis {
            let c = b.dot(&q);
            q.axpy(-c, b, 1.0);
        }
        let nrm = q.norm();
        if nrm == 0.0 {
            break;
        }
        q /= nrm;
        basis.push(q.clone());
        out.push(q);
    }
    out
}

/// Builds metric, frames, Christoffel symbols and the second fundamental form.
pub fn build_frame(jet: &JetPoint) -> Result<GeometryFrame, GeometryError> {
    if !jet.has_order(2) {
        return Err(GeometryError::OrderTooLow { needed: 2, have: jet.order });
    }
    let (n, m) = (jet.n, jet.m);
    let t = DMatrix::from_fn(m, n, |k, i| jet.d1(k, i));

    let sv = t.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if smax <= 0.0 || smin < RANK_TOLERANCE * smax {
        return Err(GeometryError::RankDeficient {
            ratio: if smax > 0.0 { smin / smax } else { 0.0 },
        });
    }

    let metric = {
        let g = t.transpose() * &t;
        (&g + g.transpose()) * 0.5
    };
    let metric_inv = {
        let inv = metric
            .clone()
            .cholesky()
            .ok_or(GeometryError::RankDeficient { ratio: 0.0 })?
            .inverse();
        (&inv + inv.transpose()) * 0.5
    };

    let columns: Vec<DVector<f64>> = (0..n).map(|i| t.column(i).into_owned()).collect();
    let onb_tangent = pivoted_gram_schmidt(&columns, &[], n);
    let ambient: Vec<DVector<f64>> = (0..m)
        .map(|k| {
            let mut e = DVector::zeros(m);
            e[k] = 1.0;
            e
        })
        .collect();
    let onb_normal = pivoted_gram_schmidt(&ambient, &onb_tangent, m - n);

    let mut second = vec![DVector::zeros(m); n * n];
    let mut sff = vec![DVector::zeros(m); n * n];
    let mut christoffel = vec![0.0; n * n * n];
    for i in 0..n {
        for j in i..n {
            let d2 = jet.second(i, j);
            let d2 = DVector::from_vec(d2);
            let mut h = DVector::zeros(m);
            for xi in &onb_normal {
                h.axpy(xi.dot(&d2), xi, 1.0);
            }
            let lowered: Vec<f64> = (0..n).map(|l| d2.dot(&t.column(l))).collect();
            for k in 0..n {
                let g: f64 = (0..n).map(|l| metric_inv[(k, l)] * lowered[l]).sum();
                christoffel[(k * n + i) * n + j] = g;
                christoffel[(k * n + j) * n + i] = g;
            }
            second[i * n + j] = d2.clone();
            second[j * n + i] = d2;
            sff[i * n + j] = h.clone();
            sff[j * n + i] = h;
        }
    }

    Ok(GeometryFrame {
        n,
        m,
        position: DVector::from_column_slice(&jet.f),
        tangent_basis: t,
        metric,
        metric_inv,
        onb_tangent,
        onb_normal,
        second,
        sff,
        christoffel,
        scale: jet.scale(),
    })
}

/// The decomposition x = x^T + x^N at a point.
#[derive(Debug, Clone)]
pub struct PositionSplit {
    pub x: DVector<f64>,
    pub xt: DVector<f64>,
    pub xt_chart: Vec<f64>,
    pub xn: DVector<f64>,
    pub xt_norm: f64,
    pub xn_norm: f64,
}

impl PositionSplit {
    /// |x - x^T - x^N| and |<x^T, x^N>|.
    pub fn residuals(&self) -> (f64, f64) {
        ((&self.x - &self.xt - &self.xn).norm(), self.xt.dot(&self.xn).abs())
    }
}

pub fn position_split(jet: &JetPoint, frame: &GeometryFrame) -> PositionSplit {
    let x = DVector::from_column_slice(&jet.f);
    let xt = frame.tangential_part(&x);
    let xn = &x - &xt;
    let xt_chart = frame.to_chart(&x);
    PositionSplit {
        xt_norm: xt.norm(),
        xn_norm: xn.norm(),
        x,
        xt,
        xt_chart,
        xn,
    }
}

/// Shape operator A_ξ as a chart endomorphism: (A_ξ)^k_j = g^{ki} <h_ij, ξ>.
pub fn shape_operator(frame: &GeometryFrame, xi: &DVector<f64>) -> Result<DMatrix<f64>, GeometryError> {
    let tangential = frame.tangential_part(xi).norm();
    if tangential > 1e-8 * xi.norm() {
        return Err(GeometryError::NotNormal { residual: tangential });
    }
    Ok(shape_operator_unchecked(frame, xi))
}

pub(crate) fn shape_operator_unchecked(frame: &GeometryFrame, xi: &DVector<f64>) -> DMatrix<f64> {
    let n = frame.n;
    let paired = DMatrix::from_fn(n, n, |i, j| frame.h(i, j).dot(xi));
    &frame.metric_inv * paired
}

/// H = (1/n) g^{ij} h_ij.
pub fn mean_curvature(frame: &GeometryFrame) -> DVector<f64> {
    let mut h = DVector::zeros(frame.m);
    for i in 0..frame.n {
        for j in 0..frame.n {
            h.axpy(frame.metric_inv[(i, j)], frame.h(i, j), 1.0);
        }
    }
    h / frame.n as f64
}

/// D_Z x^N by two routes.
#[derive(Debug, Clone)]
pub struct NormalDerivative {
    /// -h(x^T, Z).
    pub from_sff: DVector<f64>,
    /// Normal part of the exact derivative of the x^N field along Z.
    pub from_jet: DVector<f64>,
    pub agreement: f64,
}

/// Normal-connection derivative of x^N along the chart direction `z`.
///
/// The first route assembles `-h(x^T, Z)`; the second rebuilds x^N as a Taylor
/// field from the third-order jet, differentiates it, and projects to the
/// normal space.
pub fn normal_derivative_xn(
    jet: &JetPoint,
    frame: &GeometryFrame,
    split: &PositionSplit,
    z: &[f64],
) -> Result<NormalDerivative, GeometryError> {
    let from_sff = -frame.h_apply(&split.xt_chart, z);
    if !jet.has_order(3) {
        return Err(GeometryError::OrderTooLow { needed: 3, have: jet.order });
    }
    let taylor = TaylorGeometry::from_jet_point(jet)?;
    let xn = taylor.normal_part_field(&taylor.x);
    let mut dz = DVector::zeros(frame.m);
    for (k, comp) in xn.iter().enumerate() {
        dz[k] = (0..frame.n).map(|i| z[i] * comp.derivative(i).value()).sum();
    }
    let from_jet = frame.normal_part(&dz);
    let agreement = (&from_sff - &from_jet).norm();
    Ok(NormalDerivative { from_sff, from_jet, agreement })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{catalog, eval_jet, parse, ParamValue, Params};

    fn sphere(center: [f64; 3]) -> crate::dsl::ImmersionSpec {
        let mut p = Params::new();
        p.insert("r".into(), ParamValue::Scalar(1.0));
        p.insert("center".into(), ParamValue::Vector(center.to_vec()));
        catalog("sphere", &p).unwrap()
    }

    fn close(a: &DVector<f64>, b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn unit_sphere_frame_at_chart_origin() {
        let jet = eval_jet(&sphere([0.0; 3]), &[0.0, 0.0], 2).unwrap();
        let f = build_frame(&jet).unwrap();
        assert!((f.metric.clone() - DMatrix::identity(2, 2)).norm() < 1e-15);
        assert_eq!(f.onb_normal.len(), 1);
        assert!(f.onb_normal[0][0].abs() > 1.0 - 1e-15);
        assert!(close(f.h(0, 0), &[-1.0, 0.0, 0.0], 1e-15));
        assert!(close(f.h(1, 1), &[-1.0, 0.0, 0.0], 1e-15));
        assert!(f.h(0, 1).norm() < 1e-15);
    }

    #[test]
    fn plane_is_totally_geodesic() {
        let s = parse("dim 2 -> 3; x1 = u1; x2 = u2; x3 = 0;").unwrap();
        let f = build_frame(&eval_jet(&s, &[0.4, -0.3], 2).unwrap()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(f.h(i, j).norm(), 0.0);
                for k in 0..2 {
                    assert_eq!(f.christoffel(k, i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn cylinder_sff() {
        let s = parse("dim 2 -> 3; x1 = cos(u1); x2 = sin(u1); x3 = u2;").unwrap();
        let f = build_frame(&eval_jet(&s, &[0.0, 0.0], 2).unwrap()).unwrap();
        assert!((f.metric.clone() - DMatrix::identity(2, 2)).norm() < 1e-15);
        assert!(close(f.h(0, 0), &[-1.0, 0.0, 0.0], 1e-15));
        assert!(f.h(0, 1).norm() < 1e-15 && f.h(1, 1).norm() < 1e-15);
    }

    #[test]
    fn rank_deficient_point() {
        // u1 -> u1^3 has a vanishing derivative at 0
        let s = parse("dim 2 -> 3; x1 = u1^3; x2 = u2; x3 = 0;").unwrap();
        let err = build_frame(&eval_jet(&s, &[0.0, 0.1], 2).unwrap()).unwrap_err();
        assert!(matches!(err, GeometryError::RankDeficient { .. }));
        let err = build_frame(&eval_jet(&s, &[0.5, 0.1], 1).unwrap()).unwrap_err();
        assert!(matches!(err, GeometryError::OrderTooLow { needed: 2, have: 1 }));
    }

    #[test]
    fn position_splits() {
        let origin = sphere([0.0; 3]);
        let jet = eval_jet(&origin, &[0.3, 0.2], 2).unwrap();
        let f = build_frame(&jet).unwrap();
        let s = position_split(&jet, &f);
        assert!(s.xt_norm < 1e-15);
        assert!((&s.xn - &s.x).norm() < 1e-15);

        let plane = parse("dim 2 -> 3; x1 = u1; x2 = u2; x3 = 0;").unwrap();
        let jet = eval_jet(&plane, &[0.5, 0.7], 2).unwrap();
        let s = position_split(&jet, &build_frame(&jet).unwrap());
        assert!(s.xn_norm < 1e-15);
        assert!(close(&s.xt, &[0.5, 0.7, 0.0], 1e-15));

        let offset = parse("dim 2 -> 3; domain u1 in [-3, 3]; x1 = u1; x2 = u2; x3 = 1;").unwrap();
        let jet = eval_jet(&offset, &[2.0, 0.0], 2).unwrap();
        let s = position_split(&jet, &build_frame(&jet).unwrap());
        assert!(close(&s.xt, &[2.0, 0.0, 0.0], 1e-15));
        assert!(close(&s.xn, &[0.0, 0.0, 1.0], 1e-15));
        assert_eq!(s.xt_chart, vec![2.0, 0.0]);
    }

    #[test]
    fn shape_operators() {
        let jet = eval_jet(&sphere([0.0; 3]), &[0.7, -0.4], 2).unwrap();
        let f = build_frame(&jet).unwrap();
        let a = shape_operator(&f, &f.position).unwrap();
        assert!((a + DMatrix::identity(2, 2)).norm() < 1e-14);
        let tangent = f.tangent(0);
        assert!(matches!(shape_operator(&f, &tangent), Err(GeometryError::NotNormal { .. })));

        let cyl = parse("dim 2 -> 3; x1 = cos(u1); x2 = sin(u1); x3 = u2;").unwrap();
        let u1: f64 = 0.9;
        let f = build_frame(&eval_jet(&cyl, &[u1, 0.3], 2).unwrap()).unwrap();
        let xi = DVector::from_vec(vec![u1.cos(), u1.sin(), 0.0]);
        let a = shape_operator(&f, &xi).unwrap();
        assert!((a - DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 0.0]))).norm() < 1e-14);
    }

    #[test]
    fn mean_curvature_of_spheres() {
        for r in [0.5, 1.0, 2.0] {
            let mut p = Params::new();
            p.insert("r".into(), ParamValue::Scalar(r));
            let s = catalog("sphere", &p).unwrap();
            let jet = eval_jet(&s, &[1.1, 0.6], 2).unwrap();
            let f = build_frame(&jet).unwrap();
            let h = mean_curvature(&f);
            let expect = -&f.position / (r * r);
            assert!((h - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn normal_derivative_routes_agree_on_off_center_sphere() {
        let s = sphere([0.5, 0.0, 0.0]);
        let jet = eval_jet(&s, &[0.8, 0.3], 3).unwrap();
        let f = build_frame(&jet).unwrap();
        let split = position_split(&jet, &f);
        for z in [[1.0, 0.0], [0.0, 1.0], [0.6, -0.8]] {
            let d = normal_derivative_xn(&jet, &f, &split, &z).unwrap();
            assert!(d.from_sff.norm() > 1e-3);
            assert!(d.agreement <= 1e-8 * f.scale, "agreement {}", d.agreement);
        }
        let origin = sphere([0.0; 3]);
        let jet = eval_jet(&origin, &[0.8, 0.3], 3).unwrap();
        let f = build_frame(&jet).unwrap();
        let split = position_split(&jet, &f);
        let d = normal_derivative_xn(&jet, &f, &split, &[1.0, 1.0]).unwrap();
        assert!(d.from_sff.norm() < 1e-15 && d.from_jet.norm() < 1e-13);
    }

    #[test]
    fn frames_are_complete_and_orthonormal() {
        let s = parse("dim 2 -> 5; x1 = u1; x2 = u2; x3 = u1*u2; x4 = sin(u1); x5 = exp(u2);").unwrap();
        let f = build_frame(&eval_jet(&s, &[0.2, -0.1], 2).unwrap()).unwrap();
        assert_eq!(f.onb_normal.len(), 3);
        assert!(f.frame_defect() <= 1e-12);
        assert!(f.gauss_formula_residual() <= 1e-10 * f.scale);
        assert!(f.sff_tangential_residual() <= 1e-10 * f.scale);
    }
}
