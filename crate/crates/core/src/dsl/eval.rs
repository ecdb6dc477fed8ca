use std::sync::Arc;

use serde::Serialize;

use super::ast::{Expr, Func, ImmersionSpec};
use super::jet::{Jet, JetFault, Layout, MAX_ORDER};
use super::DslError;

fn eval_expr(e: &Expr, vars: &[Jet], layout: &Arc<Layout>) -> Result<Jet, JetFault> {
    Ok(match e {
        Expr::Const(c) => Jet::constant(layout, *c),
        Expr::Param { value, .. } => Jet::constant(layout, *value),
        Expr::Var(i) => vars[*i].clone(),
        Expr::Neg(a) => -eval_expr(a, vars, layout)?,
        Expr::Add(a, b) => eval_expr(a, vars, layout)? + eval_expr(b, vars, layout)?,
        Expr::Sub(a, b) => eval_expr(a, vars, layout)? - eval_expr(b, vars, layout)?,
        Expr::Mul(a, b) => eval_expr(a, vars, layout)? * eval_expr(b, vars, layout)?,
        Expr::Div(a, b) => eval_expr(a, vars, layout)?.div(&eval_expr(b, vars, layout)?)?,
        Expr::Pow(a, b) => eval_expr(a, vars, layout)?.pow(&eval_expr(b, vars, layout)?)?,
        Expr::Call(f, a) => {
            let x = eval_expr(a, vars, layout)?;
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Sqrt => x.sqrt()?,
            }
        }
    })
}

fn check_point(spec: &ImmersionSpec, u: &[f64]) -> Result<(), DslError> {
    if u.len() != spec.n {
        return Err(DslError::DimensionMismatch(format!(
            "chart point has {} coordinates, immersion has n={}",
            u.len(),
            spec.n
        )));
    }
    for (axis, (&v, iv)) in u.iter().zip(&spec.domain).enumerate() {
        if !iv.contains(v) {
            return Err(DslError::Domain { axis: axis + 1, value: v, lo: iv.lo, hi: iv.hi });
        }
    }
    Ok(())
}

/// Taylor expansions of every ambient component at `u`, truncated at `order` (≤ 4).
pub fn eval_taylor(spec: &ImmersionSpec, u: &[f64], order: usize) -> Result<Vec<Jet>, DslError> {
    if order > MAX_ORDER {
        return Err(DslError::Order(order));
    }
    check_point(spec, u)?;
    let layout = Layout::shared(spec.n, order);
    let vars: Vec<Jet> = u.iter().enumerate().map(|(i, &v)| Jet::variable(&layout, i, v)).collect();
    spec.components
        .iter()
        .enumerate()
        .map(|(k, e)| eval_expr(e, &vars, &layout).map_err(|fault| DslError::Eval { component: k + 1, fault }))
        .collect()
}

/// Ambient position and chart partials up to third order at one chart point.
///
/// Orders above the requested one are filled with NaN and reported absent by
/// the accessors. Second and third partials are read from a single Taylor
/// coefficient per multi-index, so they are symmetric bit for bit.
#[derive(Debug, Clone, Serialize)]
pub struct JetPoint {
    pub n: usize,
    pub m: usize,
    pub order: usize,
    pub u: Vec<f64>,
    pub f: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    d3: Vec<f64>,
}

impl JetPoint {
    pub fn from_taylor(u: &[f64], jets: &[Jet], order: usize) -> JetPoint {
        let n = u.len();
        let m = jets.len();
        let order = order.min(3);
        let mut d1 = vec![f64::NAN; m * n];
        let mut d2 = vec![f64::NAN; m * n * n];
        let mut d3 = vec![f64::NAN; m * n * n * n];
        for (k, jet) in jets.iter().enumerate() {
            for i in 0..n {
                if order >= 1 {
                    d1[k * n + i] = jet.partial_along(&[i]).unwrap_or(f64::NAN);
                }
                for j in 0..n {
                    if order >= 2 {
                        d2[(k * n + i) * n + j] = jet.partial_along(&[i, j]).unwrap_or(f64::NAN);
                    }
                    for l in 0..n {
                        if order >= 3 {
                            d3[((k * n + i) * n + j) * n + l] = jet.partial_along(&[i, j, l]).unwrap_or(f64::NAN);
                        }
                    }
                }
            }
        }
        JetPoint {
            n,
            m,
            order,
            u: u.to_vec(),
            f: jets.iter().map(Jet::value).collect(),
            d1,
            d2,
            d3,
        }
    }

    /// Builds a jet point from explicit arrays (e.g. finite-difference estimates).
    pub fn from_parts(u: Vec<f64>, f: Vec<f64>, d1: Vec<f64>, d2: Option<Vec<f64>>) -> JetPoint {
        let n = u.len();
        let m = f.len();
        assert_eq!(d1.len(), m * n);
        let order = if d2.is_some() { 2 } else { 1 };
        let d2 = d2.unwrap_or_else(|| vec![f64::NAN; m * n * n]);
        assert_eq!(d2.len(), m * n * n);
        JetPoint {
            n,
            m,
            order,
            u,
            f,
            d1,
            d2,
            d3: vec![f64::NAN; m * n * n * n],
        }
    }

    pub fn has_order(&self, k: usize) -> bool {
        k <= self.order
    }

    /// ∂f_k/∂u_i
    pub fn d1(&self, k: usize, i: usize) -> f64 {
        self.d1[k * self.n + i]
    }

    pub fn d2(&self, k: usize, i: usize, j: usize) -> f64 {
        self.d2[(k * self.n + i) * self.n + j]
    }

    pub fn d3(&self, k: usize, i: usize, j: usize, l: usize) -> f64 {
        self.d3[((k * self.n + i) * self.n + j) * self.n + l]
    }

    /// Ambient tangent vector ∂f/∂u_i.
    pub fn tangent(&self, i: usize) -> Vec<f64> {
        (0..self.m).map(|k| self.d1(k, i)).collect()
    }

    /// Ambient vector ∂²f/∂u_i∂u_j.
    pub fn second(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.m).map(|k| self.d2(k, i, j)).collect()
    }

    pub fn third(&self, i: usize, j: usize, l: usize) -> Vec<f64> {
        (0..self.m).map(|k| self.d3(k, i, j, l)).collect()
    }

    /// Dimensionless magnitude `1 + |x| + |d1| + |d2|` used to scale tolerances.
    pub fn scale(&self) -> f64 {
        let norm = |v: &[f64]| v.iter().filter(|x| x.is_finite()).map(|x| x * x).sum::<f64>().sqrt();
        1.0 + norm(&self.f) + norm(&self.d1) + norm(&self.d2)
    }
}

/// Evaluates the immersion and its partials up to `order` (1, 2 or 3) at `u`.
pub fn eval_jet(spec: &ImmersionSpec, u: &[f64], order: usize) -> Result<JetPoint, DslError> {
    if !(1..=3).contains(&order) {
        return Err(DslError::Order(order));
    }
    let jets = eval_taylor(spec, u, order)?;
    Ok(JetPoint::from_taylor(u, &jets, order))
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    #[test]
    fn sphere_at_origin_chart_point() {
        let s = parse("dim 2 -> 3; x1 = cos(u1)*cos(u2); x2 = sin(u1)*cos(u2); x3 = sin(u2);").unwrap();
        let j = eval_jet(&s, &[0.0, 0.0], 2).unwrap();
        assert_eq!(j.f, vec![1.0, 0.0, 0.0]);
        assert_eq!(j.tangent(0), vec![-0.0, 1.0, 0.0]);
        assert_eq!(j.tangent(1), vec![-0.0, 0.0, 1.0]);
        assert!(!j.has_order(3));
        assert!(j.d3(0, 0, 0, 0).is_nan());
    }

    #[test]
    fn helix_partials() {
        let s = parse("dim 1 -> 3; x1 = cos(u1); x2 = sin(u1); x3 = u1;").unwrap();
        let j = eval_jet(&s, &[0.0], 3).unwrap();
        assert_eq!(j.f, vec![1.0, 0.0, 0.0]);
        assert_eq!(j.tangent(0), vec![0.0, 1.0, 1.0]);
        assert_eq!(j.second(0, 0), vec![-1.0, 0.0, 0.0]);
        assert_eq!(j.third(0, 0, 0), vec![0.0, -1.0, 0.0]);
    }

    #[test]
    fn plane_has_no_curvature_terms() {
        let s = parse("dim 2 -> 3; domain u1 in [-5,5]; domain u2 in [-5,5]; x1 = u1; x2 = u2; x3 = 0;").unwrap();
        let j = eval_jet(&s, &[1.3, -4.2], 3).unwrap();
        for k in 0..3 {
            for i in 0..2 {
                for l in 0..2 {
                    assert_eq!(j.d2(k, i, l), 0.0);
                    for q in 0..2 {
                        assert_eq!(j.d3(k, i, l, q), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn domain_and_eval_errors() {
        let s = parse("dim 1 -> 2; x1 = 1/u1; x2 = sqrt(u1 - 0.5);").unwrap();
        assert!(matches!(eval_jet(&s, &[2.0], 1), Err(DslError::Domain { axis: 1, .. })));
        assert!(matches!(
            eval_jet(&s, &[0.0], 1),
            Err(DslError::Eval { component: 1, fault: JetFault::DivisionByZero })
        ));
        assert!(matches!(
            eval_jet(&s, &[0.25], 1),
            Err(DslError::Eval { component: 2, fault: JetFault::SqrtOfNegative(_) })
        ));
        let p = parse("dim 1 -> 2; x1 = (u1 - 1)^0.5; x2 = u1;").unwrap();
        assert!(matches!(
            eval_jet(&p, &[0.0], 1),
            Err(DslError::Eval { fault: JetFault::NonIntegerPowerOfNegative { .. }, .. })
        ));
        assert!(matches!(eval_jet(&p, &[0.0], 4), Err(DslError::Order(4))));
    }

    #[test]
    fn symmetric_partials_are_bit_identical() {
        let s = parse("dim 2 -> 3; x1 = exp(u1*u2)*sin(u2); x2 = u1^3*u2; x3 = sqrt(2 + u1*u2^2);").unwrap();
        let j = eval_jet(&s, &[0.3, -0.7], 3).unwrap();
        for k in 0..3 {
            assert_eq!(j.d2(k, 0, 1).to_bits(), j.d2(k, 1, 0).to_bits());
            assert_eq!(j.d3(k, 0, 0, 1).to_bits(), j.d3(k, 1, 0, 0).to_bits());
            assert_eq!(j.d3(k, 0, 1, 0).to_bits(), j.d3(k, 1, 0, 0).to_bits());
        }
    }
}
