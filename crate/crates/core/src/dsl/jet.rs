//! Truncated multivariate Taylor polynomials ("jets").
//!
//! A [`Jet`] in `n` variables carries the Taylor coefficients of a smooth
//! function around a base point up to a fixed total degree. Arithmetic is
//! forward-mode and exact up to floating point: there is no step size and no
//! truncation error below the jet order.
//!
//! Coefficients follow the Taylor convention `f(u + d) = sum_a c_a d^a`, so the
//! partial derivative for multi-index `a` is `a! * c_a`.
//!
//! Every jet records the degree up to which its coefficients are meaningful.
//! Differentiation lowers it by one and binary operations take the minimum, so
//! quantities built from derivatives of the immersion carry an honest order.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

/// Highest total degree supported by the jet engine.
pub const MAX_ORDER: usize = 4;

/// Monomial bookkeeping shared by all jets with the same variable count and order.
pub struct Layout {
    nvars: usize,
    order: usize,
    exponents: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// (a, b, c): monomial a times monomial b is monomial c.
    products: Vec<(u32, u32, u32)>,
    /// For each variable: (target, source, factor) with d/du_i of source feeding target.
    derivatives: Vec<Vec<(u32, u32, f64)>>,
}

impl Layout {
    fn build(nvars: usize, order: usize) -> Layout {
        let mut exponents: Vec<Vec<u8>> = Vec::new();
        for deg in 0..=order {
            let mut cur = vec![0u8; nvars];
            enumerate_degree(nvars, deg, 0, &mut cur, &mut exponents);
        }
        let degree: Vec<usize> = exponents
            .iter()
            .map(|e| e.iter().map(|&x| x as usize).sum())
            .collect();
        let index: HashMap<Vec<u8>, usize> = exponents
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();

        let mut products = Vec::new();
        for (a, ea) in exponents.iter().enumerate() {
            for (b, eb) in exponents.iter().enumerate() {
                if degree[a] + degree[b] > order {
                    continue;
                }
                let ec: Vec<u8> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                products.push((a as u32, b as u32, index[&ec] as u32));
            }
        }

        let mut derivatives = vec![Vec::new(); nvars];
        for (var, table) in derivatives.iter_mut().enumerate() {
            for (target, e) in exponents.iter().enumerate() {
                if degree[target] == order {
                    continue;
                }
                let mut src = e.clone();
                src[var] += 1;
                let source = index[&src];
                table.push((target as u32, source as u32, src[var] as f64));
            }
        }

        Layout {
            nvars,
            order,
            exponents,
            index,
            products,
            derivatives,
        }
    }

    /// Shared layout for `nvars` variables truncated at `order`.
    pub fn shared(nvars: usize, order: usize) -> Arc<Layout> {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Layout>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("layout cache poisoned");
        guard
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(Layout::build(nvars, order)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// Index of the monomial with the given exponents, if within the order.
    pub fn monomial(&self, exponents: &[u8]) -> Option<usize> {
        self.index.get(exponents).copied()
    }

    pub fn exponents(&self, idx: usize) -> &[u8] {
        &self.exponents[idx]
    }
}

fn enumerate_degree(nvars: usize, remaining: usize, pos: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if pos + 1 == nvars {
        cur[pos] = remaining as u8;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        cur[pos] = k as u8;
        enumerate_degree(nvars, remaining - k, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// Reason a jet operation has no Taylor expansion at the base point.
#[derive(Debug, Clone, PartialEq)]
pub enum JetFault {
    DivisionByZero,
    SqrtOfNegative(f64),
    SqrtAtZero,
    LogOfNonPositive(f64),
    NonIntegerPowerOfNegative { base: f64, exponent: f64 },
}

impl fmt::Display for JetFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JetFault::DivisionByZero => write!(f, "division by zero"),
            JetFault::SqrtOfNegative(v) => write!(f, "sqrt of negative value {v}"),
            JetFault::SqrtAtZero => write!(f, "sqrt is not differentiable at 0"),
            JetFault::LogOfNonPositive(v) => write!(f, "logarithm of non-positive value {v}"),
            JetFault::NonIntegerPowerOfNegative { base, exponent } => {
                write!(f, "pow of negative base {base} with non-integer exponent {exponent}")
            }
        }
    }
}

/// Truncated Taylor expansion of a scalar function of `n` chart variables.
#[derive(Clone)]
pub struct Jet {
    layout: Arc<Layout>,
    order: usize,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.layout.nvars)
            .field("order", &self.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl Jet {
    pub fn constant(layout: &Arc<Layout>, value: f64) -> Jet {
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[0] = value;
        Jet {
            layout: layout.clone(),
            order: layout.order,
            coeffs,
        }
    }

    /// Jet with explicit Taylor coefficients in layout order.
    pub fn from_coeffs(layout: &Arc<Layout>, order: usize, coeffs: Vec<f64>) -> Jet {
        assert_eq!(coeffs.len(), layout.len());
        Jet {
            layout: layout.clone(),
            order: order.min(layout.order),
            coeffs,
        }
    }

    pub fn zero(layout: &Arc<Layout>) -> Jet {
        Jet::constant(layout, 0.0)
    }

    /// The coordinate function `u_var` expanded around `value`.
    pub fn variable(layout: &Arc<Layout>, var: usize, value: f64) -> Jet {
        let mut jet = Jet::constant(layout, value);
        if layout.order >= 1 {
            let mut e = vec![0u8; layout.nvars];
            e[var] = 1;
            jet.coeffs[layout.index[&e]] = 1.0;
        }
        jet
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    /// Degree up to which the coefficients are valid.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Partial derivative of the underlying function for a multi-index.
    pub fn partial(&self, exponents: &[u8]) -> Option<f64> {
        let total: usize = exponents.iter().map(|&e| e as usize).sum();
        if total > self.order {
            return None;
        }
        let idx = self.layout.monomial(exponents)?;
        let factorial: f64 = exponents
            .iter()
            .map(|&e| (1..=e as u32).map(f64::from).product::<f64>())
            .product();
        Some(self.coeffs[idx] * factorial)
    }

    /// Partial derivative along a list of variable indices (repetition allowed).
    pub fn partial_along(&self, vars: &[usize]) -> Option<f64> {
        let mut e = vec![0u8; self.layout.nvars];
        for &v in vars {
            e[v] += 1;
        }
        self.partial(&e)
    }

    /// First-order partials at the base point.
    pub fn gradient(&self) -> Vec<f64> {
        (0..self.layout.nvars)
            .map(|i| self.partial_along(&[i]).unwrap_or(f64::NAN))
            .collect()
    }

    /// Exact derivative with respect to one variable; the valid order drops by one.
    pub fn derivative(&self, var: usize) -> Jet {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(t, s, k) in &self.layout.derivatives[var] {
            coeffs[t as usize] = k * self.coeffs[s as usize];
        }
        Jet {
            layout: self.layout.clone(),
            order: self.order.saturating_sub(1),
            coeffs,
        }
    }

    /// Drops the valid order to `order` (no-op if already lower).
    pub fn truncated(mut self, order: usize) -> Jet {
        self.order = self.order.min(order);
        self
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            layout: self.layout.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    fn zip_with(&self, other: &Jet, op: impl Fn(f64, f64) -> f64) -> Jet {
        debug_assert!(Arc::ptr_eq(&self.layout, &other.layout));
        Jet {
            layout: self.layout.clone(),
            order: self.order.min(other.order),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        }
    }

    fn product(&self, other: &Jet) -> Jet {
        debug_assert!(Arc::ptr_eq(&self.layout, &other.layout));
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(a, b, c) in &self.layout.products {
            coeffs[c as usize] += self.coeffs[a as usize] * other.coeffs[b as usize];
        }
        Jet {
            layout: self.layout.clone(),
            order: self.order.min(other.order),
            coeffs,
        }
    }

    /// Evaluates `sum_k series[k] * (self - self(0))^k` by Horner's rule.
    fn compose(&self, series: &[f64]) -> Jet {
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let top = series.len() - 1;
        let mut acc = Jet::constant(&self.layout, series[top]);
        acc.order = self.order;
        for k in (0..top).rev() {
            acc = acc.product(&delta).add_scalar(series[k]);
        }
        acc
    }

    fn series_len(&self) -> usize {
        self.layout.order + 1
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let series: Vec<f64> = (0..self.series_len())
            .map(|k| cycle[k % 4] / factorial(k))
            .collect();
        self.compose(&series)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let series: Vec<f64> = (0..self.series_len())
            .map(|k| cycle[k % 4] / factorial(k))
            .collect();
        self.compose(&series)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let series: Vec<f64> = (0..self.series_len()).map(|k| e / factorial(k)).collect();
        self.compose(&series)
    }

    pub fn ln(&self) -> Result<Jet, JetFault> {
        let a = self.value();
        if a <= 0.0 {
            return Err(JetFault::LogOfNonPositive(a));
        }
        let series: Vec<f64> = (0..self.series_len())
            .map(|k| match k {
                0 => a.ln(),
                _ => {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign / (k as f64 * a.powi(k as i32))
                }
            })
            .collect();
        Ok(self.compose(&series))
    }

    pub fn sqrt(&self) -> Result<Jet, JetFault> {
        let a = self.value();
        if a < 0.0 {
            return Err(JetFault::SqrtOfNegative(a));
        }
        if a == 0.0 {
            if self.order == 0 {
                return Ok(Jet::constant(&self.layout, 0.0).truncated(0));
            }
            return Err(JetFault::SqrtAtZero);
        }
        Ok(self.real_power(0.5))
    }

    pub fn recip(&self) -> Result<Jet, JetFault> {
        if self.value() == 0.0 {
            return Err(JetFault::DivisionByZero);
        }
        Ok(self.real_power(-1.0))
    }

    pub fn div(&self, other: &Jet) -> Result<Jet, JetFault> {
        Ok(self.product(&other.recip()?))
    }

    /// `self^p` for a constant exponent.
    pub fn powf(&self, p: f64) -> Result<Jet, JetFault> {
        if p.fract() == 0.0 && p.abs() <= 64.0 {
            return self.powi(p as i32);
        }
        let a = self.value();
        if a < 0.0 {
            return Err(JetFault::NonIntegerPowerOfNegative { base: a, exponent: p });
        }
        if a == 0.0 {
            if p > 0.0 && self.order == 0 {
                return Ok(Jet::constant(&self.layout, 0.0).truncated(0));
            }
            return Err(JetFault::DivisionByZero);
        }
        Ok(self.real_power(p))
    }

    /// Integer power by repeated squaring; valid for negative bases.
    pub fn powi(&self, p: i32) -> Result<Jet, JetFault> {
        let base = if p < 0 { self.recip()? } else { self.clone() };
        let mut e = p.unsigned_abs();
        let mut acc = Jet::constant(&self.layout, 1.0);
        acc.order = self.order;
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.product(&sq);
            }
            e >>= 1;
            if e > 0 {
                sq = sq.product(&sq);
            }
        }
        Ok(acc)
    }

    /// `self^exponent` where the exponent is itself a jet.
    pub fn pow(&self, exponent: &Jet) -> Result<Jet, JetFault> {
        if exponent.is_constant() {
            return self.powf(exponent.value());
        }
        let a = self.value();
        if a <= 0.0 {
            return Err(JetFault::NonIntegerPowerOfNegative {
                base: a,
                exponent: exponent.value(),
            });
        }
        Ok(exponent.product(&self.ln()?).exp())
    }

    /// True when every coefficient above degree zero vanishes.
    pub fn is_constant(&self) -> bool {
        self.coeffs[1..].iter().all(|&c| c == 0.0)
    }

    fn real_power(&self, p: f64) -> Jet {
        let a = self.value();
        let mut series = Vec::with_capacity(self.series_len());
        let mut binom = 1.0;
        for k in 0..self.series_len() {
            if k > 0 {
                binom *= (p - (k as f64 - 1.0)) / k as f64;
            }
            series.push(binom * a.powf(p - k as f64));
        }
        self.compose(&series)
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.product(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.product(&rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Sum of pairwise products, the common inner-product pattern over jets.
pub fn dot(a: &[Jet], b: &[Jet]) -> Jet {
    let mut it = a.iter().zip(b);
    let (x, y) = it.next().expect("dot of empty jet vectors");
    let mut acc = x * y;
    for (x, y) in it {
        acc = &acc + &(x * y);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(layout: &Arc<Layout>, i: usize, v: f64) -> Jet {
        Jet::variable(layout, i, v)
    }

    #[test]
    fn monomial_count_matches_binomial() {
        let l = Layout::shared(3, 3);
        assert_eq!(l.len(), 20);
        let l = Layout::shared(4, 4);
        assert_eq!(l.len(), 70);
    }

    #[test]
    fn product_rule_on_polynomial() {
        let l = Layout::shared(2, 3);
        let x = var(&l, 0, 2.0);
        let y = var(&l, 1, -1.0);
        // p = x^2 y
        let p = &(&x * &x) * &y;
        assert_eq!(p.value(), -4.0);
        assert_eq!(p.partial_along(&[0]).unwrap(), -4.0);
        assert_eq!(p.partial_along(&[1]).unwrap(), 4.0);
        assert_eq!(p.partial_along(&[0, 0]).unwrap(), -2.0);
        assert_eq!(p.partial_along(&[0, 1]).unwrap(), 4.0);
        assert_eq!(p.partial_along(&[0, 0, 1]).unwrap(), 2.0);
        assert_eq!(p.partial_along(&[1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn sin_cos_derivatives() {
        let l = Layout::shared(1, 4);
        let t = 0.3;
        let s = var(&l, 0, t).sin();
        let expect = [t.sin(), t.cos(), -t.sin(), -t.cos(), t.sin()];
        for (k, e) in expect.iter().enumerate() {
            let got = s.partial(&[k as u8]).unwrap();
            assert!((got - e).abs() < 1e-14, "k={k} got {got} want {e}");
        }
    }

    #[test]
    fn sqrt_and_recip_chain() {
        let l = Layout::shared(1, 3);
        let t = 2.0_f64;
        let x = var(&l, 0, t);
        let r = x.sqrt().unwrap().recip().unwrap(); // t^{-1/2}
        let d3 = -0.5 * -1.5 * -2.5 * t.powf(-3.5);
        assert!((r.partial(&[3]).unwrap() - d3).abs() < 1e-14);
    }

    #[test]
    fn integer_power_of_negative_base() {
        let l = Layout::shared(1, 3);
        let x = var(&l, 0, -2.0);
        let c = x.powf(3.0).unwrap();
        assert_eq!(c.value(), -8.0);
        assert_eq!(c.partial(&[1]).unwrap(), 12.0);
        assert_eq!(c.partial(&[2]).unwrap(), -12.0);
        assert!(matches!(
            x.powf(0.5),
            Err(JetFault::NonIntegerPowerOfNegative { .. })
        ));
    }

    #[test]
    fn derivative_lowers_order() {
        let l = Layout::shared(2, 3);
        let x = var(&l, 0, 0.5).exp();
        let dx = x.derivative(0);
        assert_eq!(dx.order(), 2);
        assert!((dx.partial_along(&[0, 0]).unwrap() - 0.5f64.exp()).abs() < 1e-14);
        assert!(dx.partial_along(&[0, 0, 0]).is_none());
    }

    #[test]
    fn faults() {
        let l = Layout::shared(1, 2);
        let z = Jet::constant(&l, 0.0);
        assert_eq!(z.recip().unwrap_err(), JetFault::DivisionByZero);
        assert_eq!(z.sqrt().unwrap_err(), JetFault::SqrtAtZero);
        assert!(matches!(
            Jet::constant(&l, -1.0).sqrt(),
            Err(JetFault::SqrtOfNegative(_))
        ));
    }
}
