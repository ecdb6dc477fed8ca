use std::fmt::{self, Write as _};

use serde::Serialize;

/// Elementary functions callable from the immersion language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }
}

/// Operator tag of an [`Expr`] node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExprKind {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Neg,
    Sin,
    Cos,
    Exp,
    Sqrt,
    Constant,
    Variable,
    Parameter,
}

/// Expression tree for one ambient component of an immersion.
///
/// Variables are zero-based chart indices (`u1` is `Var(0)`). Parameters keep
/// their name for printing but carry the value bound at parse time.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Param { name: String, value: f64 },
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn kind(&self) -> ExprKind {
        match self {
            Expr::Const(_) => ExprKind::Constant,
            Expr::Var(_) => ExprKind::Variable,
            Expr::Param { .. } => ExprKind::Parameter,
            Expr::Neg(_) => ExprKind::Neg,
            Expr::Add(..) => ExprKind::Add,
            Expr::Sub(..) => ExprKind::Sub,
            Expr::Mul(..) => ExprKind::Mul,
            Expr::Div(..) => ExprKind::Div,
            Expr::Pow(..) => ExprKind::Pow,
            Expr::Call(Func::Sin, _) => ExprKind::Sin,
            Expr::Call(Func::Cos, _) => ExprKind::Cos,
            Expr::Call(Func::Exp, _) => ExprKind::Exp,
            Expr::Call(Func::Sqrt, _) => ExprKind::Sqrt,
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Param { .. } => vec![],
            Expr::Neg(a) | Expr::Call(_, a) => vec![a],
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                vec![a, b]
            }
        }
    }

    /// Largest chart variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Var(i) => Some(*i),
            _ => self.children().into_iter().filter_map(Expr::max_var).max(),
        }
    }

    /// Value of a variable-free expression.
    pub fn constant_value(&self) -> Option<f64> {
        Some(match self {
            Expr::Const(c) => *c,
            Expr::Var(_) => return None,
            Expr::Param { value, .. } => *value,
            Expr::Neg(a) => -a.constant_value()?,
            Expr::Add(a, b) => a.constant_value()? + b.constant_value()?,
            Expr::Sub(a, b) => a.constant_value()? - b.constant_value()?,
            Expr::Mul(a, b) => a.constant_value()? * b.constant_value()?,
            Expr::Div(a, b) => a.constant_value()? / b.constant_value()?,
            Expr::Pow(a, b) => a.constant_value()?.powf(b.constant_value()?),
            Expr::Call(f, a) => {
                let v = a.constant_value()?;
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Sqrt => v.sqrt(),
                }
            }
        })
    }
}

fn write_number(out: &mut String, v: f64) {
    if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
        let _ = write!(out, "({v:?})");
    } else {
        let _ = write!(out, "{v:?}");
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        print_expr(self, &mut s);
        f.write_str(&s)
    }
}

fn print_expr(e: &Expr, out: &mut String) {
    let binary = |out: &mut String, a: &Expr, op: &str, b: &Expr| {
        out.push('(');
        print_expr(a, out);
        out.push(' ');
        out.push_str(op);
        out.push(' ');
        print_expr(b, out);
        out.push(')');
    };
    match e {
        Expr::Const(v) => write_number(out, *v),
        Expr::Var(i) => {
            let _ = write!(out, "u{}", i + 1);
        }
        Expr::Param { name, .. } => out.push_str(name),
        Expr::Neg(a) => {
            out.push_str("(-");
            print_expr(a, out);
            out.push(')');
        }
        Expr::Add(a, b) => binary(out, a, "+", b),
        Expr::Sub(a, b) => binary(out, a, "-", b),
        Expr::Mul(a, b) => binary(out, a, "*", b),
        Expr::Div(a, b) => binary(out, a, "/", b),
        Expr::Pow(a, b) => binary(out, a, "^", b),
        Expr::Call(func, a) => {
            out.push_str(func.name());
            out.push('(');
            print_expr(a, out);
            out.push(')');
        }
    }
}

/// Closed chart interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Interval {
        Interval { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// A parsed immersion `U ⊆ R^n → E^m` with its domain box and sampling plan.
#[derive(Debug, Clone, PartialEq)]
pub struct ImmersionSpec {
    pub n: usize,
    pub m: usize,
    pub components: Vec<Expr>,
    /// Parameters in declaration order; their values are already inlined.
    pub params: Vec<(String, f64)>,
    pub domain: Vec<Interval>,
    pub grid: Vec<usize>,
}

/// Largest ambient dimension accepted.
pub const MAX_AMBIENT: usize = 8;

impl ImmersionSpec {
    /// Canonical source text; parsing it yields an identical spec.
    pub fn print(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dim {} -> {};", self.n, self.m);
        for (name, value) in &self.params {
            if name == "pi" {
                continue;
            }
            let _ = write!(out, "param {name} = ");
            write_number(&mut out, *value);
            out.push_str(";\n");
        }
        for (i, iv) in self.domain.iter().enumerate() {
            let _ = write!(out, "domain u{} in [", i + 1);
            write_number(&mut out, iv.lo);
            out.push_str(", ");
            write_number(&mut out, iv.hi);
            out.push_str("];\n");
        }
        let grid: Vec<String> = self.grid.iter().map(|g| g.to_string()).collect();
        let _ = writeln!(out, "grid {};", grid.join(", "));
        for (k, e) in self.components.iter().enumerate() {
            let _ = writeln!(out, "x{} = {};", k + 1, e);
        }
        out
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Total number of grid samples.
    pub fn grid_size(&self) -> usize {
        self.grid.iter().product()
    }
}
