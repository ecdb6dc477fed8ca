//! Recursive-descent parser for immersion definitions.
//!
//! ```text
//! spec    := "dim" INT "->" INT ";" (stmt ";")+
//! stmt    := "param" IDENT "=" expr
//!          | "domain" VAR "in" "[" expr "," expr "]"
//!          | "grid" INT ("," INT)*
//!          | "x" INT "=" expr
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := atom ("^" unary)?
//! atom    := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"
//! ```
//!
//! `param`, `domain` and `grid` statements are optional; missing axes default
//! to `[-1, 1]` with 8 samples. `pi` is predefined.

use std::f64::consts::PI;

use super::ast::{Expr, Func, ImmersionSpec, Interval, MAX_AMBIENT};
use super::DslError;

const DEFAULT_GRID: usize = 8;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Arrow,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Eq,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Arrow => "`->`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let push = |out: &mut Vec<Token>, tok: Tok| out.push(Token { tok, line: tl, column: tc });
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text.parse().map_err(|_| DslError::Syntax {
                line: tl,
                column: tc,
                expected: vec!["number".into()],
                found: format!("`{text}`"),
            })?;
            col += i - start;
            push(&mut out, Tok::Num(value));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            push(&mut out, Tok::Ident(chars[start..i].iter().collect()));
            continue;
        }
        let tok = match c {
            '-' if chars.get(i + 1) == Some(&'>') => {
                i += 1;
                col += 1;
                Tok::Arrow
            }
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            '=' => Tok::Eq,
            other => {
                return Err(DslError::Syntax {
                    line: tl,
                    column: tc,
                    expected: vec!["a token".into()],
                    found: format!("`{other}`"),
                })
            }
        };
        i += 1;
        col += 1;
        push(&mut out, tok);
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    n: usize,
    params: Vec<(String, f64)>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> DslError {
        let t = &self.tokens[self.pos];
        DslError::Syntax {
            line: t.line,
            column: t.column,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.tok.describe(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), DslError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[what]))
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), DslError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            _ => Err(self.error(&[&format!("`{kw}`")])),
        }
    }

    fn integer(&mut self) -> Result<usize, DslError> {
        match *self.peek() {
            Tok::Num(v) if v.fract() == 0.0 && v >= 0.0 => {
                self.bump();
                Ok(v as usize)
            }
            _ => Err(self.error(&["integer"])),
        }
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(match self.unary()? {
                Expr::Const(c) => Expr::Const(-c),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, DslError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, DslError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    let func = Func::from_name(&name).ok_or(DslError::UnknownIdentifier(name))?;
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                self.identifier(name)
            }
            _ => Err(self.error(&["number", "identifier", "`(`", "`-`"])),
        }
    }

    fn identifier(&self, name: String) -> Result<Expr, DslError> {
        if let Some(idx) = chart_variable(&name) {
            if idx < self.n {
                return Ok(Expr::Var(idx));
            }
            return Err(DslError::UnknownIdentifier(name));
        }
        if let Some((_, value)) = self.params.iter().find(|(p, _)| *p == name) {
            return Ok(Expr::Param { name, value: *value });
        }
        if name == "pi" {
            return Ok(Expr::Param { name, value: PI });
        }
        Err(DslError::UnknownIdentifier(name))
    }

    fn constant_expr(&mut self) -> Result<f64, DslError> {
        let tok = self.pos;
        let e = self.expr()?;
        match e.constant_value() {
            Some(v) if v.is_finite() => Ok(v),
            _ => {
                let t = &self.tokens[tok];
                Err(DslError::Syntax {
                    line: t.line,
                    column: t.column,
                    expected: vec!["finite constant expression".into()],
                    found: e.to_string(),
                })
            }
        }
    }
}

/// `u<k>` with k ≥ 1, returned zero-based.
fn chart_variable(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('u')?;
    let k: usize = digits.parse().ok()?;
    (k >= 1 && !digits.starts_with('0')).then(|| k - 1)
}

fn component_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    let k: usize = digits.parse().ok()?;
    (k >= 1 && !digits.starts_with('0')).then(|| k - 1)
}

/// Parses an immersion definition.
pub fn parse(source: &str) -> Result<ImmersionSpec, DslError> {
    let tokens = lex(source)?;
    let mut p = Parser { tokens, pos: 0, n: 0, params: Vec::new() };

    p.keyword("dim")?;
    let n = p.integer()?;
    p.expect(Tok::Arrow, "`->`")?;
    let m = p.integer()?;
    p.expect(Tok::Semi, "`;`")?;
    if !(1 <= n && n < m && m <= MAX_AMBIENT) {
        return Err(DslError::InvalidSpec(format!(
            "dimensions must satisfy 1 <= n < m <= {MAX_AMBIENT}, got n={n}, m={m}"
        )));
    }
    p.n = n;

    let mut components: Vec<Option<Expr>> = vec![None; m];
    let mut domain: Vec<Option<Interval>> = vec![None; n];
    let mut grid: Option<Vec<usize>> = None;

    while *p.peek() != Tok::Eof {
        let name = match p.peek().clone() {
            Tok::Ident(s) => s,
            _ => return Err(p.error(&["`param`", "`domain`", "`grid`", "component `x<k>`"])),
        };
        match name.as_str() {
            "param" => {
                p.bump();
                let pname = match p.bump().tok {
                    Tok::Ident(s) => s,
                    _ => {
                        p.pos -= 1;
                        return Err(p.error(&["parameter name"]));
                    }
                };
                if chart_variable(&pname).is_some()
                    || component_index(&pname).is_some()
                    || pname == "pi"
                    || Func::from_name(&pname).is_some()
                {
                    return Err(DslError::InvalidSpec(format!("`{pname}` is reserved")));
                }
                p.expect(Tok::Eq, "`=`")?;
                let v = p.constant_expr()?;
                p.params.retain(|(q, _)| *q != pname);
                p.params.push((pname, v));
            }
            "domain" => {
                p.bump();
                let axis = match p.bump().tok {
                    Tok::Ident(s) => match chart_variable(&s) {
                        Some(a) if a < n => a,
                        _ => return Err(DslError::UnknownIdentifier(s)),
                    },
                    _ => {
                        p.pos -= 1;
                        return Err(p.error(&["chart variable"]));
                    }
                };
                p.keyword("in")?;
                p.expect(Tok::LBracket, "`[`")?;
                let lo = p.constant_expr()?;
                p.expect(Tok::Comma, "`,`")?;
                let hi = p.constant_expr()?;
                p.expect(Tok::RBracket, "`]`")?;
                if lo >= hi {
                    return Err(DslError::InvalidSpec(format!(
                        "domain of u{} must have lower < upper, got [{lo}, {hi}]",
                        axis + 1
                    )));
                }
                domain[axis] = Some(Interval::new(lo, hi));
            }
            "grid" => {
                p.bump();
                let mut counts = vec![p.integer()?];
                while *p.peek() == Tok::Comma {
                    p.bump();
                    counts.push(p.integer()?);
                }
                if counts.len() != n {
                    return Err(DslError::DimensionMismatch(format!(
                        "grid lists {} axes, immersion has n={n}",
                        counts.len()
                    )));
                }
                if let Some(&bad) = counts.iter().find(|&&c| c < 2) {
                    return Err(DslError::InvalidSpec(format!("grid counts must be >= 2, got {bad}")));
                }
                grid = Some(counts);
            }
            _ => {
                let Some(k) = component_index(&name) else {
                    return Err(p.error(&["`param`", "`domain`", "`grid`", "component `x<k>`"]));
                };
                if k >= m {
                    return Err(DslError::DimensionMismatch(format!(
                        "component x{} exceeds declared m={m}",
                        k + 1
                    )));
                }
                p.bump();
                p.expect(Tok::Eq, "`=`")?;
                let e = p.expr()?;
                if components[k].is_some() {
                    return Err(DslError::DimensionMismatch(format!("component x{} assigned twice", k + 1)));
                }
                components[k] = Some(e);
            }
        }
        p.expect(Tok::Semi, "`;`")?;
    }

    let missing: Vec<String> = components
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_none())
        .map(|(k, _)| format!("x{}", k + 1))
        .collect();
    if !missing.is_empty() {
        return Err(DslError::DimensionMismatch(format!(
            "declared m={m} but missing {}",
            missing.join(", ")
        )));
    }

    Ok(ImmersionSpec {
        n,
        m,
        components: components.into_iter().map(Option::unwrap).collect(),
        params: p.params,
        domain: domain
            .into_iter()
            .map(|d| d.unwrap_or(Interval::new(-1.0, 1.0)))
            .collect(),
        grid: grid.unwrap_or_else(|| vec![DEFAULT_GRID; n]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_unit_sphere() {
        let s = parse("dim 2 -> 3; x1 = cos(u1)*cos(u2); x2 = sin(u1)*cos(u2); x3 = sin(u2)").unwrap_err();
        // a trailing statement needs its semicolon
        assert!(matches!(s, DslError::Syntax { .. }));
        let s = parse("dim 2 -> 3; x1 = cos(u1)*cos(u2); x2 = sin(u1)*cos(u2); x3 = sin(u2);").unwrap();
        assert_eq!((s.n, s.m), (2, 3));
        assert_eq!(s.components.len(), 3);
        assert_eq!(s.grid, vec![8, 8]);
    }

    #[test]
    fn parses_helix() {
        let s = parse("dim 1 -> 3; x1 = cos(u1); x2 = sin(u1); x3 = u1;").unwrap();
        assert_eq!((s.n, s.m), (1, 3));
        assert_eq!(s.components[2], Expr::Var(0));
    }

    #[test]
    fn unknown_chart_variable() {
        let e = parse("dim 2 -> 3; x1 = u1*u3;").unwrap_err();
        assert_eq!(e, DslError::UnknownIdentifier("u3".into()));
    }

    #[test]
    fn missing_component_is_dimension_mismatch() {
        let e = parse("dim 2 -> 3; x1 = u1; x2 = u2;").unwrap_err();
        assert!(matches!(e, DslError::DimensionMismatch(_)));
    }

    #[test]
    fn syntax_error_location() {
        let e = parse("dim 2 -> 3;\nx1 = u1 + ;").unwrap_err();
        match e {
            DslError::Syntax { line, column, expected, .. } => {
                assert_eq!((line, column), (2, 11));
                assert!(expected.iter().any(|s| s == "identifier"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn precedence_and_unary_minus() {
        let s = parse("dim 1 -> 2; x1 = -u1^2; x2 = 2^-1 + 3*u1;").unwrap();
        assert_eq!(
            s.components[0],
            Expr::Neg(Box::new(Expr::Pow(Box::new(Expr::Var(0)), Box::new(Expr::Const(2.0)))))
        );
        assert_eq!(s.components[1].to_string(), "((2.0 ^ (-1.0)) + (3.0 * u1))");
    }

    #[test]
    fn params_domain_grid() {
        let s = parse(
            "dim 1 -> 2; param r = 2; param c = r / 4; domain u1 in [-pi, pi]; grid 5; x1 = r*cos(u1) + c; x2 = r*sin(u1);",
        )
        .unwrap();
        assert_eq!(s.params, vec![("r".into(), 2.0), ("c".into(), 0.5)]);
        assert_eq!(s.domain[0], Interval::new(-PI, PI));
        assert_eq!(s.grid, vec![5]);
    }

    #[test]
    fn invalid_dimensions_and_boxes() {
        assert!(matches!(parse("dim 3 -> 3; x1=u1; x2=u2; x3=u3;"), Err(DslError::InvalidSpec(_))));
        assert!(matches!(parse("dim 1 -> 9;"), Err(DslError::InvalidSpec(_))));
        assert!(matches!(
            parse("dim 1 -> 2; domain u1 in [1, 0]; x1=u1; x2=u1;"),
            Err(DslError::InvalidSpec(_))
        ));
        assert!(matches!(parse("dim 1 -> 2; grid 1; x1=u1; x2=u1;"), Err(DslError::InvalidSpec(_))));
    }

    #[test]
    fn unknown_function() {
        assert_eq!(
            parse("dim 1 -> 2; x1 = tan(u1); x2 = u1;").unwrap_err(),
            DslError::UnknownIdentifier("tan".into())
        );
    }

    #[test]
    fn print_round_trip() {
        let src = "dim 2 -> 3; param a = -0.25; domain u2 in [0, 2*pi]; \
                   x1 = a*u1^3 - -2; x2 = exp(u1)/sqrt(1+u2^2); x3 = -(u1 - pi);";
        let s = parse(src).unwrap();
        let again = parse(&s.print()).unwrap();
        assert_eq!(s, again);
    }
}
