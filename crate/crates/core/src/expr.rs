//! Analytic coefficient expressions: a small recursive-descent parser and a
//! checked evaluator over `x`, `y`, the derived radius `r = sqrt(x² + y²)`,
//! and named parameters.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := atom ('^' unary)?            // right associative
//! atom    := number | ident | ident '(' sum (',' sum)* ')' | '(' sum ')'
//! ```
//!
//! So `-x^2` is `-(x^2)` and `2^3^2` is `2^(3^2)`.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use thiserror::Error;

use crate::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("function `{name}` takes {expected} argument(s), got {found} (byte {offset})")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        offset: usize,
    },
    #[error("unbound identifier `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("{function} is undefined at {argument:e}")]
    Domain { function: &'static str, argument: f64 },
    #[error("non-finite result from `{0}`")]
    NonFinite(&'static str),
    #[error("expected a {expected} field, found a {found} field")]
    KindMismatch {
        expected: FieldKind,
        found: FieldKind,
    },
    #[error("a {kind} field needs {expected} component(s), got {found}")]
    ComponentCount {
        kind: FieldKind,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    /// `sqrt(x² + y²)`
    R,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Abs,
    Pow,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "pow" => Func::Pow,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Pow => "pow",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow | Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

/// Expression syntax tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Param(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ExprError> {
        let mut p = Parser { src: text, pos: 0 };
        let e = p.sum()?;
        p.skip_ws();
        if p.pos < text.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    /// Replaces every parameter by its value. Fails on the first identifier
    /// that is neither a builtin nor in `params`.
    pub fn bind(&self, params: &BTreeMap<String, f64>) -> Result<Expr, ExprError> {
        Ok(match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::Var(v) => Expr::Var(*v),
            Expr::Param(name) => match params.get(name) {
                Some(&v) => Expr::Num(v),
                None => return Err(ExprError::Unbound(name.clone())),
            },
            Expr::Neg(e) => Expr::Neg(Box::new(e.bind(params)?)),
            Expr::Binary(op, l, r) => Expr::Binary(*op, Box::new(l.bind(params)?), Box::new(r.bind(params)?)),
            Expr::Call(f, args) => Expr::Call(*f, args.iter().map(|a| a.bind(params)).collect::<Result<_, _>>()?),
        })
    }

    /// Names of all parameters referenced by the expression.
    pub fn parameters(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_params(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_params(&self, out: &mut Vec<String>) {
        match self {
            Expr::Param(n) => out.push(n.clone()),
            Expr::Neg(e) => e.collect_params(out),
            Expr::Binary(_, l, r) => {
                l.collect_params(out);
                r.collect_params(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_params(out)),
            Expr::Num(_) | Expr::Var(_) => {}
        }
    }

    /// Evaluates at `point`. Parameters must have been bound.
    pub fn eval(&self, point: Point) -> Result<f64, ExprError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X) => point[0],
            Expr::Var(Var::Y) => point[1],
            Expr::Var(Var::R) => libm::hypot(point[0], point[1]),
            Expr::Param(name) => return Err(ExprError::Unbound(name.clone())),
            Expr::Neg(e) => -e.eval(point)?,
            Expr::Binary(op, l, r) => {
                let a = l.eval(point)?;
                let b = r.eval(point)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(ExprError::DivisionByZero);
                        }
                        a / b
                    }
                    BinOp::Pow => checked_pow(a, b)?,
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval(point)?;
                match f {
                    Func::Exp => libm::exp(a),
                    Func::Log => {
                        if !(a > 0.0) {
                            return Err(ExprError::Domain { function: "log", argument: a });
                        }
                        libm::log(a)
                    }
                    Func::Sin => libm::sin(a),
                    Func::Cos => libm::cos(a),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(ExprError::Domain { function: "sqrt", argument: a });
                        }
                        libm::sqrt(a)
                    }
                    Func::Abs => a.abs(),
                    Func::Pow => checked_pow(a, args[1].eval(point)?)?,
                    Func::Min => a.min(args[1].eval(point)?),
                    Func::Max => a.max(args[1].eval(point)?),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::NonFinite(self.op_name()))
        }
    }

    fn op_name(&self) -> &'static str {
        match self {
            Expr::Num(_) => "literal",
            Expr::Var(_) => "variable",
            Expr::Param(_) => "parameter",
            Expr::Neg(_) => "-",
            Expr::Binary(op, _, _) => match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Div => "/",
                BinOp::Pow => "^",
            },
            Expr::Call(f, _) => f.name(),
        }
    }
}

fn checked_pow(base: f64, exponent: f64) -> Result<f64, ExprError> {
    if base < 0.0 && libm::trunc(exponent) != exponent {
        return Err(ExprError::Domain { function: "pow", argument: base });
    }
    if base == 0.0 && exponent < 0.0 {
        return Err(ExprError::DivisionByZero);
    }
    Ok(libm::pow(base, exponent))
}

impl core::str::FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, ExprError> {
        Expr::parse(s)
    }
}

/// Fully parenthesized; parsing the output gives back the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Var(Var::Y) => f.write_str("y"),
            Expr::Var(Var::R) => f.write_str("r"),
            Expr::Param(n) => f.write_str(n),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, l, r) => {
                let sym = match op {
                    BinOp::Add => '+',
                    BinOp::Sub => '-',
                    BinOp::Mul => '*',
                    BinOp::Div => '/',
                    BinOp::Pow => '^',
                };
                write!(f, "({l} {sym} {r})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> ExprError {
        ExprError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.as_bytes().get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let digits = |p: &mut usize| {
            while *p < bytes.len() && bytes[*p].is_ascii_digit() {
                *p += 1;
            }
        };
        let mut p = self.pos;
        digits(&mut p);
        if p < bytes.len() && bytes[p] == b'.' {
            p += 1;
            digits(&mut p);
        }
        if p < bytes.len() && (bytes[p] == b'e' || bytes[p] == b'E') {
            let mut q = p + 1;
            if q < bytes.len() && (bytes[q] == b'+' || bytes[q] == b'-') {
                q += 1;
            }
            if q < bytes.len() && bytes[q].is_ascii_digit() {
                digits(&mut q);
                p = q;
            }
        }
        let text = &self.src[start..p];
        match text.parse::<f64>() {
            Ok(v) => {
                self.pos = p;
                Ok(Expr::Num(v))
            }
            Err(_) => Err(self.error("malformed number")),
        }
    }

    fn identifier(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut p = self.pos;
        while p < bytes.len() && (bytes[p].is_ascii_alphanumeric() || bytes[p] == b'_') {
            p += 1;
        }
        let name = &self.src[start..p];
        self.pos = p;
        if self.peek() == Some(b'(') {
            let func = Func::lookup(name).ok_or_else(|| ExprError::UnknownFunction {
                name: name.to_string(),
                offset: start,
            })?;
            self.pos += 1;
            let mut args = vec![self.sum()?];
            while self.eat(b',') {
                args.push(self.sum()?);
            }
            if !self.eat(b')') {
                return Err(self.error("expected `,` or `)`"));
            }
            if args.len() != func.arity() {
                return Err(ExprError::Arity {
                    name: name.to_string(),
                    expected: func.arity(),
                    found: args.len(),
                    offset: start,
                });
            }
            return Ok(Expr::Call(func, args));
        }
        Ok(match name {
            "x" => Expr::Var(Var::X),
            "y" => Expr::Var(Var::Y),
            "r" => Expr::Var(Var::R),
            "pi" => Expr::Num(core::f64::consts::PI),
            _ => Expr::Param(name.to_string()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    Vector2,
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldKind::Scalar => "scalar",
            FieldKind::Vector2 => "vector",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldValue {
    Scalar(f64),
    Vector([f64; 2]),
}

/// A scalar or planar vector function of position, with its parameters
/// already bound.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    kind: FieldKind,
    components: Vec<Expr>,
    params: BTreeMap<String, f64>,
}

impl CoefficientField {
    pub fn new(kind: FieldKind, components: Vec<Expr>, params: &BTreeMap<String, f64>) -> Result<Self, ExprError> {
        let expected = match kind {
            FieldKind::Scalar => 1,
            FieldKind::Vector2 => 2,
        };
        if components.len() != expected {
            return Err(ExprError::ComponentCount {
                kind,
                expected,
                found: components.len(),
            });
        }
        let components = components.iter().map(|c| c.bind(params)).collect::<Result<Vec<_>, _>>()?;
        Ok(CoefficientField {
            kind,
            components,
            params: params.clone(),
        })
    }

    pub fn parse_scalar(text: &str, params: &BTreeMap<String, f64>) -> Result<Self, ExprError> {
        Self::new(FieldKind::Scalar, vec![Expr::parse(text)?], params)
    }

    pub fn parse_vector(texts: [&str; 2], params: &BTreeMap<String, f64>) -> Result<Self, ExprError> {
        Self::new(
            FieldKind::Vector2,
            vec![Expr::parse(texts[0])?, Expr::parse(texts[1])?],
            params,
        )
    }

    pub fn constant(value: f64) -> Self {
        CoefficientField {
            kind: FieldKind::Scalar,
            components: vec![Expr::Num(value)],
            params: BTreeMap::new(),
        }
    }

    pub fn constant_vector(value: [f64; 2]) -> Self {
        CoefficientField {
            kind: FieldKind::Vector2,
            components: vec![Expr::Num(value[0]), Expr::Num(value[1])],
            params: BTreeMap::new(),
        }
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    /// Bound component expressions.
    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn eval(&self, point: Point) -> Result<FieldValue, ExprError> {
        Ok(match self.kind {
            FieldKind::Scalar => FieldValue::Scalar(self.components[0].eval(point)?),
            FieldKind::Vector2 => FieldValue::Vector([self.components[0].eval(point)?, self.components[1].eval(point)?]),
        })
    }

    pub fn eval_scalar(&self, point: Point) -> Result<f64, ExprError> {
        match self.kind {
            FieldKind::Scalar => self.components[0].eval(point),
            found => Err(ExprError::KindMismatch {
                expected: FieldKind::Scalar,
                found,
            }),
        }
    }

    pub fn eval_vector(&self, point: Point) -> Result<[f64; 2], ExprError> {
        match self.kind {
            FieldKind::Vector2 => Ok([self.components[0].eval(point)?, self.components[1].eval(point)?]),
            found => Err(ExprError::KindMismatch {
                expected: FieldKind::Vector2,
                found,
            }),
        }
    }
}

/// Central-difference divergence of a vector field with step `step`.
pub fn divergence_fd(field: &CoefficientField, point: Point, step: f64) -> Result<f64, ExprError> {
    let [x, y] = point;
    let e = |p: Point| field.eval_vector(p);
    let dx = (e([x + step, y])?[0] - e([x - step, y])?[0]) / (2.0 * step);
    let dy = (e([x, y + step])?[1] - e([x, y - step])?[1]) / (2.0 * step);
    Ok(dx + dy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn eval(text: &str, p: Point) -> f64 {
        Expr::parse(text).unwrap().eval(p).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("2+3*x", [1.0, 0.0]), 5.0);
        assert_eq!(eval("(r-5)^2/r", [3.0, 4.0]), 0.0);
        assert_eq!(eval("-x^2", [3.0, 0.0]), -9.0);
        assert_eq!(eval("2^3^2", [0.0, 0.0]), 512.0);
        assert_eq!(eval("2^-1", [0.0, 0.0]), 0.5);
        assert_eq!(eval("8/4/2", [0.0, 0.0]), 1.0);
        assert_eq!(eval("1 - 2 - 3", [0.0, 0.0]), -4.0);
        assert_eq!(eval(" max( x , y )*min(1,2) ", [1.0, 7.0]), 7.0);
        assert_eq!(eval("1.5e1 + .5 + 2E-1", [0.0, 0.0]), 15.7);
    }

    #[test]
    fn exp_matches_high_precision_value() {
        // mpmath, 30 digits: 0.711547929287536722429488364441
        let v = eval("exp(-0.3403125)", [0.0, 0.0]);
        assert!((v - 0.711_547_929_287_536_7).abs() < 1e-15);
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        assert_eq!(
            Expr::parse("1 + * 2"),
            Err(ExprError::Syntax {
                offset: 4,
                message: "unexpected character".into()
            })
        );
        assert!(matches!(Expr::parse("(1 + 2"), Err(ExprError::Syntax { offset: 6, .. })));
        assert!(matches!(Expr::parse("1 2"), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(
            Expr::parse("2 * foo(x)"),
            Err(ExprError::UnknownFunction { offset: 4, .. })
        ));
        assert!(matches!(
            Expr::parse("pow(x)"),
            Err(ExprError::Arity { expected: 2, found: 1, .. })
        ));
    }

    #[test]
    fn evaluation_errors_are_reported() {
        let at = [0.0, 0.0];
        assert_eq!(Expr::parse("1/x").unwrap().eval(at), Err(ExprError::DivisionByZero));
        assert!(matches!(
            Expr::parse("log(x - 1)").unwrap().eval(at),
            Err(ExprError::Domain { function: "log", .. })
        ));
        assert!(matches!(
            Expr::parse("sqrt(-1)").unwrap().eval(at),
            Err(ExprError::Domain { function: "sqrt", .. })
        ));
        assert!(matches!(
            Expr::parse("(-2)^0.5").unwrap().eval(at),
            Err(ExprError::Domain { function: "pow", .. })
        ));
        assert_eq!(Expr::parse("(-2)^3").unwrap().eval(at), Ok(-8.0));
        assert!(matches!(Expr::parse("exp(1000)").unwrap().eval(at), Err(ExprError::NonFinite(_))));
    }

    #[test]
    fn unbound_identifier() {
        let e = Expr::parse("kappa * x").unwrap();
        assert_eq!(e.eval([1.0, 0.0]), Err(ExprError::Unbound("kappa".into())));
        assert_eq!(
            CoefficientField::parse_scalar("kappa * x", &BTreeMap::new()),
            Err(ExprError::Unbound("kappa".into()))
        );
        assert_eq!(e.parameters(), vec!["kappa".to_string()]);
    }

    #[test]
    fn annulus_forcing_normal_component() {
        let f = CoefficientField::parse_vector(
            ["kappa*(r-5)^2/r*x/r", "kappa*(r-5)^2/r*y/r"],
            &params(&[("kappa", 0.6)]),
        )
        .unwrap();
        let v = f.eval_vector([4.0, 0.0]).unwrap();
        assert!((v[0] - 0.15).abs() < 1e-15);
        assert_eq!(v[1], 0.0);
    }

    #[test]
    fn manufactured_pressure_vanishes_on_hole() {
        let p = CoefficientField::parse_scalar("(x^2-a^2)*(y^2-a^2)", &params(&[("a", 0.1)])).unwrap();
        for y in [-0.65, -0.1, 0.0, 0.3, 0.65] {
            assert_eq!(p.eval_scalar([0.1, y]).unwrap(), 0.0);
        }
    }

    #[test]
    fn field_kind_checks() {
        let s = CoefficientField::constant(1.0);
        assert!(matches!(s.eval_vector([0.0, 0.0]), Err(ExprError::KindMismatch { .. })));
        assert!(matches!(
            CoefficientField::new(FieldKind::Vector2, vec![Expr::Num(1.0)], &BTreeMap::new()),
            Err(ExprError::ComponentCount { .. })
        ));
    }

    #[test]
    fn divergence_fd_cases() {
        let none = BTreeMap::new();
        let radial = CoefficientField::parse_vector(["x", "y"], &none).unwrap();
        assert!((divergence_fd(&radial, [0.3, -1.2], 1e-5).unwrap() - 2.0).abs() < 1e-8);
        let rot = CoefficientField::parse_vector(["-y", "x"], &none).unwrap();
        assert!(divergence_fd(&rot, [0.7, 2.0], 1e-5).unwrap().abs() < 1e-10);
        // symbolic oracle (sympy): div f = 2 kappa (r - 5) / r
        let f = CoefficientField::parse_vector(
            ["kappa*(r-5)^2/r*x/r", "kappa*(r-5)^2/r*y/r"],
            &params(&[("kappa", 1.0)]),
        )
        .unwrap();
        assert!((divergence_fd(&f, [2.0, 0.0], 1e-5).unwrap() + 3.0).abs() < 1e-6);
    }
}
