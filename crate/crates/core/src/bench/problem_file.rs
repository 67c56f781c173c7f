//! Plain-text problem definitions.
//!
//! One `key = value` pair per line, `#` starts a comment:
//!
//! ```text
//! name  = cubic
//! g     = exp(x) - exp(3*x)/3 + 1/3
//! xi1   = 1
//! k1    = 1
//! phi1  = y^3
//! exact = exp(x)
//! ```
//!
//! Keys: `name`, `g` (required), `xi1`, `k1`, `phi1`, `xi2`, `k2`, `phi2`,
//! `exact`, `singular_at_zero`. A term is present when its kernel is given;
//! its `ξ` defaults to 1 and `φ` to `y`. Expressions use numbers, `pi`,
//! `+ - * /`, `^` with an integer exponent and `exp sin cos tanh`. The
//! variables are `x` in `g`/`exact`, `x, s` in kernels and `s, y` in `φ`.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_traits::Float;

use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sym {
    X,
    S,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Exp,
    Sin,
    Cos,
    Tanh,
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Num(f64),
    Sym(Sym),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

/// Arithmetic shared by plain scalars and tape variables.
trait Value<T>: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> {
    fn constant(value: T) -> Self;
    fn divide(self, rhs: Self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn call(self, f: Func) -> Self;
}

impl<T: Real> Value<T> for T {
    fn constant(value: T) -> Self {
        value
    }
    fn divide(self, rhs: Self) -> Self {
        self / rhs
    }
    fn powi(self, n: i32) -> Self {
        Float::powi(self, n)
    }
    fn call(self, f: Func) -> Self {
        match f {
            Func::Exp => self.exp(),
            Func::Sin => self.sin(),
            Func::Cos => self.cos(),
            Func::Tanh => self.tanh(),
        }
    }
}

impl<'t, T: Real> Value<T> for Var<'t, T> {
    fn constant(value: T) -> Self {
        Var::constant(value)
    }
    fn divide(self, rhs: Self) -> Self {
        // the tape refuses division by zero; a NaN surfaces as divergence instead
        if rhs.value() == T::zero() {
            Var::constant(T::nan())
        } else {
            self / rhs
        }
    }
    fn powi(self, n: i32) -> Self {
        Var::powi(self, n)
    }
    fn call(self, f: Func) -> Self {
        match f {
            Func::Exp => self.exp(),
            Func::Sin => self.sin(),
            Func::Cos => self.cos(),
            Func::Tanh => self.tanh(),
        }
    }
}

impl Expr {
    fn eval<T: Real, V: Value<T>>(&self, bind: &impl Fn(Sym) -> V) -> V {
        match self {
            Expr::Num(v) => V::constant(T::lit(*v)),
            Expr::Sym(s) => bind(*s),
            Expr::Neg(a) => -a.eval(bind),
            Expr::Add(a, b) => a.eval(bind) + b.eval(bind),
            Expr::Sub(a, b) => a.eval(bind) - b.eval(bind),
            Expr::Mul(a, b) => a.eval(bind) * b.eval(bind),
            Expr::Div(a, b) => a.eval(bind).divide(b.eval(bind)),
            Expr::Pow(a, n) => a.eval(bind).powi(*n),
            Expr::Call(f, a) => a.eval(bind).call(*f),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(text: &str) -> std::result::Result<Vec<Token>, String> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(start, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c.is_ascii_digit() || c == '.' {
            let mut end = start;
            let mut previous = ' ';
            while let Some(&(i, d)) = chars.peek() {
                let exponent_sign = (d == '+' || d == '-') && (previous == 'e' || previous == 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exponent_sign {
                    end = i + d.len_utf8();
                    previous = d;
                    chars.next();
                } else {
                    break;
                }
            }
            let literal = &text[start..end];
            let value = literal
                .parse()
                .map_err(|_| format!("bad number `{literal}`"))?;
            tokens.push(Token::Num(value));
        } else if c.is_ascii_alphabetic() {
            let mut end = start;
            while let Some(&(i, d)) = chars.peek() {
                if d.is_ascii_alphanumeric() || d == '_' {
                    end = i + 1;
                    chars.next();
                } else {
                    break;
                }
            }
            tokens.push(Token::Ident(text[start..end].to_string()));
        } else if "+-*/^()".contains(c) {
            tokens.push(Token::Op(c));
            chars.next();
        } else {
            return Err(format!("unexpected character `{c}`"));
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    allowed: &'a [Sym],
}

impl Parser<'_> {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, op: char) -> std::result::Result<(), String> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(format!("expected `{op}`"))
        }
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> std::result::Result<Expr, String> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    // term := unary (('*' | '/') unary)*
    fn term(&mut self) -> std::result::Result<Expr, String> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> std::result::Result<Expr, String> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.peek_op() == Some('+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    // power := atom ('^' '-'? integer)?
    fn power(&mut self) -> std::result::Result<Expr, String> {
        let base = self.atom()?;
        if self.peek_op() != Some('^') {
            return Ok(base);
        }
        self.pos += 1;
        let negative = self.peek_op() == Some('-');
        if negative {
            self.pos += 1;
        }
        match self.tokens.get(self.pos) {
            Some(Token::Num(n)) if n.fract() == 0.0 && n.abs() <= 64.0 => {
                self.pos += 1;
                let n = *n as i32;
                Ok(Expr::Pow(Box::new(base), if negative { -n } else { n }))
            }
            _ => Err("exponent must be an integer literal up to 64".into()),
        }
    }

    fn atom(&mut self) -> std::result::Result<Expr, String> {
        let token = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        match token {
            Some(Token::Num(v)) => Ok(Expr::Num(v)),
            Some(Token::Op('(')) => {
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                let func = match name.as_str() {
                    "exp" => Some(Func::Exp),
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "tanh" => Some(Func::Tanh),
                    _ => None,
                };
                if let Some(func) = func {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                let sym = match name.as_str() {
                    "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
                    "x" => Sym::X,
                    "s" => Sym::S,
                    "y" => Sym::Y,
                    _ => return Err(format!("unknown name `{name}`")),
                };
                if !self.allowed.contains(&sym) {
                    return Err(format!("variable `{name}` is not allowed here"));
                }
                Ok(Expr::Sym(sym))
            }
            Some(Token::Op(c)) => Err(format!("unexpected `{c}`")),
            None => Err("unexpected end of expression".into()),
        }
    }
}

fn parse_expr(text: &str, allowed: &[Sym]) -> std::result::Result<Expr, String> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err("empty expression".into());
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        allowed,
    };
    let expr = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err("trailing input after expression".into());
    }
    Ok(expr)
}

const KEYS: [&str; 10] = [
    "name",
    "g",
    "xi1",
    "k1",
    "phi1",
    "xi2",
    "k2",
    "phi2",
    "exact",
    "singular_at_zero",
];

/// Reads a problem definition. Parse errors carry the 1-based line number;
/// validation failures of the assembled problem are `InvalidProblem`.
pub fn parse_problem<T: Real>(text: &str) -> Result<ProblemSpec<T>> {
    let mut entries: HashMap<&str, (usize, &str)> = HashMap::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line, message };
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err("expected `key = value`".into()))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(err(format!("unknown key `{key}`")));
        }
        if entries.insert(key, (line, value.trim())).is_some() {
            return Err(err(format!("duplicate key `{key}`")));
        }
    }

    let expr = |key: &str, allowed: &[Sym]| -> Result<Option<Arc<Expr>>> {
        entries
            .get(key)
            .map(|&(line, value)| {
                parse_expr(value, allowed)
                    .map(Arc::new)
                    .map_err(|message| Error::Parse {
                        line,
                        message: format!("{key}: {message}"),
                    })
            })
            .transpose()
    };
    let number = |key: &str| -> Result<Option<T>> {
        // constants may be written as expressions, e.g. `xi1 = 1/2`
        Ok(expr(key, &[])?.map(|e| e.eval::<T, T>(&|_| unreachable!("no variables allowed"))))
    };

    let name = entries.get("name").map_or("custom", |&(_, v)| v).to_string();
    let forcing = expr("g", &[Sym::X])?.ok_or_else(|| Error::Parse {
        line: 0,
        message: "missing required key `g`".into(),
    })?;
    let mut builder = ProblemSpec::builder(name, move |x: T| forcing.eval::<T, T>(&|_| x));

    for (xi_key, k_key, phi_key) in [("xi1", "k1", "phi1"), ("xi2", "k2", "phi2")] {
        let kernel = expr(k_key, &[Sym::X, Sym::S])?;
        let phi = expr(phi_key, &[Sym::S, Sym::Y])?;
        let xi = number(xi_key)?;
        let Some(kernel) = kernel else {
            if let Some(&(line, _)) = entries.get(phi_key).or_else(|| entries.get(xi_key)) {
                return Err(Error::Parse {
                    line,
                    message: format!("`{xi_key}`/`{phi_key}` given without kernel `{k_key}`"),
                });
            }
            continue;
        };
        let xi = xi.unwrap_or_else(T::one);
        if xi == T::zero() {
            continue;
        }
        let phi = phi.unwrap_or_else(|| Arc::new(Expr::Sym(Sym::Y)));
        let k = move |x: T, s: T| kernel.eval::<T, T>(&|sym| if sym == Sym::X { x } else { s });
        if xi_key == "xi1" {
            builder = builder.volterra(xi, k, move |s, y| {
                phi.eval(&|sym| if sym == Sym::Y { y } else { Var::constant(s) })
            });
        } else {
            builder = builder.fredholm(xi, k, move |s, y| {
                phi.eval(&|sym| if sym == Sym::Y { y } else { Var::constant(s) })
            });
        }
    }

    if let Some(exact) = expr("exact", &[Sym::X])? {
        builder = builder.exact(move |x: T| exact.eval::<T, T>(&|_| x));
    }
    if let Some(&(line, value)) = entries.get("singular_at_zero") {
        match value {
            "true" => builder = builder.singular_at_origin(),
            "false" => {}
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("singular_at_zero: expected true or false, got `{other}`"),
                })
            }
        }
    }
    builder.build()
}
