//! Small expression language for closed-form symbols.
//!
//! Variables: `k1..kn`, `x1..xn` (`k`, `x` alias the first axis), `|k|`,
//! constants `pi`, `i`, numbers. Operators `+ - * / ^` with the usual
//! precedence (`^` binds tightest and is right-associative). Functions:
//! `cos sin exp sqrt abs conj re im Lambda(s)`, where `Lambda(s)` is
//! `(1+|k|²)^{s/2}`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Ast {
    Num(Complex64),
    K(usize),
    X(usize),
    NormK,
    Neg(Box<Ast>),
    Bin(Op, Box<Ast>, Box<Ast>),
    Call(Func, Box<Ast>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Cos,
    Sin,
    Exp,
    Sqrt,
    Abs,
    Conj,
    Re,
    Im,
    Lambda,
}

/// A parsed closed-form symbol expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExprRepr", into = "ExprRepr")]
pub struct Expression {
    source: String,
    dim: usize,
    ast: Ast,
}

#[derive(Serialize, Deserialize)]
struct ExprRepr {
    source: String,
    dim: usize,
}

impl TryFrom<ExprRepr> for Expression {
    type Error = Error;
    fn try_from(r: ExprRepr) -> Result<Self> {
        Expression::parse(&r.source, r.dim)
    }
}

impl From<Expression> for ExprRepr {
    fn from(e: Expression) -> Self {
        ExprRepr {
            source: e.source,
            dim: e.dim,
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expression {
    pub fn parse(source: &str, dim: usize) -> Result<Self> {
        let tokens = lex(source)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            dim,
            len: source.len(),
        };
        let ast = p.expr()?;
        if let Some((pos, t)) = p.tokens.get(p.pos) {
            return Err(Error::Parse {
                pos: *pos,
                msg: format!("unexpected {t:?}"),
            });
        }
        Ok(Expression {
            source: source.to_string(),
            dim,
            ast,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Whether the expression mentions no torus variable.
    pub fn is_x_independent(&self) -> bool {
        fn walk(a: &Ast) -> bool {
            match a {
                Ast::X(_) => false,
                Ast::Num(_) | Ast::K(_) | Ast::NormK => true,
                Ast::Neg(a) | Ast::Call(_, a) => walk(a),
                Ast::Bin(_, a, b) => walk(a) && walk(b),
            }
        }
        walk(&self.ast)
    }

    pub fn eval(&self, k: &[i64], x: &[f64]) -> Complex64 {
        eval(&self.ast, k, x)
    }
}

fn eval(a: &Ast, k: &[i64], x: &[f64]) -> Complex64 {
    match a {
        Ast::Num(c) => *c,
        Ast::K(j) => Complex64::new(k[*j] as f64, 0.0),
        Ast::X(j) => Complex64::new(x[*j], 0.0),
        Ast::NormK => Complex64::new(crate::lattice::norm(k), 0.0),
        Ast::Neg(a) => -eval(a, k, x),
        Ast::Bin(op, l, r) => {
            let l = eval(l, k, x);
            let r = eval(r, k, x);
            match op {
                Op::Add => l + r,
                Op::Sub => l - r,
                Op::Mul => l * r,
                Op::Div => l / r,
                Op::Pow => pow(l, r),
            }
        }
        Ast::Call(f, a) => {
            let v = eval(a, k, x);
            match f {
                Func::Cos => v.cos(),
                Func::Sin => v.sin(),
                Func::Exp => v.exp(),
                Func::Sqrt => v.sqrt(),
                Func::Abs => Complex64::new(v.norm(), 0.0),
                Func::Conj => v.conj(),
                Func::Re => Complex64::new(v.re, 0.0),
                Func::Im => Complex64::new(v.im, 0.0),
                Func::Lambda => Complex64::new(crate::lattice::japanese_bracket(k, v.re), 0.0),
            }
        }
    }
}

fn pow(b: Complex64, e: Complex64) -> Complex64 {
    if e.im == 0.0 {
        if e.re.fract() == 0.0 && e.re.abs() < 64.0 {
            return b.powi(e.re as i32);
        }
        if b.im == 0.0 && b.re >= 0.0 {
            return Complex64::new(b.re.powf(e.re), 0.0);
        }
        return b.powf(e.re);
    }
    b.powc(e)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    NormK,
    Sym(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit()
            || (c == '.' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit())
        {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v = text.parse::<f64>().map_err(|_| Error::Parse {
                pos: start,
                msg: format!("bad number `{text}`"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if src[i..].starts_with("|k|") {
            out.push((i, Tok::NormK));
            i += 3;
        } else if "+-*/^(),".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(Error::Parse {
                pos: i,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    dim: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(p, _)| *p)
            .unwrap_or(self.len)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::Parse {
                pos: self.here(),
                msg: format!("expected `{c}`"),
            })
        }
    }

    fn expr(&mut self) -> Result<Ast> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Ast::Bin(Op::Add, Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Ast::Bin(Op::Sub, Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Ast> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Ast::Bin(Op::Mul, Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Ast::Bin(Op::Div, Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Ast> {
        if self.eat('-') {
            return Ok(Ast::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        let base = self.atom()?;
        if self.eat('^') {
            let e = self.unary()?;
            return Ok(Ast::Bin(Op::Pow, Box::new(base), Box::new(e)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Ast> {
        let pos = self.here();
        let tok = self.peek().cloned().ok_or(Error::Parse {
            pos,
            msg: "unexpected end of expression".into(),
        })?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Ast::Num(Complex64::new(v, 0.0))),
            Tok::NormK => Ok(Ast::NormK),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Sym(c) => Err(Error::Parse {
                pos,
                msg: format!("unexpected `{c}`"),
            }),
            Tok::Ident(name) => self.ident(&name, pos),
        }
    }

    fn axis(&self, name: &str, digits: &str, pos: usize) -> Result<usize> {
        let j = if digits.is_empty() {
            1
        } else {
            digits.parse::<usize>().map_err(|_| Error::Parse {
                pos,
                msg: format!("unknown identifier `{name}`"),
            })?
        };
        if j == 0 || j > self.dim {
            return Err(Error::Parse {
                pos,
                msg: format!(
                    "`{name}` refers to axis {j} but the symbol has dimension {}",
                    self.dim
                ),
            });
        }
        Ok(j - 1)
    }

    fn ident(&mut self, name: &str, pos: usize) -> Result<Ast> {
        let func = match name {
            "cos" => Some(Func::Cos),
            "sin" => Some(Func::Sin),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            "abs" => Some(Func::Abs),
            "conj" => Some(Func::Conj),
            "re" => Some(Func::Re),
            "im" => Some(Func::Im),
            "Lambda" | "lambda" => Some(Func::Lambda),
            _ => None,
        };
        if let Some(f) = func {
            self.expect('(')?;
            let arg = self.expr()?;
            self.expect(')')?;
            return Ok(Ast::Call(f, Box::new(arg)));
        }
        match name {
            "pi" => return Ok(Ast::Num(Complex64::new(std::f64::consts::PI, 0.0))),
            "i" => return Ok(Ast::Num(Complex64::new(0.0, 1.0))),
            _ => {}
        }
        if let Some(rest) = name.strip_prefix('k') {
            if rest.chars().all(|c| c.is_ascii_digit()) {
                return Ok(Ast::K(self.axis(name, rest, pos)?));
            }
        }
        if let Some(rest) = name.strip_prefix('x') {
            if rest.chars().all(|c| c.is_ascii_digit()) {
                return Ok(Ast::X(self.axis(name, rest, pos)?));
            }
        }
        Err(Error::Parse {
            pos,
            msg: format!("unknown identifier `{name}`"),
        })
    }
}
