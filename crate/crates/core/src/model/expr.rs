//! Scalar expressions over the measured signals `u` and `y`.
//!
//! Every entry of a model mapping is one of these. The grammar is small on
//! purpose:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | u<i> | y<i> | func '(' expr ')' | '(' expr ')'
//! func  := sin | cos | tanh | exp | abs | sqrt
//! ```
//!
//! Signal indices are 1-based in the text form (`u1`, `y2`) and 0-based in
//! the AST.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tanh,
    Exp,
    Abs,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tanh => v.tanh(),
            Func::Exp => v.exp(),
            Func::Abs => v.abs(),
            Func::Sqrt => v.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Input(usize),
    Output(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl From<f64> for Expr {
    fn from(v: f64) -> Self {
        Expr::Const(v)
    }
}

impl Expr {
    pub fn input(index: usize) -> Self {
        Expr::Input(index)
    }

    pub fn output(index: usize) -> Self {
        Expr::Output(index)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let tokens = tokenize(text)?;
        let mut parser = Parser { text, tokens, pos: 0 };
        let expr = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(parser.error("trailing input"));
        }
        Ok(expr)
    }

    pub fn eval(&self, u: &[f64], y: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Input(i) => u[*i],
            Expr::Output(i) => y[*i],
            Expr::Neg(a) => -a.eval(u, y),
            Expr::Add(a, b) => a.eval(u, y) + b.eval(u, y),
            Expr::Sub(a, b) => a.eval(u, y) - b.eval(u, y),
            Expr::Mul(a, b) => a.eval(u, y) * b.eval(u, y),
            Expr::Div(a, b) => a.eval(u, y) / b.eval(u, y),
            Expr::Pow(a, b) => a.eval(u, y).powf(b.eval(u, y)),
            Expr::Call(f, a) => f.apply(a.eval(u, y)),
        }
    }

    /// Returns the constant value when the expression does not depend on any
    /// signal.
    pub fn as_constant(&self) -> Option<f64> {
        if self.max_input().is_none() && self.max_output().is_none() {
            Some(self.eval(&[], &[]))
        } else {
            None
        }
    }

    pub fn max_input(&self) -> Option<usize> {
        self.fold_index(&|e| match e {
            Expr::Input(i) => Some(*i),
            _ => None,
        })
    }

    pub fn max_output(&self) -> Option<usize> {
        self.fold_index(&|e| match e {
            Expr::Output(i) => Some(*i),
            _ => None,
        })
    }

    fn fold_index(&self, leaf: &dyn Fn(&Expr) -> Option<usize>) -> Option<usize> {
        match self {
            Expr::Const(_) | Expr::Input(_) | Expr::Output(_) => leaf(self),
            Expr::Neg(a) | Expr::Call(_, a) => a.fold_index(leaf),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                match (a.fold_index(leaf), b.fold_index(leaf)) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Input(i) => write!(f, "u{}", i + 1),
            Expr::Output(i) => write!(f, "y{}", i + 1),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let err = |message: String| Error::Expression {
        source_text: text.to_string(),
        message,
    };
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '+' | '-' | '*' | '/' | '^' => {
                tokens.push(Token::Op(c));
                i += 1;
            }
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                // exponent part: 1e-3, 2.5E+4
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
                let lexeme: String = chars[start..i].iter().collect();
                let value = lexeme.parse::<f64>().map_err(|_| err(format!("bad number `{lexeme}`")))?;
                tokens.push(Token::Num(value));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                tokens.push(Token::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(err(format!("unexpected character `{other}`"))),
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    text: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Expression {
            source_text: self.text.to_string(),
            message: format!("{message} at token {}", self.pos),
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek().cloned() {
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

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek().cloned() {
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

    fn unary(&mut self) -> Result<Expr> {
        if let Some(Token::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(match self.unary()? {
                Expr::Const(c) => Expr::Const(-c),
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::LParen) => {
                let e = self.expr()?;
                match self.next() {
                    Some(Token::RParen) => Ok(e),
                    _ => Err(self.error("expected `)`")),
                }
            }
            Some(Token::Ident(name)) => {
                if let Some(func) = Func::from_name(&name) {
                    if self.next() != Some(Token::LParen) {
                        return Err(self.error("expected `(` after function name"));
                    }
                    let arg = self.expr()?;
                    if self.next() != Some(Token::RParen) {
                        return Err(self.error("expected `)`"));
                    }
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                signal_ref(&name).ok_or_else(|| self.error(&format!("unknown identifier `{name}`")))
            }
            _ => Err(self.error("expected a number, signal, function or `(`")),
        }
    }
}

fn signal_ref(name: &str) -> Option<Expr> {
    let (kind, digits) = name.split_at(1);
    let index: usize = digits.parse().ok()?;
    if index == 0 {
        return None;
    }
    match kind {
        "u" => Some(Expr::Input(index - 1)),
        "y" => Some(Expr::Output(index - 1)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_evaluates() {
        let e = Expr::parse("2*u1 - y2/4 + sin(0)").unwrap();
        assert_eq!(e.eval(&[3.0], &[0.0, 8.0]), 4.0);
        let e = Expr::parse("-u2^2").unwrap();
        assert_eq!(e.eval(&[0.0, 3.0], &[]), -9.0);
        let e = Expr::parse("1e-3 * (1 + 2.5E+1)").unwrap();
        assert!((e.eval(&[], &[]) - 0.026).abs() < 1e-15);
    }

    #[test]
    fn constants_fold() {
        assert_eq!(Expr::parse("-1").unwrap(), Expr::Const(-1.0));
        assert_eq!(Expr::parse("cos(0) * 2").unwrap().as_constant(), Some(2.0));
        assert_eq!(Expr::parse("u1").unwrap().as_constant(), None);
    }

    #[test]
    fn tracks_signal_indices() {
        let e = Expr::parse("u1 * y3 + u2").unwrap();
        assert_eq!(e.max_input(), Some(1));
        assert_eq!(e.max_output(), Some(2));
        assert_eq!(Expr::Const(1.0).max_input(), None);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "u0", "x1", "sin 1", "(1 + 2", "1 2", "3 $ 4", "foo(1)"] {
            assert!(Expr::parse(bad).is_err(), "{bad:?} should not parse");
        }
    }

    #[test]
    fn display_reparses() {
        let e = Expr::parse("tanh(y1) * -u2 + 0.5").unwrap();
        let again = Expr::parse(&e.to_string()).unwrap();
        assert_eq!(e.eval(&[0.1, 0.7], &[0.3]), again.eval(&[0.1, 0.7], &[0.3]));
    }
}
