//! Scalar arithmetic expressions over named real variables.
//!
//! Used for user-defined Bloch vectors and for numeric configuration values
//! such as `"pi/2"`. Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('+' | '-') unary | power
//! power  := atom ('^' unary)?
//! atom   := number | name | name '(' expr ')' | '(' expr ')'
//! ```
//!
//! Names resolve to the bound variables first, then to the constants `pi`,
//! `tau` and `e`.

use std::fmt;

use thiserror::Error;

/// Inputs longer than this are rejected before lexing.
pub const MAX_SOURCE_LEN: usize = 4096;
/// Maximum nesting of parentheses, unary operators and function calls.
pub const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("expression error at byte {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl ParseError {
    fn new(position: usize, message: impl Into<String>) -> Self {
        Self {
            position,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sinh,
    Cosh,
    Tanh,
}

impl Func {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            Func::Ln => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Tanh => x.tanh(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Node::Num(x) => *x,
            Node::Var(i) => vars[*i],
            Node::Neg(a) => -a.eval(vars),
            Node::Add(a, b) => a.eval(vars) + b.eval(vars),
            Node::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Node::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Node::Div(a, b) => a.eval(vars) / b.eval(vars),
            Node::Pow(a, b) => a.eval(vars).powf(b.eval(vars)),
            Node::Call(f, a) => f.apply(a.eval(vars)),
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, names: &[String]) -> fmt::Result {
        match self {
            Node::Num(x) => write!(f, "{x:?}"),
            Node::Var(i) => write!(f, "{}", names[*i]),
            Node::Neg(a) => {
                write!(f, "(-")?;
                a.write(f, names)?;
                write!(f, ")")
            }
            Node::Add(a, b) => binary(f, names, a, "+", b),
            Node::Sub(a, b) => binary(f, names, a, "-", b),
            Node::Mul(a, b) => binary(f, names, a, "*", b),
            Node::Div(a, b) => binary(f, names, a, "/", b),
            Node::Pow(a, b) => binary(f, names, a, "^", b),
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write(f, names)?;
                write!(f, ")")
            }
        }
    }
}

fn binary(
    f: &mut fmt::Formatter<'_>,
    names: &[String],
    a: &Node,
    op: &str,
    b: &Node,
) -> fmt::Result {
    write!(f, "(")?;
    a.write(f, names)?;
    write!(f, "{op}")?;
    b.write(f, names)?;
    write!(f, ")")
}

/// A parsed expression bound to an ordered list of variable names.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    vars: Vec<String>,
}

impl Expr {
    /// Parses `source` with the given variable names. Variables shadow the
    /// built-in constants.
    pub fn parse(source: &str, vars: &[&str]) -> Result<Self, ParseError> {
        if source.len() > MAX_SOURCE_LEN {
            return Err(ParseError::new(MAX_SOURCE_LEN, "expression too long"));
        }
        let tokens = lex(source)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            vars,
            depth: 0,
            end: source.len(),
        };
        let root = parser.expr()?;
        if let Some(tok) = parser.peek() {
            return Err(ParseError::new(tok.at, "unexpected trailing input"));
        }
        Ok(Self {
            root,
            vars: vars.iter().map(|s| s.to_string()).collect(),
        })
    }

    /// Parses a closed expression (no variables) and evaluates it.
    pub fn constant(source: &str) -> Result<f64, ParseError> {
        Ok(Self::parse(source, &[])?.eval(&[]))
    }

    pub fn variables(&self) -> &[String] {
        &self.vars
    }

    /// Evaluates with `values[i]` bound to the i-th variable.
    ///
    /// # Panics
    /// If fewer values than variables are supplied.
    pub fn eval(&self, values: &[f64]) -> f64 {
        assert!(values.len() >= self.vars.len(), "missing variable values");
        self.root.eval(values)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.write(f, &self.vars)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Num(f64),
    Ident(&'a str),
    Op(u8),
}

#[derive(Debug, Clone)]
struct Token<'a> {
    tok: Tok<'a>,
    at: usize,
}

fn lex(src: &str) -> Result<Vec<Token<'_>>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
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
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let value: f64 = text
                .parse()
                .map_err(|_| ParseError::new(start, format!("malformed number `{text}`")))?;
            out.push(Token {
                tok: Tok::Num(value),
                at: start,
            });
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(&src[start..i]),
                at: start,
            });
        } else if b"+-*/^()".contains(&c) {
            out.push(Token {
                tok: Tok::Op(c),
                at: i,
            });
            i += 1;
        } else {
            // report the full (possibly multi-byte) character
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(ParseError::new(i, format!("unexpected character `{ch}`")));
        }
    }
    Ok(out)
}

struct Parser<'t, 'a> {
    tokens: &'t [Token<'a>],
    pos: usize,
    vars: &'t [&'t str],
    depth: usize,
    end: usize,
}

impl<'t, 'a> Parser<'t, 'a> {
    fn peek(&self) -> Option<&Token<'a>> {
        self.tokens.get(self.pos)
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.end, |t| t.at)
    }

    fn eat_op(&mut self, op: u8) -> bool {
        if matches!(self.peek(), Some(Token { tok: Tok::Op(c), .. }) if *c == op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            Err(ParseError::new(self.here(), "expression nested too deeply"))
        } else {
            Ok(())
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op(b'+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_op(b'-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op(b'*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_op(b'/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        self.enter()?;
        let node = if self.eat_op(b'-') {
            Node::Neg(Box::new(self.unary()?))
        } else if self.eat_op(b'+') {
            self.unary()?
        } else {
            self.power()?
        };
        self.depth -= 1;
        Ok(node)
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.eat_op(b'^') {
            let exponent = self.unary()?;
            Ok(Node::Pow(Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let at = self.here();
        let Some(token) = self.peek().cloned() else {
            return Err(ParseError::new(at, "unexpected end of expression"));
        };
        self.pos += 1;
        match token.tok {
            Tok::Num(x) => Ok(Node::Num(x)),
            Tok::Op(b'(') => {
                self.enter()?;
                let inner = self.expr()?;
                if !self.eat_op(b')') {
                    return Err(ParseError::new(self.here(), "expected `)`"));
                }
                self.depth -= 1;
                Ok(inner)
            }
            Tok::Op(c) => Err(ParseError::new(at, format!("unexpected `{}`", c as char))),
            Tok::Ident(name) => {
                if let Some(func) = Func::lookup(name) {
                    if !self.eat_op(b'(') {
                        return Err(ParseError::new(
                            self.here(),
                            format!("expected `(` after `{name}`"),
                        ));
                    }
                    self.enter()?;
                    let arg = self.expr()?;
                    if !self.eat_op(b')') {
                        return Err(ParseError::new(self.here(), "expected `)`"));
                    }
                    self.depth -= 1;
                    return Ok(Node::Call(func, Box::new(arg)));
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Node::Var(i));
                }
                match name {
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "tau" => Ok(Node::Num(std::f64::consts::TAU)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    _ => Err(ParseError::new(at, format!("unknown name `{name}`"))),
                }
            }
        }
    }
}
