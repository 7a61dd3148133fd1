//! Small arithmetic expression grammar for inline field specs: literals,
//! + − * / and ^ (right-associative), unary minus, sin/cos/exp/log/sqrt,
//! the constants pi and e, and coordinates x1..xn.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Coord(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

#[derive(Debug, Clone)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at column {}: {}", self.offset + 1, self.message)
    }
}

impl Expr {
    pub fn eval(&self, coords: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Coord(i) => coords[*i],
            Expr::Neg(e) => -e.eval(coords),
            Expr::Add(a, b) => a.eval(coords) + b.eval(coords),
            Expr::Sub(a, b) => a.eval(coords) - b.eval(coords),
            Expr::Mul(a, b) => a.eval(coords) * b.eval(coords),
            Expr::Div(a, b) => a.eval(coords) / b.eval(coords),
            Expr::Pow(a, b) => a.eval(coords).powf(b.eval(coords)),
            Expr::Call(f, e) => {
                let v = e.eval(coords);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Log => v.ln(),
                    Func::Sqrt => v.sqrt(),
                }
            }
        }
    }

    /// Highest coordinate index mentioned, if any.
    pub fn max_coord(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Coord(i) => Some(*i),
            Expr::Neg(e) | Expr::Call(_, e) => e.max_coord(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b)
            | Expr::Pow(a, b) => match (a.max_coord(), b.max_coord()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // unary minus binds looser than `^`: -x^2 is -(x^2)
    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?; // right-associative, negatives allowed
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.err("expected `)`");
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => self.err(format!("unexpected character `{}`", c as char)),
            None => self.err("unexpected end of expression"),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit()
                || self.src[self.pos] == b'.'
                || self.src[self.pos] == b'e'
                || self.src[self.pos] == b'E'
                || ((self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
                    && self.pos > start
                    && (self.src[self.pos - 1] == b'e' || self.src[self.pos - 1] == b'E')))
        {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match text.parse::<f64>() {
            Ok(v) => Ok(Expr::Num(v)),
            Err(_) => {
                self.pos = start;
                self.err(format!("bad numeric literal `{text}`"))
            }
        }
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match name {
            "pi" => Ok(Expr::Num(std::f64::consts::PI)),
            "e" => Ok(Expr::Num(std::f64::consts::E)),
            "sin" | "cos" | "exp" | "log" | "sqrt" => {
                let f = match name {
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "log" => Func::Log,
                    _ => Func::Sqrt,
                };
                if self.peek() != Some(b'(') {
                    return self.err(format!("function `{name}` needs parentheses"));
                }
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.err("expected `)` after function argument");
                }
                self.pos += 1;
                Ok(Expr::Call(f, Box::new(arg)))
            }
            _ => {
                // coordinates x1..xn
                if let Some(rest) = name.strip_prefix('x') {
                    if let Ok(k) = rest.parse::<usize>() {
                        if k >= 1 {
                            return Ok(Expr::Coord(k - 1));
                        }
                    }
                }
                self.pos = start;
                self.err(format!(
                    "unknown identifier `{name}` (coordinates are x1..xn; functions: sin cos exp log sqrt)"
                ))
            }
        }
    }
}

pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return p.err("trailing input after expression");
    }
    Ok(e)
}
