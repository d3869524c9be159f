//! Scalar expressions in x, eps, and the nodal derivative values y0..y4.
//!
//! Grammar (no implicit multiplication, `^` right-associative, unary minus
//! binding looser than `^` so "-x^2" is −(x²)):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base
//! base   := atom ('^' factor)?
//! atom   := number | symbol | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! Symbols: `x`, `eps`, `pi`, `y0`..`y4`. Functions: sin, cos, exp, log,
//! sqrt, abs. Errors carry byte offsets into the source text.

use crate::{Error, Result};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symbol {
    X,
    Eps,
    /// The k-th derivative value at a node, k in 0..=4.
    Y(u8),
}

impl Symbol {
    pub fn name(self) -> &'static str {
        match self {
            Symbol::X => "x",
            Symbol::Eps => "eps",
            Symbol::Y(0) => "y0",
            Symbol::Y(1) => "y1",
            Symbol::Y(2) => "y2",
            Symbol::Y(3) => "y3",
            Symbol::Y(4) => "y4",
            Symbol::Y(_) => unreachable!("derivative symbols stop at y4"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn glyph(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Sym(Symbol),
    Pi,
    Neg {
        arg: Box<Expr>,
        pos: usize,
    },
    Bin {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        pos: usize,
    },
    Call {
        func: Func,
        arg: Box<Expr>,
        pos: usize,
    },
}

/// Bindings for evaluation. Symbols left unbound produce an error when the
/// expression actually references them.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalContext {
    pub x: Option<f64>,
    pub eps: Option<f64>,
    pub y: [Option<f64>; 5],
}

impl EvalContext {
    pub fn new() -> EvalContext {
        EvalContext::default()
    }

    pub fn with_x(mut self, v: f64) -> EvalContext {
        self.x = Some(v);
        self
    }

    pub fn with_eps(mut self, v: f64) -> EvalContext {
        self.eps = Some(v);
        self
    }

    pub fn with_y(mut self, k: usize, v: f64) -> EvalContext {
        self.y[k] = Some(v);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Lexer<'a> {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next token plus its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize)> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::End, start));
        }
        let c = self.src[self.pos];
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = single {
            self.pos += 1;
            return Ok((t, start));
        }
        if c.is_ascii_digit() || (c == b'.' && self.peek_digit(self.pos + 1)) {
            return Ok((self.lex_number(start)?, start));
        }
        if c.is_ascii_alphabetic() {
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[start..self.pos])
                .expect("identifier bytes are ASCII")
                .to_string();
            return Ok((Tok::Ident(name), start));
        }
        Err(Error::Parse {
            pos: start,
            msg: format!("unexpected character '{}'", c as char),
        })
    }

    fn peek_digit(&self, at: usize) -> bool {
        at < self.src.len() && self.src[at].is_ascii_digit()
    }

    fn lex_number(&mut self, start: usize) -> Result<Tok> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        // Consume an exponent only when it is actually one: 'e' or 'E'
        // followed by a digit, or by a sign and a digit. This keeps "2eps"
        // from lexing as a malformed number.
        if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
            let after = self.pos + 1;
            if self.peek_digit(after) {
                self.pos = after + 1;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else if after < self.src.len()
                && (self.src[after] == b'+' || self.src[after] == b'-')
                && self.peek_digit(after + 1)
            {
                self.pos = after + 2;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("number bytes are ASCII");
        text.parse::<f64>().map(Tok::Num).map_err(|_| Error::Parse {
            pos: start,
            msg: format!("malformed number '{text}'"),
        })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    current: (Tok, usize),
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Parser<'a>> {
        let mut lexer = Lexer::new(src);
        let current = lexer.next()?;
        Ok(Parser { lexer, current })
    }

    fn advance(&mut self) -> Result<(Tok, usize)> {
        let next = self.lexer.next()?;
        Ok(std::mem::replace(&mut self.current, next))
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.current.0 {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let (_, pos) = self.advance()?;
            let rhs = self.term()?;
            lhs = Expr::Bin {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                pos,
            };
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.current.0 {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            let (_, pos) = self.advance()?;
            let rhs = self.factor()?;
            lhs = Expr::Bin {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                pos,
            };
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.current.0 == Tok::Minus {
            let (_, pos) = self.advance()?;
            let arg = self.factor()?;
            return Ok(Expr::Neg {
                arg: Box::new(arg),
                pos,
            });
        }
        let base = self.atom()?;
        if self.current.0 == Tok::Caret {
            let (_, pos) = self.advance()?;
            let exponent = self.factor()?;
            return Ok(Expr::Bin {
                op: BinOp::Pow,
                lhs: Box::new(base),
                rhs: Box::new(exponent),
                pos,
            });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let (tok, pos) = self.advance()?;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                let (close, cpos) = self.advance()?;
                if close != Tok::RParen {
                    return Err(Error::Parse {
                        pos: cpos,
                        msg: "expected ')'".to_string(),
                    });
                }
                Ok(inner)
            }
            Tok::Ident(name) => self.resolve_ident(&name, pos),
            other => Err(Error::Parse {
                pos,
                msg: format!("expected a value, found {}", describe(&other)),
            }),
        }
    }

    fn resolve_ident(&mut self, name: &str, pos: usize) -> Result<Expr> {
        let symbol = match name {
            "x" => Some(Expr::Sym(Symbol::X)),
            "eps" => Some(Expr::Sym(Symbol::Eps)),
            "pi" => Some(Expr::Pi),
            "y0" => Some(Expr::Sym(Symbol::Y(0))),
            "y1" => Some(Expr::Sym(Symbol::Y(1))),
            "y2" => Some(Expr::Sym(Symbol::Y(2))),
            "y3" => Some(Expr::Sym(Symbol::Y(3))),
            "y4" => Some(Expr::Sym(Symbol::Y(4))),
            _ => None,
        };
        if let Some(e) = symbol {
            return Ok(e);
        }
        let func = match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sqrt" => Some(Func::Sqrt),
            "abs" => Some(Func::Abs),
            _ => None,
        };
        match func {
            Some(f) => {
                let (open, opos) = self.advance()?;
                if open != Tok::LParen {
                    return Err(Error::Parse {
                        pos: opos,
                        msg: format!("function '{name}' requires '('"),
                    });
                }
                let arg = self.expr()?;
                let (close, cpos) = self.advance()?;
                if close != Tok::RParen {
                    return Err(Error::Parse {
                        pos: cpos,
                        msg: "expected ')'".to_string(),
                    });
                }
                Ok(Expr::Call {
                    func: f,
                    arg: Box::new(arg),
                    pos,
                })
            }
            None => Err(Error::UnknownSymbol {
                pos,
                name: name.to_string(),
            }),
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier '{s}'"),
        Tok::End => "end of input".to_string(),
        Tok::Plus => "'+'".to_string(),
        Tok::Minus => "'-'".to_string(),
        Tok::Star => "'*'".to_string(),
        Tok::Slash => "'/'".to_string(),
        Tok::Caret => "'^'".to_string(),
        Tok::LParen => "'('".to_string(),
        Tok::RParen => "')'".to_string(),
    }
}

pub fn parse(source: &str) -> Result<Expr> {
    let mut parser = Parser::new(source)?;
    let e = parser.expr()?;
    let (trailing, pos) = parser.advance()?;
    if trailing != Tok::End {
        return Err(Error::Parse {
            pos,
            msg: format!("unexpected trailing {}", describe(&trailing)),
        });
    }
    Ok(e)
}

pub fn evaluate(e: &Expr, ctx: &EvalContext) -> Result<f64> {
    match e {
        Expr::Num(v) => Ok(*v),
        Expr::Pi => Ok(std::f64::consts::PI),
        Expr::Sym(s) => match s {
            Symbol::X => ctx.x.ok_or(Error::UnboundSymbol("x")),
            Symbol::Eps => ctx.eps.ok_or(Error::UnboundSymbol("eps")),
            Symbol::Y(k) => ctx.y[*k as usize].ok_or(Error::UnboundSymbol(Symbol::Y(*k).name())),
        },
        Expr::Neg { arg, .. } => Ok(-evaluate(arg, ctx)?),
        Expr::Bin { op, lhs, rhs, pos } => {
            let a = evaluate(lhs, ctx)?;
            let b = evaluate(rhs, ctx)?;
            match op {
                BinOp::Add => Ok(a + b),
                BinOp::Sub => Ok(a - b),
                BinOp::Mul => Ok(a * b),
                BinOp::Div => {
                    if b == 0.0 {
                        Err(Error::Eval {
                            pos: *pos,
                            msg: "division by zero".to_string(),
                        })
                    } else {
                        Ok(a / b)
                    }
                }
                BinOp::Pow => power(a, b, *pos),
            }
        }
        Expr::Call { func, arg, pos } => {
            let v = evaluate(arg, ctx)?;
            match func {
                Func::Sin => Ok(v.sin()),
                Func::Cos => Ok(v.cos()),
                Func::Exp => Ok(v.exp()),
                Func::Log => {
                    if v <= 0.0 {
                        Err(Error::Eval {
                            pos: *pos,
                            msg: format!("log of non-positive value {v}"),
                        })
                    } else {
                        Ok(v.ln())
                    }
                }
                Func::Sqrt => {
                    if v < 0.0 {
                        Err(Error::Eval {
                            pos: *pos,
                            msg: format!("sqrt of negative value {v}"),
                        })
                    } else {
                        Ok(v.sqrt())
                    }
                }
                Func::Abs => Ok(v.abs()),
            }
        }
    }
}

fn power(base: f64, exponent: f64, pos: usize) -> Result<f64> {
    if base > 0.0 {
        return Ok(base.powf(exponent));
    }
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        if base == 0.0 && exponent < 0.0 {
            return Err(Error::Eval {
                pos,
                msg: "zero raised to a negative power".to_string(),
            });
        }
        return Ok(base.powi(exponent as i32));
    }
    Err(Error::Eval {
        pos,
        msg: format!("non-positive base {base} with non-integer exponent {exponent}"),
    })
}

/// Exact symbolic partial derivative with respect to one symbol. The result
/// is unsimplified but evaluates correctly wherever both the input and the
/// derivative are defined.
pub fn differentiate(e: &Expr, s: Symbol) -> Expr {
    match e {
        Expr::Num(_) | Expr::Pi => Expr::Num(0.0),
        Expr::Sym(t) => Expr::Num(if *t == s { 1.0 } else { 0.0 }),
        Expr::Neg { arg, pos } => Expr::Neg {
            arg: Box::new(differentiate(arg, s)),
            pos: *pos,
        },
        Expr::Bin { op, lhs, rhs, pos } => {
            let pos = *pos;
            let du = differentiate(lhs, s);
            let dv = differentiate(rhs, s);
            match op {
                BinOp::Add => bin(BinOp::Add, du, dv, pos),
                BinOp::Sub => bin(BinOp::Sub, du, dv, pos),
                BinOp::Mul => bin(
                    BinOp::Add,
                    bin(BinOp::Mul, du, (**rhs).clone(), pos),
                    bin(BinOp::Mul, (**lhs).clone(), dv, pos),
                    pos,
                ),
                BinOp::Div => bin(
                    BinOp::Div,
                    bin(
                        BinOp::Sub,
                        bin(BinOp::Mul, du, (**rhs).clone(), pos),
                        bin(BinOp::Mul, (**lhs).clone(), dv, pos),
                        pos,
                    ),
                    bin(BinOp::Mul, (**rhs).clone(), (**rhs).clone(), pos),
                    pos,
                ),
                BinOp::Pow => match **rhs {
                    // Constant exponent: plain power rule, valid for any base
                    // where the original expression is defined.
                    Expr::Num(c) => {
                        if c == 0.0 {
                            Expr::Num(0.0)
                        } else {
                            bin(
                                BinOp::Mul,
                                bin(
                                    BinOp::Mul,
                                    Expr::Num(c),
                                    bin(BinOp::Pow, (**lhs).clone(), Expr::Num(c - 1.0), pos),
                                    pos,
                                ),
                                du,
                                pos,
                            )
                        }
                    }
                    // General case u^v: u^v · (v′·log u + v·u′/u); needs u>0.
                    _ => bin(
                        BinOp::Mul,
                        (*e).clone(),
                        bin(
                            BinOp::Add,
                            bin(
                                BinOp::Mul,
                                dv,
                                Expr::Call {
                                    func: Func::Log,
                                    arg: lhs.clone(),
                                    pos,
                                },
                                pos,
                            ),
                            bin(
                                BinOp::Div,
                                bin(BinOp::Mul, (**rhs).clone(), du, pos),
                                (**lhs).clone(),
                                pos,
                            ),
                            pos,
                        ),
                        pos,
                    ),
                },
            }
        }
        Expr::Call { func, arg, pos } => {
            let pos = *pos;
            let du = differentiate(arg, s);
            let inner = |f: Func| Expr::Call {
                func: f,
                arg: arg.clone(),
                pos,
            };
            let outer = match func {
                Func::Sin => inner(Func::Cos),
                Func::Cos => Expr::Neg {
                    arg: Box::new(inner(Func::Sin)),
                    pos,
                },
                Func::Exp => inner(Func::Exp),
                Func::Log => bin(BinOp::Div, Expr::Num(1.0), (**arg).clone(), pos),
                Func::Sqrt => bin(
                    BinOp::Div,
                    Expr::Num(1.0),
                    bin(BinOp::Mul, Expr::Num(2.0), inner(Func::Sqrt), pos),
                    pos,
                ),
                // d|u| = (u/|u|)·du, undefined at u=0 (division error there).
                Func::Abs => bin(BinOp::Div, (**arg).clone(), inner(Func::Abs), pos),
            };
            bin(BinOp::Mul, outer, du, pos)
        }
    }
}

fn bin(op: BinOp, lhs: Expr, rhs: Expr, pos: usize) -> Expr {
    Expr::Bin {
        op,
        lhs: Box::new(lhs),
        rhs: Box::new(rhs),
        pos,
    }
}

/// Largest derivative index k for which the expression references y_k, or
/// None when it references no y symbol at all.
pub fn max_y_symbol(e: &Expr) -> Option<u8> {
    match e {
        Expr::Num(_) | Expr::Pi => None,
        Expr::Sym(Symbol::Y(k)) => Some(*k),
        Expr::Sym(_) => None,
        Expr::Neg { arg, .. } | Expr::Call { arg, .. } => max_y_symbol(arg),
        Expr::Bin { lhs, rhs, .. } => match (max_y_symbol(lhs), max_y_symbol(rhs)) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        },
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized rendering that re-parses to an equivalent tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Sym(s) => write!(f, "{}", s.name()),
            Expr::Pi => write!(f, "pi"),
            Expr::Neg { arg, .. } => write!(f, "(-{arg})"),
            Expr::Bin { op, lhs, rhs, .. } => write!(f, "({lhs} {} {rhs})", op.glyph()),
            Expr::Call { func, arg, .. } => write!(f, "{}({arg})", func.name()),
        }
    }
}
