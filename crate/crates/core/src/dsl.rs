//! Text grammars for sequences, index sets and interval families.
//!
//! Sequences:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' ('-'? integer | 'n'))?
//! atom   := number | 'n' | '(' expr ')'
//!         | 'per' '[' const (',' const)* ']'
//!         | 'prefix' '[' const (',' const)* ';' expr ']'
//!         | 'ifmod' '(' integer ',' integer ';' expr ';' expr ')'
//!         | 'rand' '(' integer ',' const ',' const ')'
//!         | 'inv' '(' expr ')'
//! ```
//!
//! Arithmetic between constants is folded, so `-3/4` is a single literal.
//! `c^n` is accepted for `c = ±1` only and becomes a periodic pattern.
//!
//! Index sets: `finite{..}`, `cofinite_except{..}`, `mod(m,{..})`,
//! `tail(N)`, `all`, `empty`, combined with `!`, `&`, `|` (in decreasing
//! precedence) and parentheses.
//!
//! Families: `[lo, hi] u [lo, hi] …` with endpoints in the sequence grammar,
//! or `inf` / `-inf`.

use num::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::index_sets::ExactSet;
use crate::rational::{parse_literal, Rational};
use crate::saturation::{NestedFamily, SymbolicInterval};
use crate::ultrapower::SequenceExpr;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DslError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("division by the constant zero at byte {offset}")]
    DivisionByConstantZero { offset: usize },
}

impl DslError {
    pub fn offset(&self) -> usize {
        match self {
            DslError::Syntax { offset, .. } | DslError::DivisionByConstantZero { offset } => *offset,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Sym(char),
    End,
}

struct Lexer;

impl Lexer {
    fn tokens(text: &str) -> Result<Vec<(Tok, usize)>, DslError> {
        let mut out = Vec::new();
        let mut chars = text.char_indices().peekable();
        while let Some(&(i, ch)) = chars.peek() {
            if ch.is_whitespace() {
                chars.next();
            } else if ch.is_ascii_digit() || ch == '.' {
                let mut end = i;
                while let Some(&(j, d)) = chars.peek() {
                    if d.is_ascii_digit() || d == '.' {
                        end = j + d.len_utf8();
                        chars.next();
                    } else {
                        break;
                    }
                }
                let literal = &text[i..end];
                let value = parse_literal(literal).ok_or_else(|| DslError::Syntax {
                    offset: i,
                    message: format!("malformed number `{literal}`"),
                })?;
                out.push((Tok::Num(value), i));
            } else if ch.is_alphabetic() || ch == '_' {
                let mut end = i;
                while let Some(&(j, d)) = chars.peek() {
                    if d.is_alphanumeric() || d == '_' {
                        end = j + d.len_utf8();
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push((Tok::Ident(text[i..end].to_string()), i));
            } else {
                chars.next();
                let sym = match ch {
                    '−' => '-',
                    '·' | '×' => '*',
                    '∪' => 'u',
                    '∞' => {
                        out.push((Tok::Ident("inf".into()), i));
                        continue;
                    }
                    c if "+-*/^()[]{},;!&|".contains(c) => c,
                    c => {
                        return Err(DslError::Syntax {
                            offset: i,
                            message: format!("unexpected character `{c}`"),
                        })
                    }
                };
                if sym == 'u' {
                    out.push((Tok::Ident("u".into()), i));
                } else {
                    out.push((Tok::Sym(sym), i));
                }
            }
        }
        out.push((Tok::End, text.len()));
        Ok(out)
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

type PResult<T> = Result<T, DslError>;

impl Parser {
    fn new(text: &str) -> PResult<Self> {
        Ok(Parser { toks: Lexer::tokens(text)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(DslError::Syntax { offset: self.offset(), message: message.into() })
    }

    fn describe(t: &Tok) -> String {
        match t {
            Tok::Num(q) => format!("number `{q}`"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of input".into(),
        }
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> PResult<()> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            self.error(format!("expected `{c}`, found {}", Self::describe(self.peek())))
        }
    }

    fn is_ident(&self, name: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == name)
    }

    fn expect_end(&self) -> PResult<()> {
        match self.peek() {
            Tok::End => Ok(()),
            t => self.error(format!("unexpected {}", Self::describe(t))),
        }
    }

    fn natural(&mut self) -> PResult<u64> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(q) if q.is_integer() => q.to_integer().to_u64().ok_or(DslError::Syntax {
                offset: at,
                message: "integer out of range".into(),
            }),
            t => Err(DslError::Syntax {
                offset: at,
                message: format!("expected a natural number, found {}", Self::describe(&t)),
            }),
        }
    }

    // Sequences.

    fn expr(&mut self) -> PResult<SequenceExpr> {
        let mut left = self.term()?;
        loop {
            if self.eat_sym('+') {
                let right = self.term()?;
                left = fold(left, right, |a, b| a + b, |a, b| a + b);
            } else if self.eat_sym('-') {
                let right = self.term()?;
                left = fold(left, right, |a, b| a - b, |a, b| a - b);
            } else {
                return Ok(left);
            }
        }
    }

    fn term(&mut self) -> PResult<SequenceExpr> {
        let mut left = self.unary()?;
        loop {
            if self.eat_sym('*') {
                let right = self.unary()?;
                left = fold(left, right, |a, b| a * b, |a, b| a * b);
            } else if *self.peek() == Tok::Sym('/') {
                let at = self.offset();
                self.bump();
                let right = self.unary()?;
                if matches!(&right, SequenceExpr::Const(q) if q.is_zero()) {
                    return Err(DslError::DivisionByConstantZero { offset: at });
                }
                left = fold(left, right, |a, b| a / b, |a, b| a / b);
            } else {
                return Ok(left);
            }
        }
    }

    fn unary(&mut self) -> PResult<SequenceExpr> {
        if self.eat_sym('-') {
            Ok(match self.unary()? {
                SequenceExpr::Const(q) => SequenceExpr::Const(-q),
                other => -other,
            })
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> PResult<SequenceExpr> {
        let base = self.atom()?;
        if !self.eat_sym('^') {
            return Ok(base);
        }
        let at = self.offset();
        if self.is_ident("n") {
            self.bump();
            return match &base {
                SequenceExpr::Const(q) if q.is_one() => Ok(base),
                SequenceExpr::Const(q) if *q == -Rational::one() => {
                    Ok(SequenceExpr::periodic(vec![Rational::one(), -Rational::one()]))
                }
                _ => Err(DslError::Syntax {
                    offset: at,
                    message: "only 1 and -1 may be raised to the power n".into(),
                }),
            };
        }
        let negative = self.eat_sym('-');
        let k = self.natural()?;
        let k = i32::try_from(k).map_err(|_| DslError::Syntax {
            offset: at,
            message: "exponent out of range".into(),
        })?;
        let k = if negative { -k } else { k };
        match base {
            SequenceExpr::Const(q) => {
                if q.is_zero() && k < 0 {
                    return Err(DslError::DivisionByConstantZero { offset: at });
                }
                Ok(SequenceExpr::Const(num::pow::Pow::pow(&q, k)))
            }
            other => Ok(other.pow(k)),
        }
    }

    fn constant(&mut self) -> PResult<Rational> {
        let at = self.offset();
        match self.expr()? {
            SequenceExpr::Const(q) => Ok(q),
            other => Err(DslError::Syntax {
                offset: at,
                message: format!("expected a constant, found `{other}`"),
            }),
        }
    }

    fn constant_list(&mut self, terminators: &[char]) -> PResult<Vec<Rational>> {
        let mut values = vec![self.constant()?];
        while self.eat_sym(',') {
            values.push(self.constant()?);
        }
        match self.peek() {
            Tok::Sym(c) if terminators.contains(c) => Ok(values),
            t => self.error(format!("expected `,` or `{}`, found {}", terminators[0], Self::describe(t))),
        }
    }

    fn atom(&mut self) -> PResult<SequenceExpr> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(q) => Ok(SequenceExpr::Const(q)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "n" => Ok(SequenceExpr::index()),
                "per" => {
                    self.expect_sym('[')?;
                    let values = self.constant_list(&[']'])?;
                    self.expect_sym(']')?;
                    Ok(SequenceExpr::periodic(values))
                }
                "prefix" => {
                    self.expect_sym('[')?;
                    let values = if *self.peek() == Tok::Sym(';') {
                        Vec::new()
                    } else {
                        self.constant_list(&[';'])?
                    };
                    self.expect_sym(';')?;
                    let tail = self.expr()?;
                    self.expect_sym(']')?;
                    Ok(SequenceExpr::prefix(values, tail))
                }
                "ifmod" => {
                    self.expect_sym('(')?;
                    let m_at = self.offset();
                    let modulus = self.natural()?;
                    self.expect_sym(',')?;
                    let residue = self.natural()?;
                    if modulus == 0 || residue >= modulus {
                        return Err(DslError::Syntax {
                            offset: m_at,
                            message: "ifmod needs 0 <= r < m".into(),
                        });
                    }
                    self.expect_sym(';')?;
                    let then = self.expr()?;
                    self.expect_sym(';')?;
                    let otherwise = self.expr()?;
                    self.expect_sym(')')?;
                    Ok(SequenceExpr::if_mod(modulus, residue, then, otherwise))
                }
                "rand" => {
                    self.expect_sym('(')?;
                    let seed = self.natural()?;
                    self.expect_sym(',')?;
                    let lo_at = self.offset();
                    let lo = self.constant()?;
                    self.expect_sym(',')?;
                    let hi = self.constant()?;
                    self.expect_sym(')')?;
                    if lo > hi {
                        return Err(DslError::Syntax {
                            offset: lo_at,
                            message: "rand needs lo <= hi".into(),
                        });
                    }
                    Ok(SequenceExpr::rand(seed, lo, hi))
                }
                "inv" => {
                    self.expect_sym('(')?;
                    let e = self.expr()?;
                    self.expect_sym(')')?;
                    Ok(e.inv())
                }
                other => Err(DslError::Syntax {
                    offset: at,
                    message: format!("unknown name `{other}`"),
                }),
            },
            t => Err(DslError::Syntax {
                offset: at,
                message: format!("expected an operand, found {}", Self::describe(&t)),
            }),
        }
    }

    // Index sets.

    fn set_or(&mut self) -> PResult<ExactSet> {
        let mut left = self.set_and()?;
        while self.eat_sym('|') {
            left = left.union(&self.set_and()?);
        }
        Ok(left)
    }

    fn set_and(&mut self) -> PResult<ExactSet> {
        let mut left = self.set_not()?;
        while self.eat_sym('&') {
            left = left.intersect(&self.set_not()?);
        }
        Ok(left)
    }

    fn set_not(&mut self) -> PResult<ExactSet> {
        if self.eat_sym('!') {
            Ok(self.set_not()?.complement())
        } else {
            self.set_atom()
        }
    }

    fn natural_list(&mut self) -> PResult<Vec<u64>> {
        self.expect_sym('{')?;
        let mut out = Vec::new();
        if !self.eat_sym('}') {
            out.push(self.natural()?);
            while self.eat_sym(',') {
                out.push(self.natural()?);
            }
            self.expect_sym('}')?;
        }
        Ok(out)
    }

    fn set_atom(&mut self) -> PResult<ExactSet> {
        let at = self.offset();
        match self.bump() {
            Tok::Sym('(') => {
                let s = self.set_or()?;
                self.expect_sym(')')?;
                Ok(s)
            }
            Tok::Ident(name) => match name.as_str() {
                "finite" => Ok(ExactSet::finite(self.natural_list()?)),
                "cofinite_except" => Ok(ExactSet::cofinite_except(self.natural_list()?)),
                "all" => Ok(ExactSet::all()),
                "empty" => Ok(ExactSet::empty()),
                "tail" => {
                    self.expect_sym('(')?;
                    let start = self.natural()?;
                    self.expect_sym(')')?;
                    Ok(ExactSet::tail(start))
                }
                "mod" => {
                    self.expect_sym('(')?;
                    let modulus = self.natural()?;
                    if modulus == 0 || modulus > u64::from(u32::MAX) {
                        return Err(DslError::Syntax {
                            offset: at,
                            message: "modulus must be a positive 32-bit integer".into(),
                        });
                    }
                    self.expect_sym(',')?;
                    let list_at = self.offset();
                    let residues = self.natural_list()?;
                    if residues.iter().any(|&r| r >= modulus) {
                        return Err(DslError::Syntax {
                            offset: list_at,
                            message: "residues must lie below the modulus".into(),
                        });
                    }
                    self.expect_sym(')')?;
                    Ok(ExactSet::periodic(modulus, residues))
                }
                other => Err(DslError::Syntax {
                    offset: at,
                    message: format!("unknown set `{other}`"),
                }),
            },
            t => Err(DslError::Syntax {
                offset: at,
                message: format!("expected a set, found {}", Self::describe(&t)),
            }),
        }
    }

    // Families.

    /// `Some(sign)` when the next tokens spell `inf` or `-inf`.
    fn infinity_ahead(&self) -> Option<i8> {
        let is_inf = |t: &Tok| matches!(t, Tok::Ident(s) if s == "inf");
        if is_inf(self.peek()) {
            Some(1)
        } else if *self.peek() == Tok::Sym('-') && is_inf(self.peek_at(1)) {
            Some(-1)
        } else {
            None
        }
    }

    /// An endpoint, `None` for the infinity on side `allowed`.
    fn endpoint(&mut self, allowed: i8) -> PResult<Option<SequenceExpr>> {
        match self.infinity_ahead() {
            None => self.expr().map(Some),
            Some(sign) if sign == allowed => {
                self.bump();
                if sign < 0 {
                    self.bump();
                }
                Ok(None)
            }
            Some(_) => self.error(if allowed < 0 {
                "a left endpoint may be -inf but not inf"
            } else {
                "a right endpoint may be inf but not -inf"
            }),
        }
    }

    fn component(&mut self) -> PResult<SymbolicInterval> {
        self.expect_sym('[')?;
        let lo = self.endpoint(-1)?;
        self.expect_sym(',')?;
        let hi = self.endpoint(1)?;
        self.expect_sym(']')?;
        Ok(SymbolicInterval { lo, hi })
    }

    fn family(&mut self) -> PResult<Vec<SymbolicInterval>> {
        let mut parts = vec![self.component()?];
        while self.is_ident("u") {
            self.bump();
            parts.push(self.component()?);
        }
        Ok(parts)
    }
}

fn fold(
    a: SequenceExpr,
    b: SequenceExpr,
    on_consts: impl Fn(&Rational, &Rational) -> Rational,
    on_exprs: impl Fn(SequenceExpr, SequenceExpr) -> SequenceExpr,
) -> SequenceExpr {
    match (&a, &b) {
        (SequenceExpr::Const(x), SequenceExpr::Const(y)) => SequenceExpr::Const(on_consts(x, y)),
        _ => on_exprs(a, b),
    }
}

pub fn parse_sequence(text: &str) -> Result<SequenceExpr, DslError> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    p.expect_end()?;
    Ok(e)
}

pub fn parse_set(text: &str) -> Result<ExactSet, DslError> {
    let mut p = Parser::new(text)?;
    let s = p.set_or()?;
    p.expect_end()?;
    Ok(s)
}

/// A family of interval unions whose endpoints depend on `n`.
pub fn parse_family(text: &str, depth: u64) -> Result<NestedFamily, DslError> {
    let mut p = Parser::new(text)?;
    let parts = p.family()?;
    p.expect_end()?;
    Ok(NestedFamily::symbolic(parts, depth))
}

/// A rational literal for flags: `p/q`, decimals, or scientific notation.
pub fn parse_rational(text: &str) -> Result<Rational, DslError> {
    if let Some(q) = parse_literal(text.trim()) {
        return Ok(q);
    }
    match parse_sequence(text)? {
        SequenceExpr::Const(q) => Ok(q),
        _ => Err(DslError::Syntax { offset: 0, message: "expected a rational constant".into() }),
    }
}

/// `m:r` for residue flags.
pub fn parse_residue(text: &str) -> Result<(u64, u64), DslError> {
    let bad = |offset| DslError::Syntax { offset, message: "expected `m:r`".into() };
    let (m, r) = text.split_once(':').ok_or(bad(0))?;
    let m: u64 = m.trim().parse().map_err(|_| bad(0))?;
    let r: u64 = r.trim().parse().map_err(|_| bad(text.find(':').unwrap_or(0) + 1))?;
    Ok((m, r))
}
