//! Gate expressions such as `XOR(0.3, NOT(0.4))`.
//!
//! Leaves are probabilities in `[0, 1]`; every other node is a gate name
//! (any case) applied to one or two subexpressions. Leaves are treated as
//! independent signals.

use nicknet_core::rng::derive_seed;
use nicknet_core::stochastic::{bitstream_encode, bitstream_gate_apply, gate_eval, Bitstream, GateKind};
use nicknet_core::FractionalValue;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Value(FractionalValue),
    Gate(GateKind, Vec<Expr>),
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Format(format!("expression {:?}, column {}: {msg}", self.src, self.pos + 1))
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn token(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        self.skip_ws();
        let start = self.pos;
        while self.src[self.pos..].starts_with(&pred) {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn expr(&mut self) -> Result<Expr> {
        let name = self.token(|c| c.is_ascii_alphabetic());
        if name.is_empty() {
            let num = self.token(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '-' | '+'));
            let v: f64 = num.parse().map_err(|_| self.err("expected a number or a gate name"))?;
            return FractionalValue::new(v).map(Expr::Value).map_err(Error::from);
        }
        let gate: GateKind = name.parse().map_err(|_| self.err(&format!("unknown gate {name:?}")))?;
        if !self.eat('(') {
            return Err(self.err("expected '('"));
        }
        let mut args = vec![self.expr()?];
        while self.eat(',') {
            args.push(self.expr()?);
        }
        if !self.eat(')') {
            return Err(self.err("expected ')'"));
        }
        if args.len() != gate.arity() {
            return Err(nicknet_core::Error::Arity {
                gate: gate.name(),
                expected: gate.arity(),
                got: args.len(),
            }
            .into());
        }
        Ok(Expr::Gate(gate, args))
    }
}

pub fn parse(src: &str) -> Result<Expr> {
    let mut p = Parser { src, pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

impl Expr {
    /// Exact output probability.
    pub fn eval(&self) -> Result<FractionalValue> {
        match self {
            Expr::Value(v) => Ok(*v),
            Expr::Gate(g, args) => {
                let x = args[0].eval()?;
                let y = args.get(1).map(Expr::eval).transpose()?;
                Ok(gate_eval(*g, x, y)?)
            }
        }
    }

    /// Runs the expression on `n`-bit streams; leaf `i` uses a seed derived
    /// from `seed` and `i`.
    pub fn eval_bitstream(&self, n: usize, seed: u64) -> Result<Bitstream> {
        let mut leaf = 0;
        self.stream(n, seed, &mut leaf)
    }

    fn stream(&self, n: usize, seed: u64, leaf: &mut u64) -> Result<Bitstream> {
        match self {
            Expr::Value(v) => {
                let s = bitstream_encode(*v, n, derive_seed(seed, &[*leaf]))?;
                *leaf += 1;
                Ok(s)
            }
            Expr::Gate(g, args) => {
                let a = args[0].stream(n, seed, leaf)?;
                let b = args.get(1).map(|e| e.stream(n, seed, leaf)).transpose()?;
                Ok(bitstream_gate_apply(*g, &a, b.as_ref())?)
            }
        }
    }
}
