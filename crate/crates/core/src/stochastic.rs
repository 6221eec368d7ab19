//! Unit-interval algebra of stochastic logic gates, and a serial bitstream
//! engine that realizes it with random bits.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng as _;

use crate::rng;
use crate::{Error, Result};

/// A number in `[0, 1]`: a probability, or a relative concentration.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct FractionalValue(f64);

impl FractionalValue {
    pub const ZERO: Self = Self(0.0);
    pub const ONE: Self = Self(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::OutOfRange {
                what: "fraction",
                value,
                range: "[0, 1]",
            })
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            Self(0.0)
        } else {
            Self(value.clamp(0.0, 1.0))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Self {
        Self(1.0 - self.0)
    }
}

impl From<FractionalValue> for f64 {
    fn from(v: FractionalValue) -> f64 {
        v.0
    }
}

impl TryFrom<f64> for FractionalValue {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl fmt::Display for FractionalValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    Not,
    And,
    Or,
    Nand,
    Nor,
    Xor,
    Xnor,
}

impl GateKind {
    pub const ALL: [GateKind; 7] = [
        GateKind::Not,
        GateKind::And,
        GateKind::Or,
        GateKind::Nand,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
    ];

    pub fn arity(self) -> usize {
        match self {
            GateKind::Not => 1,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Not => "NOT",
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Nand => "NAND",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
        }
    }

    /// Boolean truth function. `b` is ignored for NOT.
    pub fn truth(self, a: bool, b: bool) -> bool {
        match self {
            GateKind::Not => !a,
            GateKind::And => a & b,
            GateKind::Or => a | b,
            GateKind::Nand => !(a & b),
            GateKind::Nor => !(a | b),
            GateKind::Xor => a ^ b,
            GateKind::Xnor => !(a ^ b),
        }
    }

    fn word(self, a: u64, b: u64) -> u64 {
        match self {
            GateKind::Not => !a,
            GateKind::And => a & b,
            GateKind::Or => a | b,
            GateKind::Nand => !(a & b),
            GateKind::Nor => !(a | b),
            GateKind::Xor => a ^ b,
            GateKind::Xnor => !(a ^ b),
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        GateKind::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::arg(alloc::format!("unknown gate {s:?}")))
    }
}

/// Output probability of `gate` for independent inputs with probabilities
/// `x` and `y`.
///
/// The inverted gates are computed as the complement of their base gate, so
/// `NAND = NOT(AND)`, `NOR = NOT(OR)` and `XNOR = NOT(XOR)` hold bit-for-bit.
pub fn gate_eval(
    gate: GateKind,
    x: FractionalValue,
    y: Option<FractionalValue>,
) -> Result<FractionalValue> {
    let got = 1 + usize::from(y.is_some());
    if got != gate.arity() {
        return Err(Error::Arity {
            gate: gate.name(),
            expected: gate.arity(),
            got,
        });
    }
    let x = x.get();
    let y = y.map_or(0.0, FractionalValue::get);
    let and = || x * y;
    let or = || x + y - x * y;
    let xor = || x + y - 2.0 * x * y;
    let v = match gate {
        GateKind::Not => 1.0 - x,
        GateKind::And => and(),
        GateKind::Or => or(),
        GateKind::Xor => xor(),
        GateKind::Nand => 1.0 - and(),
        GateKind::Nor => 1.0 - or(),
        GateKind::Xnor => 1.0 - xor(),
    };
    Ok(FractionalValue::saturating(v))
}

/// A serial stochastic bitstream, packed 64 bits per word (LSB first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitstream {
    words: Vec<u64>,
    len: usize,
    seed: Option<u64>,
}

impl Bitstream {
    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for bit in bits {
            if len % 64 == 0 {
                words.push(0);
            }
            if bit {
                words[len / 64] |= 1 << (len % 64);
            }
            len += 1;
        }
        Self {
            words,
            len,
            seed: None,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Seed the stream was drawn with; `None` for derived streams.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.bit(i))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Fraction of ones in the stream.
    pub fn mean(&self) -> f64 {
        if self.len == 0 {
            0.0
        } else {
            self.count_ones() as f64 / self.len as f64
        }
    }

    fn mask_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

/// Draws `n` independent bits with `P(1) = x` from the stream keyed by `seed`.
pub fn bitstream_encode(x: FractionalValue, n: usize, seed: u64) -> Result<Bitstream> {
    if n == 0 {
        return Err(Error::arg("bitstream length must be at least 1"));
    }
    let mut rng = rng::seeded(seed);
    let p = x.get();
    let mut words = vec![0u64; n.div_ceil(64)];
    for i in 0..n {
        // random::<f64>() lies in [0, 1), so p = 0 and p = 1 are exact.
        if rng.random::<f64>() < p {
            words[i / 64] |= 1 << (i % 64);
        }
    }
    Ok(Bitstream {
        words,
        len: n,
        seed: Some(seed),
    })
}

/// Applies `gate` bit by bit.
pub fn bitstream_gate_apply(
    gate: GateKind,
    s1: &Bitstream,
    s2: Option<&Bitstream>,
) -> Result<Bitstream> {
    let got = 1 + usize::from(s2.is_some());
    if got != gate.arity() {
        return Err(Error::Arity {
            gate: gate.name(),
            expected: gate.arity(),
            got,
        });
    }
    if let Some(s2) = s2 {
        if s2.len != s1.len {
            return Err(Error::LengthMismatch {
                left: s1.len,
                right: s2.len,
            });
        }
    }
    let words = match s2 {
        Some(s2) => s1
            .words
            .iter()
            .zip(&s2.words)
            .map(|(&a, &b)| gate.word(a, b))
            .collect(),
        None => s1.words.iter().map(|&a| gate.word(a, 0)).collect(),
    };
    let mut out = Bitstream {
        words,
        len: s1.len,
        seed: None,
    };
    out.mask_tail();
    Ok(out)
}
