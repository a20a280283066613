//! Numeric backends.
//!
//! Every algorithm in the crate is generic over [`Scalar`], which is
//! implemented for `f64` (fast, tolerance-based) and [`Rational`]
//! (arbitrary precision, exact comparisons). Models are always stored
//! exactly and converted into the requested backend on demand.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::Result;
use crate::linalg;

pub type Rational = BigRational;

/// Arithmetic backend selected per run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NumericMode {
    /// Arbitrary-precision rationals; ties and signs are decided exactly.
    Exact,
    /// IEEE binary64 with an absolute tie tolerance.
    Float { tolerance: f64 },
}

impl NumericMode {
    pub const DEFAULT_TOLERANCE: f64 = 1e-9;

    pub fn float() -> Self {
        NumericMode::Float {
            tolerance: Self::DEFAULT_TOLERANCE,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, NumericMode::Exact)
    }

    /// Tie tolerance; always 0 in exact mode.
    pub fn tolerance(&self) -> f64 {
        match *self {
            NumericMode::Exact => 0.0,
            NumericMode::Float { tolerance } => tolerance,
        }
    }
}

impl Default for NumericMode {
    fn default() -> Self {
        NumericMode::float()
    }
}

/// The linear system `(I - discount * P) v = rhs` for a fixed strategy.
///
/// `rows[s]` lists `(successor, probability)` pairs of the strategy's
/// (possibly averaged) transition row out of `s`.
#[derive(Debug, Clone)]
pub struct PolicySystem<T> {
    pub rows: Vec<Vec<(usize, T)>>,
    pub rhs: Vec<T>,
    pub discount: T,
}

impl<T> PolicySystem<T> {
    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }
}

pub trait Scalar:
    Clone + Debug + PartialOrd + Send + Sync + Signed + num_traits::Num + 'static
{
    /// True when comparisons are exact.
    const EXACT: bool;

    fn from_rational(r: &Rational) -> Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn powu(&self, exp: u64) -> Self;
    fn solve_policy_system(system: &PolicySystem<Self>) -> Result<Vec<Self>>;
    /// Human-readable rendering: `p/q` for rationals, 9 significant digits for floats.
    fn render(&self) -> String;

    /// Whether some prefix sum `Σ_{p≤k} ratios[p]^j · deltas[p]` exceeds `slack`.
    fn prefix_sum_exceeds(ratios: &[Self], deltas: &[Self], j: u64, slack: &Self) -> bool {
        let mut sum = Self::zero();
        for (r, d) in ratios.iter().zip(deltas) {
            sum = sum + r.powu(j) * d.clone();
            if sum > *slack {
                return true;
            }
        }
        false
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_rational(r: &Rational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }

    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn powu(&self, exp: u64) -> Self {
        if exp <= i32::MAX as u64 {
            self.powi(exp as i32)
        } else {
            self.powf(exp as f64)
        }
    }

    fn solve_policy_system(system: &PolicySystem<Self>) -> Result<Vec<Self>> {
        linalg::solve_f64(system)
    }

    fn render(&self) -> String {
        format_sig(*self, 9)
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn from_f64(x: f64) -> Self {
        Rational::from_float(x).unwrap_or_else(Rational::zero)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn powu(&self, exp: u64) -> Self {
        let e = u32::try_from(exp).expect("exponent exceeds u32");
        Rational::new_raw(self.numer().pow(e), self.denom().pow(e))
    }

    fn solve_policy_system(system: &PolicySystem<Self>) -> Result<Vec<Self>> {
        linalg::solve_bareiss(system)
    }

    // Large powers make gcd reduction the dominant cost, so the sums are
    // accumulated as unreduced fractions with positive denominators.
    fn prefix_sum_exceeds(ratios: &[Self], deltas: &[Self], j: u64, slack: &Self) -> bool {
        let e = u32::try_from(j).expect("exponent exceeds u32");
        let mut num = BigInt::zero();
        let mut den = BigInt::one();
        for (r, d) in ratios.iter().zip(deltas) {
            let tn = r.numer().pow(e) * d.numer();
            let td = r.denom().pow(e) * d.denom();
            num = num * &td + tn * &den;
            den *= td;
            if &num * slack.denom() > slack.numer() * &den {
                return true;
            }
        }
        false
    }

    fn render(&self) -> String {
        format_rational(self)
    }
}

/// Parses `p/q`, integers and decimal literals (with optional exponent)
/// into an exact rational.
pub fn parse_rational(text: &str) -> std::result::Result<Rational, String> {
    let s = text.trim();
    if s.is_empty() {
        return Err("empty number".into());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n
            .trim()
            .parse()
            .map_err(|_| format!("bad numerator in `{text}`"))?;
        let d: BigInt = d
            .trim()
            .parse()
            .map_err(|_| format!("bad denominator in `{text}`"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in `{text}`"));
        }
        return Ok(Rational::new(n, d));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i64 = s[i + 1..]
                .parse()
                .map_err(|_| format!("bad exponent in `{text}`"))?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first() {
        Some(b'-') => (true, &mantissa[1..]),
        Some(b'+') => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty()
        || !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit())
    {
        return Err(format!("not a number: `{text}`"));
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut value = Rational::from_integer(all.parse::<BigInt>().unwrap_or_default());
    let scale = exponent - frac_part.len() as i64;
    if scale.unsigned_abs() > 10_000 {
        return Err(format!("exponent out of range in `{text}`"));
    }
    let ten = Rational::from_integer(BigInt::from(10));
    let factor = ten.powu(scale.unsigned_abs());
    if scale >= 0 {
        value *= factor;
    } else {
        value /= factor;
    }
    Ok(if negative { -value } else { value })
}

/// `p` for integers, `p/q` otherwise.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `%g`-style formatting with `sig` significant digits.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let s = if exp < -5 || exp >= sig as i32 {
        format!("{:.*e}", sig.saturating_sub(1), x)
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    };
    trim_zeros(s)
}

fn trim_zeros(s: String) -> String {
    let (mantissa, exponent) = match s.find('e') {
        Some(i) => (s[..i].to_string(), s[i..].to_string()),
        None => (s, String::new()),
    };
    let mantissa = if mantissa.contains('.') {
        mantissa.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        mantissa
    };
    format!("{mantissa}{exponent}")
}
