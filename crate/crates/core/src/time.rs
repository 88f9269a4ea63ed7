//! Ticks, time references and exact frequency ratios.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Zero};
use thiserror::Error;

/// Exact non-negative rational number.
pub type Rational = Ratio<BigUint>;

/// One period of a time reference, counted from the origin of a channel.
///
/// Arithmetic is checked: an addition that would leave the `u64` range yields
/// `None` instead of wrapping.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tick(pub u64);

impl Tick {
    pub const ZERO: Tick = Tick(0);

    #[inline]
    pub fn get(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn checked_add(self, delta: u64) -> Option<Tick> {
        self.0.checked_add(delta).map(Tick)
    }

    /// Distance from `earlier` to `self`, or `None` if `earlier` is later.
    #[inline]
    pub fn since(self, earlier: Tick) -> Option<u64> {
        self.0.checked_sub(earlier.0)
    }
}

impl From<u64> for Tick {
    fn from(v: u64) -> Self {
        Tick(v)
    }
}

impl fmt::Display for Tick {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClockError {
    #[error("clock frequency must be positive")]
    NonPositiveFrequency,
    #[error("invalid rational `{0}`")]
    BadRational(String),
}

/// Parse `n` or `n/d` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, ClockError> {
    let bad = || ClockError::BadRational(text.to_string());
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n, d),
        None => (text, "1"),
    };
    let num = BigUint::from_str(num.trim()).map_err(|_| bad())?;
    let den = BigUint::from_str(den.trim()).map_err(|_| bad())?;
    if den.is_zero() {
        return Err(bad());
    }
    Ok(Ratio::new(num, den))
}

/// `floor(count * ratio)`.
pub fn scale_floor(count: &BigUint, ratio: &Rational) -> BigUint {
    (count * ratio.numer()).div_floor(ratio.denom())
}

/// A named time reference: the "currency" intervals are counted in.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ClockRef {
    id: String,
    frequency: Rational,
}

impl ClockRef {
    pub fn new(id: impl Into<String>, frequency: Rational) -> Result<Self, ClockError> {
        if frequency.is_zero() {
            return Err(ClockError::NonPositiveFrequency);
        }
        Ok(Self {
            id: id.into(),
            frequency,
        })
    }

    /// Clock with an integral frequency.
    pub fn with_hz(id: impl Into<String>, frequency: u64) -> Result<Self, ClockError> {
        Self::new(id, Rational::from_integer(BigUint::from(frequency)))
    }

    /// Unit-frequency clock, handy as a default reference.
    pub fn unit(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            frequency: Rational::one(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn frequency(&self) -> &Rational {
        &self.frequency
    }

    /// `other.frequency / self.frequency`: how many `other` pulses fit in one
    /// pulse of `self`.
    pub fn ratio_to(&self, other: &ClockRef) -> Rational {
        &other.frequency / &self.frequency
    }

    /// A derived reference running `factor` times faster.
    pub fn scaled(&self, factor: &BigUint) -> Result<ClockRef, ClockError> {
        let freq = &self.frequency * Rational::from_integer(factor.clone());
        ClockRef::new(format!("{}*{}", self.id, factor), freq)
    }

    /// True if both references tick at exactly the same rate.
    pub fn same_rate(&self, other: &ClockRef) -> bool {
        self.frequency == other.frequency
    }
}

impl fmt::Display for ClockRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.id, self.frequency)
    }
}
