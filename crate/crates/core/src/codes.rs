//! Signal carriers and the encoders/decoders between integers and temporal
//! representations.
//!
//! Every carrier is an immutable value tagged with the [`ClockRef`] its ticks
//! are counted in. Values that are pure lengths ([`UnaryTrain`], hybrid digits,
//! measurements) are arbitrary precision; positions on a time axis are
//! [`Tick`]s.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::time::{scale_floor, ClockRef, Tick};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodeError {
    #[error("malformed code: {0}")]
    MalformedCode(String),
    #[error("invalid base {0}, must be at least 2")]
    InvalidBase(u32),
    #[error("digit {index} has length {digit}, not below base {base}")]
    DigitOverflow {
        index: usize,
        digit: BigUint,
        base: u32,
    },
    #[error("pulse positions must be strictly increasing (offending position {0})")]
    NotIncreasing(Tick),
    #[error("interval end {end} precedes start {start}")]
    Reversed { start: Tick, end: Tick },
    #[error("amplitude at position {0} must be at least 1")]
    ZeroAmplitude(Tick),
    #[error("tick position overflow")]
    TickOverflow,
}

/// Ordered pulse events on one channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PulseTrain {
    pulses: Vec<Tick>,
    clock: ClockRef,
}

impl PulseTrain {
    pub fn new(pulses: Vec<Tick>, clock: ClockRef) -> Result<Self, CodeError> {
        if let Some(w) = pulses.windows(2).find(|w| w[0] >= w[1]) {
            return Err(CodeError::NotIncreasing(w[1]));
        }
        Ok(Self { pulses, clock })
    }

    pub fn empty(clock: ClockRef) -> Self {
        Self {
            pulses: Vec::new(),
            clock,
        }
    }

    pub fn pulses(&self) -> &[Tick] {
        &self.pulses
    }

    pub fn clock(&self) -> &ClockRef {
        &self.clock
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    /// Pulse-wise OR of two trains on the same time axis.
    ///
    /// Coincident pulses merge into one, so the result stays strictly
    /// increasing.
    pub fn or(&self, other: &PulseTrain) -> PulseTrain {
        let mut pulses = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.pulses.len() || j < other.pulses.len() {
            let next = match (self.pulses.get(i), other.pulses.get(j)) {
                (Some(&a), Some(&b)) if a == b => {
                    i += 1;
                    j += 1;
                    a
                }
                (Some(&a), Some(&b)) if a < b => {
                    i += 1;
                    a
                }
                (Some(_), Some(&b)) => {
                    j += 1;
                    b
                }
                (Some(&a), None) => {
                    i += 1;
                    a
                }
                (None, Some(&b)) => {
                    j += 1;
                    b
                }
                (None, None) => unreachable!(),
            };
            pulses.push(next);
        }
        PulseTrain {
            pulses,
            clock: self.clock.clone(),
        }
    }
}

/// Contiguous marks from tick 0; the value is the length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnaryTrain {
    length: BigUint,
    clock: ClockRef,
}

impl UnaryTrain {
    pub fn new(length: BigUint, clock: ClockRef) -> Self {
        Self { length, clock }
    }

    pub fn length(&self) -> &BigUint {
        &self.length
    }

    pub fn clock(&self) -> &ClockRef {
        &self.clock
    }
}

impl fmt::Display for UnaryTrain {
    // Marks are written most recent first, right to left in time.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.length.to_usize() {
            Some(n) if n <= 4096 => f.write_str(&"1".repeat(n)),
            _ => write!(f, "1^{}", self.length),
        }
    }
}

/// One datum as a time-delay between a start and an end event.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalValue {
    start: Tick,
    end: Tick,
    clock: ClockRef,
}

impl IntervalValue {
    pub fn new(start: Tick, end: Tick, clock: ClockRef) -> Result<Self, CodeError> {
        if end < start {
            return Err(CodeError::Reversed { start, end });
        }
        Ok(Self { start, end, clock })
    }

    /// Interval of length `value` beginning at `start`.
    pub fn starting_at(start: Tick, value: u64, clock: ClockRef) -> Result<Self, CodeError> {
        let end = start.checked_add(value).ok_or(CodeError::TickOverflow)?;
        Ok(Self { start, end, clock })
    }

    pub fn start(&self) -> Tick {
        self.start
    }

    pub fn end(&self) -> Tick {
        self.end
    }

    pub fn clock(&self) -> &ClockRef {
        &self.clock
    }

    pub fn value(&self) -> u64 {
        self.end.0 - self.start.0
    }
}

/// Position → amplitude buckets. Absent positions have amplitude 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiValentTrain {
    buckets: BTreeMap<Tick, u64>,
    clock: ClockRef,
}

impl MultiValentTrain {
    pub fn empty(clock: ClockRef) -> Self {
        Self {
            buckets: BTreeMap::new(),
            clock,
        }
    }

    pub fn new(
        buckets: impl IntoIterator<Item = (Tick, u64)>,
        clock: ClockRef,
    ) -> Result<Self, CodeError> {
        let mut map = BTreeMap::new();
        for (pos, amp) in buckets {
            if amp == 0 {
                return Err(CodeError::ZeroAmplitude(pos));
            }
            if map.insert(pos, amp).is_some() {
                return Err(CodeError::MalformedCode(format!(
                    "position {pos} given twice"
                )));
            }
        }
        Ok(Self { buckets: map, clock })
    }

    pub(crate) fn from_map(buckets: BTreeMap<Tick, u64>, clock: ClockRef) -> Self {
        debug_assert!(buckets.values().all(|&a| a >= 1));
        Self { buckets, clock }
    }

    pub fn buckets(&self) -> &BTreeMap<Tick, u64> {
        &self.buckets
    }

    pub fn amplitude(&self, pos: Tick) -> u64 {
        self.buckets.get(&pos).copied().unwrap_or(0)
    }

    pub fn clock(&self) -> &ClockRef {
        &self.clock
    }

    pub fn highest_position(&self) -> Option<Tick> {
        self.buckets.keys().next_back().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }
}

/// How a set of time delays is laid out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DeliveryMode {
    /// Back-to-back on one channel, no idle time.
    Serial,
    /// One channel with idle gaps between values.
    SerialDiscontinuous,
    /// Parallel lanes sharing one start tick.
    ParallelSynchronous,
    /// Parallel lanes with independent start ticks.
    ParallelAsynchronous,
}

impl DeliveryMode {
    pub const ALL: [DeliveryMode; 4] = [
        DeliveryMode::Serial,
        DeliveryMode::SerialDiscontinuous,
        DeliveryMode::ParallelSynchronous,
        DeliveryMode::ParallelAsynchronous,
    ];

    pub fn is_serial(self) -> bool {
        matches!(self, DeliveryMode::Serial | DeliveryMode::SerialDiscontinuous)
    }
}

impl fmt::Display for DeliveryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeliveryMode::Serial => "serial",
            DeliveryMode::SerialDiscontinuous => "serial-discontinuous",
            DeliveryMode::ParallelSynchronous => "parallel-sync",
            DeliveryMode::ParallelAsynchronous => "parallel-async",
        })
    }
}

pub fn encode_unary(n: impl Into<BigUint>, clock: &ClockRef) -> UnaryTrain {
    UnaryTrain::new(n.into(), clock.clone())
}

pub fn decode_unary(t: &UnaryTrain) -> BigUint {
    t.length.clone()
}

/// Interval code: a start delimiter at tick 0 and an end pulse at tick `n`.
/// For `n = 0` the two delimiters coincide into a single pulse.
pub fn encode_pim(n: u64, clock: &ClockRef) -> PulseTrain {
    let pulses = if n == 0 {
        vec![Tick::ZERO]
    } else {
        vec![Tick::ZERO, Tick(n)]
    };
    PulseTrain {
        pulses,
        clock: clock.clone(),
    }
}

pub fn decode_pim(t: &PulseTrain) -> Result<u64, CodeError> {
    match t.pulses() {
        [Tick(0)] => Ok(0),
        [Tick(0), Tick(end)] => Ok(*end),
        [first, ..] if *first != Tick::ZERO => Err(CodeError::MalformedCode(format!(
            "interval code must start at tick 0, found {first}"
        ))),
        p => Err(CodeError::MalformedCode(format!(
            "interval code needs 1 or 2 pulses, found {}",
            p.len()
        ))),
    }
}

/// Count `iv` against `reference`: `floor((end - start) * f_ref / f_iv)`.
pub fn measure_interval(iv: &IntervalValue, reference: &ClockRef) -> BigUint {
    let len = BigUint::from(iv.value());
    if iv.clock.same_rate(reference) {
        return len;
    }
    scale_floor(&len, &iv.clock.ratio_to(reference))
}

/// Little-endian positional digits, each digit a unary train.
pub fn encode_hybrid(n: &BigUint, base: u32, clock: &ClockRef) -> Result<Vec<UnaryTrain>, CodeError> {
    if base < 2 {
        return Err(CodeError::InvalidBase(base));
    }
    if n.is_zero() {
        return Ok(vec![encode_unary(0u32, clock)]);
    }
    let b = BigUint::from(base);
    let mut rest = n.clone();
    let mut digits = Vec::new();
    while !rest.is_zero() {
        let (q, r) = rest.div_rem(&b);
        digits.push(UnaryTrain::new(r, clock.clone()));
        rest = q;
    }
    Ok(digits)
}

pub fn decode_hybrid(digits: &[UnaryTrain], base: u32) -> Result<BigUint, CodeError> {
    if base < 2 {
        return Err(CodeError::InvalidBase(base));
    }
    let b = BigUint::from(base);
    if let Some((index, d)) = digits.iter().enumerate().find(|(_, d)| d.length >= b) {
        return Err(CodeError::DigitOverflow {
            index,
            digit: d.length.clone(),
            base,
        });
    }
    Ok(digits
        .iter()
        .rev()
        .fold(BigUint::zero(), |acc, d| acc * &b + &d.length))
}
