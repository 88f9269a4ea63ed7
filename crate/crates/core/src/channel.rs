//! Asynchronous transport of interval-encoded data between blocks.
//!
//! A message is a sequence of events whose spacing carries the data. Links
//! delay events; as long as every event of one message sees the same delay
//! the decoded value at the destination equals the value at the source,
//! whatever the latency. Both endpoints count against agreed references,
//! related by an exact frequency ratio.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::accumulators::convert_reference;
use crate::arith::MuxChannel;
use crate::codes::{DeliveryMode, IntervalValue, MultiValentTrain, PulseTrain};
use crate::time::{ClockRef, Rational, Tick};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("expected {expected} gaps, got {got}")]
    GapCountMismatch { expected: usize, got: usize },
    #[error("expected {expected} offsets, got {got}")]
    OffsetCountMismatch { expected: usize, got: usize },
    #[error("delivery mode mismatch: {0}")]
    ModeMismatch(String),
    #[error("malformed stream: {0}")]
    MalformedStream(String),
    #[error("malformed message: {0}")]
    MalformedMessage(String),
    #[error("stream value 0 would collapse two delimiters (index {0})")]
    ZeroValue(usize),
    #[error("tick overflow")]
    TickOverflow,
    #[error("link delay is not stable across the message")]
    Unstable(Box<StabilityViolation>),
    #[error("latency table line {line}: {message}")]
    BadTable { line: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Start,
    /// A value pulse on a multiplexed channel.
    Pulse,
    /// A multi-valent mark carrying its amplitude.
    Mark(u64),
    End,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Start => f.write_str("start"),
            Role::Pulse => f.write_str("pulse"),
            Role::Mark(a) => write!(f, "mark:{a}"),
            Role::End => f.write_str("end"),
        }
    }
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "start" => Ok(Role::Start),
            "pulse" => Ok(Role::Pulse),
            "end" => Ok(Role::End),
            _ => s
                .strip_prefix("mark:")
                .and_then(|a| a.parse().ok())
                .map(Role::Mark)
                .ok_or_else(|| format!("unknown event role `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub role: Role,
    pub tick: Tick,
}

/// Events of one datum, in emission order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimedMessage {
    events: Vec<Event>,
}

impl TimedMessage {
    /// Exactly one start event, first; ticks non-decreasing; an end event,
    /// if present, last.
    pub fn new(events: Vec<Event>) -> Result<Self, ChannelError> {
        let bad = |m: &str| Err(ChannelError::MalformedMessage(m.to_string()));
        match events.first() {
            Some(e) if e.role == Role::Start => {}
            _ => return bad("first event must be the start event"),
        }
        if events.windows(2).any(|w| w[0].tick > w[1].tick) {
            return bad("events out of order");
        }
        if events[1..].iter().any(|e| e.role == Role::Start) {
            return bad("more than one start event");
        }
        if let Some(i) = events.iter().position(|e| e.role == Role::End) {
            if i + 1 != events.len() {
                return bad("end event must be last");
            }
        }
        Ok(Self { events })
    }

    /// Start and end events delimiting an interval.
    pub fn interval(iv: &IntervalValue) -> Self {
        Self {
            events: vec![
                Event { role: Role::Start, tick: iv.start() },
                Event { role: Role::End, tick: iv.end() },
            ],
        }
    }

    /// Multiplexed channel emitted from `origin`; the end event closes the
    /// message on the last value pulse.
    pub fn mux(ch: &MuxChannel, origin: Tick) -> Result<Self, ChannelError> {
        let mut events = vec![Event { role: Role::Start, tick: origin }];
        for &v in ch.values() {
            let tick = origin.checked_add(v).ok_or(ChannelError::TickOverflow)?;
            events.push(Event { role: Role::Pulse, tick });
        }
        let last = events.last().expect("start").tick;
        events.push(Event { role: Role::End, tick: last });
        Ok(Self { events })
    }

    /// Multi-valent train emitted from `origin`.
    pub fn multivalent(train: &MultiValentTrain, origin: Tick) -> Result<Self, ChannelError> {
        let mut events = vec![Event { role: Role::Start, tick: origin }];
        for (&pos, &amp) in train.buckets() {
            let tick = origin.checked_add(pos.0).ok_or(ChannelError::TickOverflow)?;
            events.push(Event { role: Role::Mark(amp), tick });
        }
        let last = events.last().expect("start").tick;
        events.push(Event { role: Role::End, tick: last });
        Ok(Self { events })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn start(&self) -> Tick {
        self.events[0].tick
    }

    pub fn last(&self) -> Tick {
        self.events.last().expect("non-empty").tick
    }

    /// Span from the start event to the last event.
    pub fn span(&self) -> u64 {
        self.last().0 - self.start().0
    }

    pub fn is_complete(&self) -> bool {
        self.events.last().is_some_and(|e| e.role == Role::End)
    }

    /// Value of a plain interval message.
    pub fn decode_interval(&self) -> Result<u64, ChannelError> {
        match self.events.as_slice() {
            [s, e] if s.role == Role::Start && e.role == Role::End => Ok(e.tick.0 - s.tick.0),
            _ => Err(ChannelError::MalformedMessage("not an interval message".into())),
        }
    }

    /// Offsets of the value pulses of a multiplexed message.
    pub fn decode_mux(&self) -> Result<Vec<u64>, ChannelError> {
        let origin = self.start();
        let body = &self.events[1..];
        if body.len() < 2 || body.last().map(|e| e.role) != Some(Role::End) {
            return Err(ChannelError::MalformedMessage("not a multiplexed message".into()));
        }
        body[..body.len() - 1]
            .iter()
            .map(|e| match e.role {
                Role::Pulse => Ok(e.tick.0 - origin.0),
                _ => Err(ChannelError::MalformedMessage("not a multiplexed message".into())),
            })
            .collect()
    }

    /// `(position, amplitude)` marks of a multi-valent message.
    pub fn decode_marks(&self) -> Result<Vec<(Tick, u64)>, ChannelError> {
        let origin = self.start();
        let body = &self.events[1..];
        if body.last().map(|e| e.role) != Some(Role::End) {
            return Err(ChannelError::MalformedMessage("not a multi-valent message".into()));
        }
        body[..body.len() - 1]
            .iter()
            .map(|e| match e.role {
                Role::Mark(a) => Ok((Tick(e.tick.0 - origin.0), a)),
                _ => Err(ChannelError::MalformedMessage("not a multi-valent message".into())),
            })
            .collect()
    }
}

/// Delay as a function of emission tick, breakpoints held until the next.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LatencyTable {
    points: BTreeMap<Tick, u64>,
}

impl LatencyTable {
    pub fn new(points: impl IntoIterator<Item = (Tick, u64)>) -> Self {
        Self {
            points: points.into_iter().collect(),
        }
    }

    /// Lines of `<tick> <delay>`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ChannelError> {
        let mut points = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ChannelError::BadTable { line: i + 1, message };
            let mut fields = line.split_whitespace();
            let (Some(t), Some(d), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(err("expected `<tick> <delay>`".into()));
            };
            let t: u64 = t.parse().map_err(|_| err(format!("bad tick `{t}`")))?;
            let d: u64 = d.parse().map_err(|_| err(format!("bad delay `{d}`")))?;
            points.insert(Tick(t), d);
        }
        Ok(Self { points })
    }

    /// Ticks before the first breakpoint take the first delay; an empty
    /// table is a zero-latency link.
    pub fn delay_at(&self, t: Tick) -> u64 {
        self.points
            .range(..=t)
            .next_back()
            .or_else(|| self.points.iter().next())
            .map_or(0, |(_, &d)| d)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Latency {
    Constant(u64),
    Table(LatencyTable),
    /// Independent uniform delay in `[0, max]` per emission tick.
    Jitter { seed: u64, max: u64 },
}

impl Latency {
    pub fn delay_at(&self, t: Tick) -> u64 {
        match self {
            Latency::Constant(d) => *d,
            Latency::Table(table) => table.delay_at(t),
            Latency::Jitter { seed, max } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(t.0);
                rng.random_range(0..=*max)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Link {
    pub latency: Latency,
    pub src_clock: ClockRef,
    pub dst_clock: ClockRef,
}

impl Link {
    pub fn new(latency: Latency, src_clock: ClockRef, dst_clock: ClockRef) -> Self {
        Self {
            latency,
            src_clock,
            dst_clock,
        }
    }

    /// Link between two ends sharing one reference.
    pub fn shared(latency: Latency, clock: ClockRef) -> Self {
        Self::new(latency, clock.clone(), clock)
    }
}

/// A message whose events saw different delays in transit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StabilityViolation {
    /// Arrival events in emission order; ticks may be out of order.
    pub distorted: Vec<Event>,
    pub original_value: u64,
    pub distorted_value: i128,
    /// `distorted_value - original_value`.
    pub error: i128,
}

impl fmt::Display for StabilityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "value {} arrived as {} (error {:+})",
            self.original_value, self.distorted_value, self.error
        )
    }
}

/// Shift a message across a link. Succeeds when every event of the message
/// sees the same delay; otherwise reports the distortion.
pub fn transmit_checked(msg: &TimedMessage, link: &Link) -> Result<TimedMessage, StabilityViolation> {
    let mut arrivals = Vec::with_capacity(msg.events.len());
    let mut overflow = false;
    for e in &msg.events {
        let delay = link.latency.delay_at(e.tick);
        let tick = e.tick.checked_add(delay).unwrap_or_else(|| {
            overflow = true;
            Tick(u64::MAX)
        });
        arrivals.push(Event { role: e.role, tick });
    }
    let shift = |e: &Event| e.tick.0 as i128;
    let first = arrivals[0].tick;
    let stable = !overflow && arrivals
        .iter()
        .zip(&msg.events)
        .all(|(a, e)| shift(a) - shift(e) == first.0 as i128 - msg.start().0 as i128);
    if stable {
        return Ok(TimedMessage { events: arrivals });
    }
    let original_value = msg.span();
    let distorted_value = shift(arrivals.last().expect("non-empty")) - shift(&arrivals[0]);
    Err(StabilityViolation {
        distorted: arrivals,
        original_value,
        distorted_value,
        error: distorted_value - original_value as i128,
    })
}

pub fn transmit(msg: &TimedMessage, link: &Link) -> Result<TimedMessage, ChannelError> {
    transmit_checked(msg, link).map_err(|v| ChannelError::Unstable(Box::new(v)))
}

/// Exchange rate between two references: `dst / src`.
pub fn negotiate_reference(src: &ClockRef, dst: &ClockRef) -> Rational {
    src.ratio_to(dst)
}

/// Carry an interval across `link` and count it at the destination in the
/// destination's reference.
pub fn transmit_value(msg: &TimedMessage, link: &Link) -> Result<BigUint, ChannelError> {
    let arrived = transmit(msg, link)?;
    let value = BigUint::from(arrived.decode_interval()?);
    Ok(convert_reference(&value, &link.src_clock, &link.dst_clock))
}

/// Lay values out on one channel.
///
/// `Serial` places a pulse at every running sum, so each interior pulse ends
/// one value and starts the next. `SerialDiscontinuous` gives every value its
/// own start and end pulse with `gaps[i]` idle ticks after value `i`.
pub fn serialize_stream(
    values: &[u64],
    mode: DeliveryMode,
    gaps: Option<&[u64]>,
    clock: &ClockRef,
) -> Result<PulseTrain, ChannelError> {
    if let Some(i) = values.iter().position(|&v| v == 0) {
        return Err(ChannelError::ZeroValue(i));
    }
    let add = |t: Tick, d: u64| t.checked_add(d).ok_or(ChannelError::TickOverflow);
    let mut pulses = Vec::new();
    match mode {
        DeliveryMode::Serial => {
            if let Some(g) = gaps.filter(|g| !g.is_empty()) {
                return Err(ChannelError::GapCountMismatch { expected: 0, got: g.len() });
            }
            let mut at = Tick::ZERO;
            pulses.push(at);
            for &v in values {
                at = add(at, v)?;
                pulses.push(at);
            }
        }
        DeliveryMode::SerialDiscontinuous => {
            let gaps = gaps.unwrap_or(&[]);
            let expected = values.len().saturating_sub(1);
            if gaps.len() != expected {
                return Err(ChannelError::GapCountMismatch { expected, got: gaps.len() });
            }
            if let Some(i) = gaps.iter().position(|&g| g == 0) {
                return Err(ChannelError::MalformedStream(format!(
                    "gap {i} is zero; use serial mode for back-to-back values"
                )));
            }
            let mut at = Tick::ZERO;
            for (i, &v) in values.iter().enumerate() {
                if i > 0 {
                    at = add(at, gaps[i - 1])?;
                }
                pulses.push(at);
                at = add(at, v)?;
                pulses.push(at);
            }
        }
        other => {
            return Err(ChannelError::ModeMismatch(format!(
                "{other} is not a serial mode"
            )))
        }
    }
    Ok(PulseTrain::new(pulses, clock.clone()).expect("positive values keep pulses increasing"))
}

pub fn parse_stream(t: &PulseTrain, mode: DeliveryMode) -> Result<Vec<u64>, ChannelError> {
    let p = t.pulses();
    if p.first().is_some_and(|&s| s != Tick::ZERO) {
        return Err(ChannelError::MalformedStream("stream must start at tick 0".into()));
    }
    match mode {
        DeliveryMode::Serial => {
            if p.is_empty() {
                return Err(ChannelError::MalformedStream("missing start marker".into()));
            }
            Ok(p.windows(2).map(|w| w[1].0 - w[0].0).collect())
        }
        DeliveryMode::SerialDiscontinuous => {
            if !p.len().is_multiple_of(2) {
                return Err(ChannelError::MalformedStream(format!(
                    "{} pulses do not pair into start/end delimiters",
                    p.len()
                )));
            }
            Ok(p.chunks(2).map(|c| c[1].0 - c[0].0).collect())
        }
        other => Err(ChannelError::ModeMismatch(format!(
            "{other} is not a serial mode"
        ))),
    }
}

/// One lane per value, all from tick 0 or each from its own offset.
pub fn deliver_parallel(
    values: &[u64],
    mode: DeliveryMode,
    offsets: Option<&[Tick]>,
    clock: &ClockRef,
) -> Result<Vec<IntervalValue>, ChannelError> {
    let starts: Vec<Tick> = match mode {
        DeliveryMode::ParallelSynchronous => {
            if let Some(o) = offsets.filter(|o| !o.is_empty()) {
                return Err(ChannelError::OffsetCountMismatch { expected: 0, got: o.len() });
            }
            vec![Tick::ZERO; values.len()]
        }
        DeliveryMode::ParallelAsynchronous => {
            let o = offsets.unwrap_or(&[]);
            if o.len() != values.len() {
                return Err(ChannelError::OffsetCountMismatch {
                    expected: values.len(),
                    got: o.len(),
                });
            }
            o.to_vec()
        }
        other => {
            return Err(ChannelError::ModeMismatch(format!(
                "{other} is not a parallel mode"
            )))
        }
    };
    values
        .iter()
        .zip(starts)
        .map(|(&v, s)| IntervalValue::starting_at(s, v, clock.clone()).map_err(|_| ChannelError::TickOverflow))
        .collect()
}

pub fn measure_parallel(lanes: &[IntervalValue]) -> Vec<u64> {
    lanes.iter().map(IntervalValue::value).collect()
}
