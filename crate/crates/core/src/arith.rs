//! Arithmetic on temporal encodings.
//!
//! Addition concatenates unary trains, multiplication dilates a train by
//! re-measuring it against a faster reference, min/max race parallel lanes,
//! and multiplexed / multi-valent channels carry sets and dot products.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::codes::{encode_pim, CodeError, DeliveryMode, IntervalValue, MultiValentTrain, PulseTrain, UnaryTrain};
use crate::time::{scale_floor, ClockRef, Tick};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("clock mismatch: `{left}` vs `{right}` (convert the reference first)")]
    ClockMismatch { left: String, right: String },
    #[error("dilation factor must be at least 1")]
    ZeroFactor,
    #[error("operation needs at least one input")]
    EmptyInput,
    #[error("delivery mode mismatch: {0}")]
    ModeMismatch(String),
    #[error("value {0} appears more than once in a multiplexed set")]
    DuplicateValue(u64),
    #[error("value 0 collides with the start marker of a multiplexed channel")]
    ZeroValue,
    #[error("malformed multiplexed channel: {0}")]
    MalformedChannel(String),
    #[error("amplitude overflow at position {0}")]
    Overflow(Tick),
    #[error(transparent)]
    Code(#[from] CodeError),
}

fn same_clock(a: &ClockRef, b: &ClockRef) -> Result<(), ArithError> {
    if a == b {
        Ok(())
    } else {
        Err(ArithError::ClockMismatch {
            left: a.to_string(),
            right: b.to_string(),
        })
    }
}

/// Serial concatenation of two unary trains. Delivering the result costs
/// `x + y` ticks of the shared reference.
pub fn add_concat(x: &UnaryTrain, y: &UnaryTrain) -> Result<UnaryTrain, ArithError> {
    same_clock(x.clock(), y.clock())?;
    Ok(UnaryTrain::new(x.length() + y.length(), x.clock().clone()))
}

/// Dilate `x` by `k`: every mark of `x` is counted against a reference `k`
/// times faster, and the count is re-issued on the original clock.
pub fn mul_dilate(x: &UnaryTrain, k: &BigUint) -> Result<UnaryTrain, ArithError> {
    if k.is_zero() {
        return Err(ArithError::ZeroFactor);
    }
    let fast = x.clock().scaled(k).map_err(|_| ArithError::ZeroFactor)?;
    let dilated = scale_floor(x.length(), &x.clock().ratio_to(&fast));
    Ok(UnaryTrain::new(dilated, x.clock().clone()))
}

/// Product of two trains: the second operand is read first and used as the
/// dilation factor.
pub fn mul_trains(x: &UnaryTrain, y: &UnaryTrain) -> Result<UnaryTrain, ArithError> {
    same_clock(x.clock(), y.clock())?;
    if y.length().is_zero() {
        return Ok(UnaryTrain::new(BigUint::zero(), x.clock().clone()));
    }
    mul_dilate(x, y.length())
}

fn check_race(lanes: &[IntervalValue], mode: DeliveryMode) -> Result<Tick, ArithError> {
    if mode != DeliveryMode::ParallelSynchronous {
        return Err(ArithError::ModeMismatch(format!(
            "races need parallel-sync lanes, got {mode}"
        )));
    }
    let first = lanes.first().ok_or(ArithError::EmptyInput)?;
    for lane in &lanes[1..] {
        same_clock(first.clock(), lane.clock())?;
        if lane.start() != first.start() {
            return Err(ArithError::ModeMismatch(format!(
                "lanes start at {} and {}",
                first.start(),
                lane.start()
            )));
        }
    }
    Ok(first.start())
}

/// First arrival among synchronously started lanes (OR of the end events).
pub fn min_race(lanes: &[IntervalValue], mode: DeliveryMode) -> Result<u64, ArithError> {
    let origin = check_race(lanes, mode)?;
    let first = lanes.iter().map(IntervalValue::end).min().expect("non-empty");
    Ok(first.0 - origin.0)
}

/// Last arrival among synchronously started lanes (AND of the end events).
pub fn max_race(lanes: &[IntervalValue], mode: DeliveryMode) -> Result<u64, ArithError> {
    let origin = check_race(lanes, mode)?;
    let last = lanes.iter().map(IntervalValue::end).max().expect("non-empty");
    Ok(last.0 - origin.0)
}

/// Several distinct positive values sharing one channel after a start pulse
/// at tick 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MuxChannel {
    values: BTreeSet<u64>,
    clock: ClockRef,
}

impl MuxChannel {
    pub fn values(&self) -> &BTreeSet<u64> {
        &self.values
    }

    pub fn clock(&self) -> &ClockRef {
        &self.clock
    }

    /// Start pulse plus one pulse per value.
    pub fn to_train(&self) -> PulseTrain {
        let pulses = std::iter::once(Tick::ZERO)
            .chain(self.values.iter().copied().map(Tick))
            .collect();
        PulseTrain::new(pulses, self.clock.clone()).expect("set is ordered and positive")
    }
}

/// OR the interval codes of `values` onto a single channel.
pub fn mux(values: &[u64], clock: &ClockRef) -> Result<MuxChannel, ArithError> {
    if values.is_empty() {
        return Err(ArithError::EmptyInput);
    }
    let mut seen = BTreeSet::new();
    for &v in values {
        if v == 0 {
            return Err(ArithError::ZeroValue);
        }
        if !seen.insert(v) {
            return Err(ArithError::DuplicateValue(v));
        }
    }
    let line = values
        .iter()
        .map(|&v| encode_pim(v, clock))
        .reduce(|acc, code| acc.or(&code))
        .expect("non-empty");
    demux(&line).map(|values| MuxChannel {
        values,
        clock: clock.clone(),
    })
}

/// Read every value back off a multiplexed channel.
pub fn demux(train: &PulseTrain) -> Result<BTreeSet<u64>, ArithError> {
    match train.pulses().split_first() {
        Some((Tick(0), rest)) => Ok(rest.iter().map(|t| t.0).collect()),
        Some((first, _)) => Err(ArithError::MalformedChannel(format!(
            "start reference pulse at {first}, expected 0"
        ))),
        None => Err(ArithError::MalformedChannel("empty channel".into())),
    }
}

/// Amplitude `a` placed at temporal position `b`, standing for `a × b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TuplePair {
    a: u64,
    b: Tick,
}

impl TuplePair {
    pub fn new(a: u64, b: impl Into<Tick>) -> Result<Self, ArithError> {
        let b = b.into();
        if a == 0 {
            return Err(CodeError::ZeroAmplitude(b).into());
        }
        Ok(Self { a, b })
    }

    pub fn amplitude(&self) -> u64 {
        self.a
    }

    pub fn position(&self) -> Tick {
        self.b
    }
}

pub fn mv_place(pair: TuplePair, clock: &ClockRef) -> MultiValentTrain {
    MultiValentTrain::from_map(BTreeMap::from([(pair.b, pair.a)]), clock.clone())
}

/// Bucket-wise sum; amplitudes at equal positions add.
pub fn mv_merge(trains: &[MultiValentTrain]) -> Result<MultiValentTrain, ArithError> {
    let first = trains.first().ok_or(ArithError::EmptyInput)?;
    let mut buckets: BTreeMap<Tick, u64> = BTreeMap::new();
    for t in trains {
        same_clock(first.clock(), t.clock())?;
        for (&pos, &amp) in t.buckets() {
            let slot = buckets.entry(pos).or_insert(0);
            *slot = slot.checked_add(amp).ok_or(ArithError::Overflow(pos))?;
        }
    }
    Ok(MultiValentTrain::from_map(buckets, first.clock().clone()))
}

/// Multiplicative add: the dot product `Σ p · amplitude(p)`.
///
/// One sweep from the highest occupied position down to 0. A running sum
/// `S` picks up each bucket's amplitude as the sweep enters its tick, and
/// every step from tick `t` to `t - 1` adds `S` to the accumulator, so a
/// bucket at position `p` is counted exactly `p` times. Stretches with no
/// buckets leave `S` unchanged and are advanced in one step.
pub fn madd(train: &MultiValentTrain) -> BigUint {
    let mut running = BigUint::zero();
    let mut acc = BigUint::zero();
    let mut buckets = train.buckets().iter().rev().peekable();
    while let Some((&pos, &amp)) = buckets.next() {
        running += amp;
        let next = buckets.peek().map_or(0, |(p, _)| p.0);
        acc += &running * (pos.0 - next);
    }
    acc
}

/// Ticks a sweep occupies: every position from the highest bucket down to 0.
pub fn madd_sweep_ticks(train: &MultiValentTrain) -> u64 {
    train.highest_position().map_or(0, |p| p.0 + 1)
}

/// Value of an accumulated dot product as a `u64`, if it fits.
pub fn madd_u64(train: &MultiValentTrain) -> Option<u64> {
    madd(train).to_u64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{decode_unary, encode_unary};
    use proptest::prelude::*;

    fn clk() -> ClockRef {
        ClockRef::unit("main")
    }

    fn u(n: u64) -> UnaryTrain {
        encode_unary(n, &clk())
    }

    fn lanes(values: &[u64]) -> Vec<IntervalValue> {
        values
            .iter()
            .map(|&v| IntervalValue::starting_at(Tick(0), v, clk()).unwrap())
            .collect()
    }

    fn mv(pairs: &[(u64, u64)]) -> MultiValentTrain {
        MultiValentTrain::new(pairs.iter().map(|&(p, a)| (Tick(p), a)), clk()).unwrap()
    }

    #[test]
    fn add_examples() {
        assert_eq!(decode_unary(&add_concat(&u(3), &u(4)).unwrap()), BigUint::from(7u32));
        assert_eq!(decode_unary(&add_concat(&u(0), &u(9)).unwrap()), BigUint::from(9u32));
    }

    #[test]
    fn add_rejects_mixed_clocks() {
        let other = encode_unary(4u32, &ClockRef::with_hz("fast", 3).unwrap());
        assert!(matches!(
            add_concat(&u(3), &other),
            Err(ArithError::ClockMismatch { .. })
        ));
    }

    #[test]
    fn mul_examples() {
        assert_eq!(
            decode_unary(&mul_dilate(&u(5), &3u32.into()).unwrap()),
            BigUint::from(15u32)
        );
        assert_eq!(decode_unary(&mul_dilate(&u(9), &1u32.into()).unwrap()), BigUint::from(9u32));
        assert_eq!(mul_dilate(&u(9), &BigUint::zero()), Err(ArithError::ZeroFactor));
        assert_eq!(decode_unary(&mul_trains(&u(5), &u(3)).unwrap()), BigUint::from(15u32));
        assert_eq!(decode_unary(&mul_trains(&u(5), &u(0)).unwrap()), BigUint::zero());
    }

    #[test]
    fn race_examples() {
        let sync = DeliveryMode::ParallelSynchronous;
        assert_eq!(min_race(&lanes(&[5, 7]), sync), Ok(5));
        assert_eq!(max_race(&lanes(&[5, 7]), sync), Ok(7));
        assert_eq!(min_race(&lanes(&[11]), sync), Ok(11));
        assert_eq!(max_race(&lanes(&[11]), sync), Ok(11));
        assert_eq!(min_race(&[], sync), Err(ArithError::EmptyInput));

        let skewed = vec![
            IntervalValue::new(Tick(0), Tick(5), clk()).unwrap(),
            IntervalValue::new(Tick(2), Tick(9), clk()).unwrap(),
        ];
        assert!(matches!(min_race(&skewed, sync), Err(ArithError::ModeMismatch(_))));
        assert!(matches!(
            max_race(&lanes(&[1, 2]), DeliveryMode::ParallelAsynchronous),
            Err(ArithError::ModeMismatch(_))
        ));
    }

    #[test]
    fn race_lanes_offset_together() {
        let sync = DeliveryMode::ParallelSynchronous;
        let shifted: Vec<_> = [5u64, 7, 3]
            .iter()
            .map(|&v| IntervalValue::starting_at(Tick(40), v, clk()).unwrap())
            .collect();
        assert_eq!(min_race(&shifted, sync), Ok(3));
        assert_eq!(max_race(&shifted, sync), Ok(7));
    }

    #[test]
    fn mux_examples() {
        let ch = mux(&[5, 7], &clk()).unwrap();
        assert_eq!(ch.to_train().pulses(), &[Tick(0), Tick(5), Tick(7)]);
        assert_eq!(mux(&[9], &clk()).unwrap().to_train(), encode_pim(9, &clk()));

        // OR of the four interval codes, computed by hand.
        let ch = mux(&[11, 3, 7, 5], &clk()).unwrap();
        let expected: Vec<Tick> = [0, 3, 5, 7, 11].into_iter().map(Tick).collect();
        assert_eq!(ch.to_train().pulses(), expected.as_slice());

        assert_eq!(mux(&[5, 7, 5], &clk()), Err(ArithError::DuplicateValue(5)));
        assert_eq!(mux(&[0, 7], &clk()), Err(ArithError::ZeroValue));
        assert_eq!(mux(&[], &clk()), Err(ArithError::EmptyInput));
    }

    #[test]
    fn demux_examples() {
        let t = PulseTrain::new(vec![Tick(0), Tick(5), Tick(7)], clk()).unwrap();
        assert_eq!(demux(&t).unwrap(), BTreeSet::from([5, 7]));
        let t = PulseTrain::new(vec![Tick(0), Tick(4)], clk()).unwrap();
        assert_eq!(demux(&t).unwrap(), BTreeSet::from([4]));
        let bad = PulseTrain::new(vec![Tick(5), Tick(7)], clk()).unwrap();
        assert!(matches!(demux(&bad), Err(ArithError::MalformedChannel(_))));
    }

    #[test]
    fn placement_examples() {
        let place = |a, b| mv_place(TuplePair::new(a, b).unwrap(), &clk());
        assert_eq!(place(3, 5u64), mv(&[(5, 3)]));
        assert_eq!(place(1, 0u64), mv(&[(0, 1)]));
        assert_eq!(place(4, 3u64), mv(&[(3, 4)]));
        assert!(TuplePair::new(0, 3u64).is_err());
    }

    #[test]
    fn merge_examples() {
        assert_eq!(mv_merge(&[mv(&[(2, 3)]), mv(&[(3, 4)])]).unwrap(), mv(&[(2, 3), (3, 4)]));
        assert_eq!(
            mv_merge(&[mv(&[(5, 3)]), MultiValentTrain::empty(clk())]).unwrap(),
            mv(&[(5, 3)])
        );
        let merged = mv_merge(&[mv(&[(4, 2)]), mv(&[(4, 5)])]).unwrap();
        assert_eq!(merged, mv(&[(4, 7)]));
        assert_eq!(madd(&merged), BigUint::from(4u32 * 2 + 4 * 5));
        assert_eq!(mv_merge(&[]), Err(ArithError::EmptyInput));
        assert_eq!(
            mv_merge(&[mv(&[(1, u64::MAX)]), mv(&[(1, 1)])]),
            Err(ArithError::Overflow(Tick(1)))
        );
    }

    #[test]
    fn madd_examples() {
        assert_eq!(madd(&mv(&[(2, 3), (3, 4)])), BigUint::from(18u32));
        assert_eq!(madd(&mv(&[(5, 3)])), BigUint::from(15u32));
        assert_eq!(madd(&mv(&[(0, 9)])), BigUint::zero());
        assert_eq!(madd(&MultiValentTrain::empty(clk())), BigUint::zero());
        assert_eq!(madd_sweep_ticks(&mv(&[(2, 3), (3, 4)])), 4);
    }

    // Literal tick-by-tick sweep; the run-length version must agree with it.
    fn sweep_per_tick(train: &MultiValentTrain) -> u64 {
        let Some(top) = train.highest_position() else { return 0 };
        let (mut s, mut acc) = (0u64, 0u64);
        for t in (1..=top.0).rev() {
            s += train.amplitude(Tick(t));
            acc += s;
        }
        acc
    }

    fn arb_train() -> impl Strategy<Value = MultiValentTrain> {
        proptest::collection::btree_map(0u64..1000, 1u64..=255, 0..32)
            .prop_map(|m| MultiValentTrain::new(m.into_iter().map(|(p, a)| (Tick(p), a)), clk()).unwrap())
    }

    proptest! {
        #[test]
        fn add_commutes_and_associates(a in 0u64..10_000, b in 0u64..10_000, c in 0u64..10_000) {
            let ab = add_concat(&u(a), &u(b)).unwrap();
            prop_assert_eq!(&ab, &add_concat(&u(b), &u(a)).unwrap());
            prop_assert_eq!(
                add_concat(&ab, &u(c)).unwrap(),
                add_concat(&u(a), &add_concat(&u(b), &u(c)).unwrap()).unwrap()
            );
            prop_assert_eq!(add_concat(&u(a), &u(0)).unwrap(), u(a));
        }

        #[test]
        fn dilation_distributes(a in 0u64..1000, b in 0u64..1000, k in 1u64..50) {
            let k = BigUint::from(k);
            let lhs = mul_dilate(&add_concat(&u(a), &u(b)).unwrap(), &k).unwrap();
            let rhs = add_concat(&mul_dilate(&u(a), &k).unwrap(), &mul_dilate(&u(b), &k).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn mux_is_order_independent(set in proptest::collection::btree_set(1u64..10_000, 1..64)) {
            let forward: Vec<u64> = set.iter().copied().collect();
            let backward: Vec<u64> = forward.iter().rev().copied().collect();
            let ch = mux(&forward, &clk()).unwrap();
            prop_assert_eq!(&ch, &mux(&backward, &clk()).unwrap());
            prop_assert_eq!(&demux(&ch.to_train()).unwrap(), &set);
            // a repeated code ORs onto itself without changing the line
            let train = ch.to_train();
            prop_assert_eq!(train.or(&train), train);
        }

        #[test]
        fn madd_matches_per_tick_sweep(train in arb_train()) {
            prop_assert_eq!(madd(&train), BigUint::from(sweep_per_tick(&train)));
        }

        #[test]
        fn merge_preserves_dot_product(a in arb_train(), b in arb_train()) {
            let merged = mv_merge(&[a.clone(), b.clone()]).unwrap();
            prop_assert_eq!(madd(&merged), madd(&a) + madd(&b));
        }
    }
}
