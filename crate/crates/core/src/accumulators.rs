//! Behavioural models of the accumulate unit: a digital reference counter, a
//! toggle-latch chain, an ideal analog integrator and a photon counter.
//!
//! All models gate the time reference with the received interval. Reference
//! edges are aligned to the start event and a reference period is counted
//! when it lies wholly inside the half-open window `[start, end)`, so
//! back-to-back intervals never count the same period twice.

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::codes::{measure_interval, IntervalValue};
use crate::time::{scale_floor, ClockRef, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AccumulatorError {
    #[error("toggle chain depth must be at least 1")]
    ZeroDepth,
    #[error("analog charge rate must be positive")]
    NonPositiveRate,
    #[error("photon flux must be positive")]
    NonPositiveFlux,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AccumulatorModel {
    DigitalCounter,
    ToggleChain { depth: u32 },
    AnalogIntegrator { rate: Rational },
    PhotonCounter { flux: Rational },
}

impl fmt::Display for AccumulatorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AccumulatorModel::DigitalCounter => f.write_str("digital"),
            AccumulatorModel::ToggleChain { depth } => write!(f, "toggle(depth={depth})"),
            AccumulatorModel::AnalogIntegrator { rate } => write!(f, "analog(rate={rate})"),
            AccumulatorModel::PhotonCounter { flux } => write!(f, "photon(flux={flux})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccumulatorConfig {
    model: AccumulatorModel,
    noise_seed: Option<u64>,
}

impl AccumulatorConfig {
    pub fn new(model: AccumulatorModel, noise_seed: Option<u64>) -> Result<Self, AccumulatorError> {
        match &model {
            AccumulatorModel::ToggleChain { depth: 0 } => return Err(AccumulatorError::ZeroDepth),
            AccumulatorModel::AnalogIntegrator { rate } if rate.is_zero() => {
                return Err(AccumulatorError::NonPositiveRate)
            }
            AccumulatorModel::PhotonCounter { flux } if flux.is_zero() => {
                return Err(AccumulatorError::NonPositiveFlux)
            }
            _ => {}
        }
        Ok(Self { model, noise_seed })
    }

    pub fn digital() -> Self {
        Self {
            model: AccumulatorModel::DigitalCounter,
            noise_seed: None,
        }
    }

    pub fn model(&self) -> &AccumulatorModel {
        &self.model
    }

    pub fn noise_seed(&self) -> Option<u64> {
        self.noise_seed
    }
}

/// Count reference periods of `reference` inside the interval.
pub fn accumulate_digital(iv: &IntervalValue, reference: &ClockRef) -> BigUint {
    // Number of whole periods of length f_iv/f_ref that fit in the window.
    let len = BigUint::from(iv.value());
    let period = reference.ratio_to(iv.clock());
    (len * period.denom()).div_floor(period.numer())
}

/// Binary word read off a toggle chain, least-significant bit first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryWord {
    bits: Vec<bool>,
}

impl BinaryWord {
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn width(&self) -> usize {
        self.bits.len()
    }

    pub fn value(&self) -> BigUint {
        self.bits
            .iter()
            .rev()
            .fold(BigUint::zero(), |acc, &b| (acc << 1u32) + u32::from(b))
    }
}

impl fmt::Display for BinaryWord {
    // Most significant bit first, as a binary literal reads.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in self.bits.iter().rev() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Cascade of toggle latches. Each stage flips on every input pulse and
/// passes one pulse on to the next stage for every two it receives.
#[derive(Clone, Debug)]
pub struct ToggleChain {
    stages: Vec<bool>,
    overflowed: bool,
}

impl ToggleChain {
    pub fn new(depth: u32) -> Result<Self, AccumulatorError> {
        if depth == 0 {
            return Err(AccumulatorError::ZeroDepth);
        }
        Ok(Self {
            stages: vec![false; depth as usize],
            overflowed: false,
        })
    }

    /// Drive `pulses` reference pulses into the first stage. Returns the
    /// number of pulses that fell off the last stage (wrapped away).
    pub fn feed(&mut self, pulses: &BigUint) -> BigUint {
        let mut incoming = pulses.clone();
        for stage in self.stages.iter_mut() {
            if incoming.is_zero() {
                return incoming;
            }
            // A stage emits a carry on each 1 -> 0 transition.
            let total = incoming + u32::from(*stage);
            let (carries, state) = total.div_rem(&BigUint::from(2u32));
            *stage = !state.is_zero();
            incoming = carries;
        }
        if !incoming.is_zero() {
            self.overflowed = true;
        }
        incoming
    }

    pub fn word(&self) -> BinaryWord {
        BinaryWord {
            bits: self.stages.clone(),
        }
    }

    /// True once any pulse has carried out of the last stage.
    pub fn overflowed(&self) -> bool {
        self.overflowed
    }
}

pub fn toggle_chain(pulse_count: &BigUint, depth: u32) -> Result<BinaryWord, AccumulatorError> {
    let mut chain = ToggleChain::new(depth)?;
    chain.feed(pulse_count);
    Ok(chain.word())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnalogReading {
    pub charge: Rational,
    pub value: BigUint,
}

/// Ideal integrator: charge grows by `rate` per counted reference period.
pub fn accumulate_analog(
    iv: &IntervalValue,
    reference: &ClockRef,
    rate: &Rational,
) -> Result<AnalogReading, AccumulatorError> {
    if rate.is_zero() {
        return Err(AccumulatorError::NonPositiveRate);
    }
    let periods = Rational::from_integer(measure_interval(iv, reference));
    let charge = periods * rate;
    let value = charge.floor().to_integer();
    Ok(AnalogReading { charge, value })
}

/// Photon counter with mean `flux` photons per reference period. Without a
/// seed the count is the ideal `floor(flux * periods)`; with a seed it is a
/// Poisson draw around that mean.
pub fn accumulate_photonic(
    iv: &IntervalValue,
    reference: &ClockRef,
    flux: &Rational,
    noise_seed: Option<u64>,
) -> Result<BigUint, AccumulatorError> {
    if flux.is_zero() {
        return Err(AccumulatorError::NonPositiveFlux);
    }
    let periods = measure_interval(iv, reference);
    let Some(seed) = noise_seed else {
        return Ok(scale_floor(&periods, flux));
    };
    let mean = Rational::from_integer(periods) * flux;
    if mean.is_zero() {
        return Ok(BigUint::zero());
    }
    let lambda = mean.numer().to_f64().unwrap_or(f64::MAX) / mean.denom().to_f64().unwrap_or(f64::MAX);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw: f64 = Poisson::new(lambda)
        .expect("finite positive mean")
        .sample(&mut rng);
    Ok(BigUint::from(draw as u64))
}

/// Re-denominate a count taken against `from` into `to` pulses.
pub fn convert_reference(value: &BigUint, from: &ClockRef, to: &ClockRef) -> BigUint {
    if from.same_rate(to) {
        return value.clone();
    }
    scale_floor(value, &from.ratio_to(to))
}

/// Output of a configured accumulator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reading {
    pub value: BigUint,
    pub overflow: bool,
}

pub fn accumulate(config: &AccumulatorConfig, iv: &IntervalValue, reference: &ClockRef) -> Reading {
    let value = match config.model() {
        AccumulatorModel::DigitalCounter => accumulate_digital(iv, reference),
        AccumulatorModel::ToggleChain { depth } => {
            let mut chain = ToggleChain::new(*depth).expect("validated depth");
            chain.feed(&accumulate_digital(iv, reference));
            return Reading {
                value: chain.word().value(),
                overflow: chain.overflowed(),
            };
        }
        AccumulatorModel::AnalogIntegrator { rate } => {
            accumulate_analog(iv, reference, rate).expect("validated rate").value
        }
        AccumulatorModel::PhotonCounter { flux } => {
            accumulate_photonic(iv, reference, flux, config.noise_seed()).expect("validated flux")
        }
    };
    Reading {
        value,
        overflow: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::Tick;
    use crate::time::parse_rational;
    use proptest::prelude::*;

    fn clk() -> ClockRef {
        ClockRef::unit("main")
    }

    fn iv(start: u64, end: u64) -> IntervalValue {
        IntervalValue::new(Tick(start), Tick(end), clk()).unwrap()
    }

    fn q(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    // Walk reference edges aligned to the start event on a common integer
    // time base and count whole periods inside [start, end).
    fn count_edges(iv: &IntervalValue, reference: &ClockRef) -> u64 {
        let (fi, fr) = (iv.clock().frequency(), reference.frequency());
        // Time unit 1 / (num_i * num_r * den...) : scale both to integers.
        let base = fi.numer() * fr.numer();
        let tick_len = &base / fi.numer() * fi.denom(); // one interval tick
        let period = &base / fr.numer() * fr.denom(); // one reference period
        let window = tick_len * iv.value();
        let mut count = 0u64;
        let mut edge = BigUint::zero();
        while &edge + &period <= window {
            count += 1;
            edge += &period;
        }
        count
    }

    #[test]
    fn digital_examples() {
        assert_eq!(accumulate_digital(&iv(0, 7), &clk()), big(7));
        assert_eq!(accumulate_digital(&iv(3, 3), &clk()), big(0));
        let fast = ClockRef::with_hz("x3", 3).unwrap();
        assert_eq!(accumulate_digital(&iv(0, 5), &fast), big(15));
    }

    #[test]
    fn digital_matches_edge_walk() {
        let refs = ["1", "3", "1/2", "2/3", "7/5"];
        for r in refs {
            let reference = ClockRef::new("r", q(r)).unwrap();
            for len in 0..60 {
                let i = iv(5, 5 + len);
                assert_eq!(accumulate_digital(&i, &reference), big(count_edges(&i, &reference)), "ref {r} len {len}");
            }
        }
    }

    // Feed one pulse at a time through explicit divide-by-two stages.
    fn stagewise(n: u64, depth: u32) -> Vec<bool> {
        let mut latches = vec![false; depth as usize];
        for _ in 0..n {
            for latch in latches.iter_mut() {
                *latch = !*latch;
                if *latch {
                    break; // 0 -> 1 does not propagate
                }
            }
        }
        latches
    }

    #[test]
    fn toggle_examples() {
        assert_eq!(toggle_chain(&big(7), 3).unwrap().bits(), &[true, true, true]);
        assert_eq!(toggle_chain(&big(0), 4).unwrap().bits(), &[false; 4]);
        assert_eq!(toggle_chain(&big(18), 4).unwrap().bits(), &[false, true, false, false]);
        assert_eq!(stagewise(18, 4), vec![false, true, false, false]);
        assert_eq!(toggle_chain(&big(18), 4).unwrap().to_string(), "0010");
        assert_eq!(toggle_chain(&big(1), 0), Err(AccumulatorError::ZeroDepth));
    }

    #[test]
    fn toggle_overflow_is_flagged() {
        let mut chain = ToggleChain::new(4).unwrap();
        assert_eq!(chain.feed(&big(15)), big(0));
        assert!(!chain.overflowed());
        assert_eq!(chain.feed(&big(3)), big(1));
        assert!(chain.overflowed());
        assert_eq!(chain.word().value(), big(2));
    }

    #[test]
    fn toggle_matches_stagewise() {
        for depth in 1..=8 {
            for n in 0..600 {
                let word = toggle_chain(&big(n), depth).unwrap();
                assert_eq!(word.bits(), stagewise(n, depth).as_slice());
                assert_eq!(word.width(), depth as usize);
            }
        }
    }

    #[test]
    fn analog_examples() {
        let r = accumulate_analog(&iv(0, 7), &clk(), &q("1")).unwrap();
        assert_eq!((r.charge, r.value), (q("7"), big(7)));
        let r = accumulate_analog(&iv(0, 5), &clk(), &q("3")).unwrap();
        assert_eq!(r.charge, q("15"));
        let r = accumulate_analog(&iv(0, 4), &clk(), &q("1/3")).unwrap();
        assert_eq!((r.charge, r.value), (q("4/3"), big(1)));
        assert!(accumulate_analog(&iv(0, 4), &clk(), &q("0")).is_err());
    }

    #[test]
    fn photonic_examples() {
        assert_eq!(accumulate_photonic(&iv(0, 7), &clk(), &q("1"), None), Ok(big(7)));
        assert_eq!(accumulate_photonic(&iv(4, 4), &clk(), &q("5"), None), Ok(big(0)));
        assert_eq!(accumulate_photonic(&iv(4, 4), &clk(), &q("5"), Some(1)), Ok(big(0)));
        assert_eq!(
            accumulate_photonic(&iv(0, 100), &clk(), &q("2"), Some(9)),
            accumulate_photonic(&iv(0, 100), &clk(), &q("2"), Some(9))
        );
    }

    #[test]
    fn photonic_noise_mean_converges() {
        let i = iv(0, 10_000);
        let total: u64 = (0..1000u64)
            .map(|seed| {
                accumulate_photonic(&i, &clk(), &q("2"), Some(seed))
                    .unwrap()
                    .to_u64()
                    .unwrap()
            })
            .sum();
        let mean = total as f64 / 1000.0;
        assert!((mean - 20_000.0).abs() / 20_000.0 < 0.01, "mean {mean}");
    }

    #[test]
    fn convert_examples() {
        let f = clk();
        let f3 = ClockRef::with_hz("f3", 3).unwrap();
        assert_eq!(convert_reference(&big(5), &f, &f3), big(15));
        assert_eq!(convert_reference(&big(42), &f, &f), big(42));
        let f2 = ClockRef::with_hz("f2", 2).unwrap();
        assert_eq!(convert_reference(&big(7), &f3, &f2), big(4));
    }

    #[test]
    fn config_validation() {
        assert!(AccumulatorConfig::new(AccumulatorModel::ToggleChain { depth: 0 }, None).is_err());
        assert!(AccumulatorConfig::new(AccumulatorModel::AnalogIntegrator { rate: q("0") }, None).is_err());
        assert!(AccumulatorConfig::new(AccumulatorModel::PhotonCounter { flux: q("0") }, None).is_err());
        let c = AccumulatorConfig::new(AccumulatorModel::ToggleChain { depth: 2 }, None).unwrap();
        let r = accumulate(&c, &iv(0, 5), &clk());
        assert_eq!(r, Reading { value: big(1), overflow: true });
    }

    proptest! {
        #[test]
        fn models_agree_at_unit_scale(start in 0u64..10_000, len in 0u64..100_000, num in 1u64..9, den in 1u64..9) {
            let reference = ClockRef::new("r", q(&format!("{num}/{den}"))).unwrap();
            let i = IntervalValue::starting_at(Tick(start), len, clk()).unwrap();
            let digital = accumulate_digital(&i, &reference);
            prop_assert_eq!(&digital, &measure_interval(&i, &reference));
            prop_assert_eq!(&accumulate_analog(&i, &reference, &q("1")).unwrap().value, &digital);
            prop_assert_eq!(&accumulate_photonic(&i, &reference, &q("1"), None).unwrap(), &digital);
        }

        #[test]
        fn convert_round_trips_on_integral_ratios(v in 0u64..1_000_000, k in 1u64..100) {
            let a = clk();
            let b = ClockRef::with_hz("b", k).unwrap();
            let there = convert_reference(&big(v), &a, &b);
            prop_assert_eq!(convert_reference(&there, &b, &a), big(v));
        }

        #[test]
        fn convert_is_monotone(v in 0u64..1_000_000, w in 0u64..1_000_000, n in 1u64..20, d in 1u64..20) {
            let a = clk();
            let b = ClockRef::new("b", q(&format!("{n}/{d}"))).unwrap();
            let (lo, hi) = (v.min(w), v.max(w));
            prop_assert!(convert_reference(&big(lo), &a, &b) <= convert_reference(&big(hi), &a, &b));
        }
    }
}
