//! Temporal computing: values carried as time intervals between events,
//! counted against a time reference.
//!
//! - [`time`]: ticks, time references and exact frequency ratios.
//! - [`codes`]: unary, interval (PIM) and hybrid positional codes.
//! - [`arith`]: concatenation add, dilation multiply, races, multiplexing,
//!   multi-valent placement and the MADD dot-product sweep.
//! - [`accumulators`]: digital, toggle-chain, analog and photonic counters.
//! - [`channel`]: asynchronous transport, delay stability and delivery modes.
//! - [`sim`]: netlist format and the deterministic discrete-event engine.

pub mod accumulators;
pub mod arith;
pub mod channel;
pub mod codes;
pub mod sim;
pub mod time;

pub use codes::{DeliveryMode, IntervalValue, MultiValentTrain, PulseTrain, UnaryTrain};
pub use time::{ClockRef, Rational, Tick};
