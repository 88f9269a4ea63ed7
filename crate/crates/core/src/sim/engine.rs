//! Deterministic discrete-event engine.
//!
//! Blocks fire when every input port holds a complete message and re-emit
//! their result one overhead tick later. There is no global control clock:
//! the only thing that moves a block is the arrival of events. Events are
//! processed in `(tick, block id, port)` order, ties broken by scheduling
//! order, so a run is a pure function of the netlist and the seed.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use thiserror::Error;

use crate::accumulators::{accumulate, convert_reference, AccumulatorConfig};
use crate::arith::{self, madd_sweep_ticks, mv_merge};
use crate::channel::{deliver_parallel, transmit_checked, Event, Latency, Link, Role, TimedMessage};
use crate::codes::{encode_unary, DeliveryMode, IntervalValue, MultiValentTrain, PulseTrain};
use crate::sim::netlist::{BlockConfig, BlockKind, LatencySpec, Netlist, NoiseSeed, Port, PortRef, SignalKind, SourcePayload};
use crate::sim::trace::{BlockCost, ProbeValue, Trace, TraceEvent, ViolationRecord, BLOCK_OVERHEAD};
use crate::time::Tick;

pub const DEFAULT_BUDGET: u64 = 100_000_000;

/// Deliberate defects for exercising the oracle harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Every add block reports one more than the sum.
    AddOffByOne,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOptions {
    /// Last tick that may be processed.
    pub budget: u64,
    /// Feeds link jitter and accumulators with `noise=poisson`.
    pub seed: u64,
    /// Largest value any block may produce.
    pub max_value: Option<u64>,
    pub fault: Option<Fault>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            seed: 0,
            max_value: None,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("block `{block}`: {message}")]
    Block { block: String, message: String },
    #[error("block `{block}` produced {value}, above the limit of {max}")]
    ValueGuard { block: String, value: BigUint, max: u64 },
    #[error("line {0}: latency table was never loaded")]
    UnresolvedTable(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Pending {
    tick: Tick,
    block: usize,
    port: Port,
    seq: u64,
    role: Role,
    arrival: bool,
}

struct Engine<'a> {
    net: &'a Netlist,
    opts: &'a RunOptions,
    ids: Vec<&'a str>,
    index: HashMap<&'a str, usize>,
    links: Vec<Link>,
    queue: BinaryHeap<Reverse<Pending>>,
    seq: u64,
    inbox: HashMap<(usize, Port), Vec<Event>>,
    complete: HashMap<usize, BTreeMap<u32, TimedMessage>>,
    emitted: HashMap<(usize, Port), TimedMessage>,
    probes: HashMap<PortRef, String>,
    trace: Trace,
}

pub fn run(net: &Netlist, opts: &RunOptions) -> Result<Trace, SimError> {
    let ids: Vec<&str> = net.blocks.keys().map(String::as_str).collect();
    let index = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let links = net
        .wires
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let latency = match &w.latency {
                LatencySpec::Constant(d) => Latency::Constant(*d),
                LatencySpec::Jitter(max) => Latency::Jitter {
                    seed: opts.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ i as u64,
                    max: *max,
                },
                LatencySpec::Table { table: Some(t), .. } => Latency::Table(t.clone()),
                LatencySpec::Table { table: None, .. } => return Err(SimError::UnresolvedTable(w.line)),
            };
            let clock = net.clock(&net.port_types[&w.src].1).clone();
            Ok(Link::shared(latency, clock))
        })
        .collect::<Result<_, _>>()?;
    let probes = net
        .probe_keys()
        .into_iter()
        .map(|(key, port)| (port, key))
        .collect();

    let mut engine = Engine {
        net,
        opts,
        ids,
        index,
        links,
        queue: BinaryHeap::new(),
        seq: 0,
        inbox: HashMap::new(),
        complete: HashMap::new(),
        emitted: HashMap::new(),
        probes,
        trace: Trace::default(),
    };
    engine.start_sources()?;
    engine.drain()?;
    Ok(engine.trace)
}

impl<'a> Engine<'a> {
    fn fail(&self, block: &str, message: impl ToString) -> SimError {
        SimError::Block {
            block: block.to_string(),
            message: message.to_string(),
        }
    }

    fn push(&mut self, tick: Tick, block: usize, port: Port, role: Role, arrival: bool) {
        self.seq += 1;
        self.queue.push(Reverse(Pending {
            tick,
            block,
            port,
            seq: self.seq,
            role,
            arrival,
        }));
    }

    fn start_sources(&mut self) -> Result<(), SimError> {
        for (i, b) in self.net.blocks.values().enumerate() {
            let BlockConfig::Source { payload, at } = &b.config else { continue };
            let origin = Tick(*at);
            let clock = self.net.clock(&self.net.port_types[&PortRef::new(&b.id, Port::Out)].1);
            let msg = match payload {
                SourcePayload::Interval(v) => IntervalValue::starting_at(origin, *v, clock.clone())
                    .map(|iv| TimedMessage::interval(&iv))
                    .map_err(|e| self.fail(&b.id, e))?,
                SourcePayload::Marks(marks) => {
                    let train = MultiValentTrain::new(marks.iter().map(|&(p, a)| (Tick(p), a)), clock.clone())
                        .map_err(|e| self.fail(&b.id, e))?;
                    TimedMessage::multivalent(&train, origin).map_err(|e| self.fail(&b.id, e))?
                }
            };
            self.emit(i, Port::Out, msg)?;
        }
        Ok(())
    }

    fn drain(&mut self) -> Result<(), SimError> {
        while let Some(Reverse(p)) = self.queue.pop() {
            if p.tick.0 > self.opts.budget {
                self.trace.budget_exhausted = true;
                break;
            }
            self.trace.events.push(TraceEvent {
                tick: p.tick,
                block: self.ids[p.block].to_string(),
                port: p.port,
                role: p.role,
            });
            let key = (p.block, p.port);
            if p.arrival {
                self.inbox.entry(key).or_default().push(Event { role: p.role, tick: p.tick });
                if p.role == Role::End {
                    self.deliver(p.block, p.port, p.tick)?;
                }
            } else if p.role == Role::End {
                let msg = self.emitted[&key].clone();
                self.record_probe(p.block, p.port, &msg)?;
            }
        }
        Ok(())
    }

    fn deliver(&mut self, block: usize, port: Port, now: Tick) -> Result<(), SimError> {
        let events = self.inbox.remove(&(block, port)).unwrap_or_default();
        let id = self.ids[block];
        let msg = TimedMessage::new(events).map_err(|e| self.fail(id, e))?;
        self.record_probe(block, port, &msg)?;
        let Port::In(i) = port else { unreachable!("arrivals target inputs") };
        let slot = self.complete.entry(block).or_default();
        slot.insert(i, msg);
        if slot.len() as u32 == self.net.input_count(id) {
            let inputs: Vec<TimedMessage> = self.complete.remove(&block).expect("present").into_values().collect();
            self.fire(block, now, inputs)?;
        }
        Ok(())
    }

    fn record_probe(&mut self, block: usize, port: Port, msg: &TimedMessage) -> Result<(), SimError> {
        let pref = PortRef::new(self.ids[block], port);
        let Some(key) = self.probes.get(&pref).cloned() else { return Ok(()) };
        let kind = self.signal_kind(&pref);
        let value = decode(kind, msg).map_err(|m| self.fail(self.ids[block], m))?;
        self.trace.results.insert(key, value);
        Ok(())
    }

    fn signal_kind(&self, port: &PortRef) -> SignalKind {
        let src = if port.port.is_input() {
            &self.net.driver(port).expect("validated").src
        } else {
            port
        };
        self.net.port_types[src].0
    }

    fn input_clock(&self, block: &str) -> &'a crate::time::ClockRef {
        let w = self.net.driver(&PortRef::new(block, Port::In(0))).expect("validated");
        self.net.clock(&self.net.port_types[&w.src].1)
    }

    fn guard(&self, block: &str, value: BigUint) -> Result<u64, SimError> {
        let limit = self.opts.max_value.unwrap_or(u64::MAX);
        match value.to_u64() {
            Some(v) if v <= limit => Ok(v),
            _ => Err(SimError::ValueGuard {
                block: block.to_string(),
                value,
                max: limit,
            }),
        }
    }

    fn fire(&mut self, block: usize, now: Tick, inputs: Vec<TimedMessage>) -> Result<(), SimError> {
        let net = self.net;
        let id = self.ids[block];
        let def = &net.blocks[id];
        let origin = now.checked_add(BLOCK_OVERHEAD).ok_or_else(|| self.fail(id, "tick overflow"))?;
        let scalars = || -> Result<Vec<u64>, SimError> {
            inputs
                .iter()
                .map(|m| m.decode_interval().map_err(|e| self.fail(id, e)))
                .collect()
        };
        let out_clock = self.input_clock_or_default(id);
        let interval = |v: u64, from: Tick| -> Result<TimedMessage, SimError> {
            IntervalValue::starting_at(from, v, out_clock.clone())
                .map(|iv| TimedMessage::interval(&iv))
                .map_err(|e| SimError::Block {
                    block: id.to_string(),
                    message: e.to_string(),
                })
        };
        let mut linear = None;
        let mut outputs: Vec<(Port, TimedMessage)> = Vec::new();

        match &def.config {
            BlockConfig::Source { .. } => unreachable!("sources have no inputs"),
            BlockConfig::Probe => return Ok(()),
            BlockConfig::Add => {
                let v = scalars()?;
                let clock = self.input_clock(id);
                let sum = arith::add_concat(&encode_unary(v[0], clock), &encode_unary(v[1], clock))
                    .map_err(|e| self.fail(id, e))?;
                let mut sum = self.guard(id, sum.length().clone())?;
                if self.opts.fault == Some(Fault::AddOffByOne) {
                    sum += 1;
                }
                linear = Some(v[0] + v[1]);
                outputs.push((Port::Out, interval(sum, origin)?));
            }
            BlockConfig::Mul { k } => {
                let v = scalars()?;
                let clock = self.input_clock(id);
                let x = encode_unary(v[0], clock);
                let product = match k {
                    Some(k) => arith::mul_dilate(&x, &BigUint::from(*k)),
                    None => arith::mul_trains(&x, &encode_unary(v[1], clock)),
                }
                .map_err(|e| self.fail(id, e))?;
                let p = self.guard(id, product.length().clone())?;
                outputs.push((Port::Out, interval(p, origin)?));
            }
            BlockConfig::Min | BlockConfig::Max => {
                let v = scalars()?;
                let mode = DeliveryMode::ParallelSynchronous;
                let lanes = deliver_parallel(&v, mode, None, self.input_clock(id)).map_err(|e| self.fail(id, e))?;
                let r = if matches!(def.config, BlockConfig::Min) {
                    arith::min_race(&lanes, mode)
                } else {
                    arith::max_race(&lanes, mode)
                }
                .map_err(|e| self.fail(id, e))?;
                outputs.push((Port::Out, interval(r, origin)?));
            }
            BlockConfig::Mux => {
                let v = scalars()?;
                let ch = arith::mux(&v, self.input_clock(id)).map_err(|e| self.fail(id, e))?;
                let msg = TimedMessage::mux(&ch, origin).map_err(|e| self.fail(id, e))?;
                outputs.push((Port::Out, msg));
            }
            BlockConfig::Demux => {
                let offsets = inputs[0].decode_mux().map_err(|e| self.fail(id, e))?;
                let pulses = std::iter::once(Tick::ZERO).chain(offsets.into_iter().map(Tick)).collect();
                let train = PulseTrain::new(pulses, self.input_clock(id).clone()).map_err(|e| self.fail(id, e))?;
                let values: Vec<u64> = arith::demux(&train).map_err(|e| self.fail(id, e))?.into_iter().collect();
                for p in net.port_types.keys().filter(|p| p.block == id) {
                    if let Port::OutN(i) = p.port {
                        if i as usize >= values.len() {
                            return Err(self.fail(id, format!("channel carried {} value(s), `{}` has none", values.len(), p.port)));
                        }
                    }
                }
                for (i, v) in values.into_iter().enumerate() {
                    outputs.push((Port::OutN(i as u32), interval(v, origin)?));
                }
            }
            BlockConfig::Madd => {
                let clock = self.input_clock(id);
                let mut trains = Vec::with_capacity(inputs.len());
                for m in &inputs {
                    let marks = m.decode_marks().map_err(|e| self.fail(id, e))?;
                    trains.push(MultiValentTrain::new(marks, clock.clone()).map_err(|e| self.fail(id, e))?);
                }
                let merged = mv_merge(&trains).map_err(|e| self.fail(id, e))?;
                let dot = self.guard(id, arith::madd(&merged))?;
                let sweep = madd_sweep_ticks(&merged);
                let start = origin.checked_add(sweep).ok_or_else(|| self.fail(id, "tick overflow"))?;
                outputs.push((Port::Out, interval(dot, start)?));
            }
            BlockConfig::Accumulator { config, reference, noise } => {
                let v = scalars()?;
                let iv = IntervalValue::starting_at(Tick::ZERO, v[0], self.input_clock(id).clone())
                    .map_err(|e| self.fail(id, e))?;
                let seed = match noise {
                    NoiseSeed::None => None,
                    NoiseSeed::Fixed(s) => Some(*s),
                    NoiseSeed::Global => Some(self.opts.seed.wrapping_add(block as u64)),
                };
                let config = AccumulatorConfig::new(config.model().clone(), seed).expect("validated");
                let reading = accumulate(&config, &iv, net.clock(reference));
                if reading.overflow {
                    self.trace.overflows.insert(id.to_string());
                }
                let value = self.guard(id, reading.value)?;
                outputs.push((Port::Out, interval(value, origin)?));
            }
            BlockConfig::Convert { to } => {
                let v = scalars()?;
                let converted = convert_reference(&BigUint::from(v[0]), self.input_clock(id), net.clock(to));
                let value = self.guard(id, converted)?;
                outputs.push((Port::Out, interval(value, origin)?));
            }
        }

        let finished_at = outputs.iter().map(|(_, m)| m.last()).max().unwrap_or(now);
        self.trace.costs.insert(
            id.to_string(),
            BlockCost {
                kind: def.kind,
                fired_at: now,
                finished_at,
                linear,
            },
        );
        for (port, msg) in outputs {
            self.emit(block, port, msg)?;
        }
        Ok(())
    }

    // Output clock does not matter for interval construction; clock checks
    // happened at validation.
    fn input_clock_or_default(&self, block: &str) -> crate::time::ClockRef {
        self.net
            .driver(&PortRef::new(block, Port::In(0)))
            .map(|w| self.net.clock(&self.net.port_types[&w.src].1).clone())
            .unwrap_or_else(|| self.net.clock(self.net.default_clock()).clone())
    }

    fn emit(&mut self, block: usize, port: Port, msg: TimedMessage) -> Result<(), SimError> {
        for e in msg.events() {
            self.push(e.tick, block, port, e.role, false);
        }
        let src = PortRef::new(self.ids[block], port);
        let fanout: Vec<(usize, &crate::sim::netlist::Wire)> = self
            .net
            .wires
            .iter()
            .enumerate()
            .filter(|(_, w)| w.src == src)
            .collect();
        for (wi, wire) in fanout {
            let arrivals: Vec<Event> = match transmit_checked(&msg, &self.links[wi]) {
                Ok(m) => m.events().to_vec(),
                Err(v) => {
                    self.trace.violations.push(ViolationRecord {
                        wire_line: wire.line,
                        from: wire.src.to_string(),
                        to: wire.dst.to_string(),
                        error: v.error,
                    });
                    // Events cannot overtake each other on one wire.
                    let mut last = Tick::ZERO;
                    v.distorted
                        .into_iter()
                        .map(|mut e| {
                            e.tick = e.tick.max(last);
                            last = e.tick;
                            e
                        })
                        .collect()
                }
            };
            let dst = self.index[wire.dst.block.as_str()];
            for e in arrivals {
                self.push(e.tick, dst, wire.dst.port, e.role, true);
            }
        }
        self.emitted.insert((block, port), msg);
        Ok(())
    }
}

fn decode(kind: SignalKind, msg: &TimedMessage) -> Result<ProbeValue, String> {
    match kind {
        SignalKind::Interval => msg.decode_interval().map(ProbeValue::Scalar),
        SignalKind::Mux => msg.decode_mux().map(ProbeValue::Set),
        SignalKind::Marks => msg
            .decode_marks()
            .map(|m| ProbeValue::Marks(m.into_iter().map(|(p, a)| (p.0, a)).collect())),
    }
    .map_err(|e| e.to_string())
}

/// Whether `kind` blocks contribute to the cost table.
pub fn is_costed(kind: BlockKind) -> bool {
    !matches!(kind, BlockKind::Source | BlockKind::Probe)
}
