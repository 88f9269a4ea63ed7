//! Simulation record, summary statistics and text exports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use crate::channel::Role;
use crate::sim::netlist::{BlockKind, Port};
use crate::time::Tick;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub tick: Tick,
    pub block: String,
    pub port: Port,
    pub role: Role,
}

/// Decoded value seen by a probe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProbeValue {
    Scalar(u64),
    Set(Vec<u64>),
    /// `(position, amplitude)` pairs.
    Marks(Vec<(u64, u64)>),
}

impl fmt::Display for ProbeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbeValue::Scalar(v) => write!(f, "{v}"),
            ProbeValue::Set(vs) => {
                let items: Vec<String> = vs.iter().map(u64::to_string).collect();
                write!(f, "{{{}}}", items.join(","))
            }
            ProbeValue::Marks(ms) => {
                let items: Vec<String> = ms.iter().map(|(p, a)| format!("{p}:{a}")).collect();
                write!(f, "{{{}}}", items.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockCost {
    pub kind: BlockKind,
    pub fired_at: Tick,
    pub finished_at: Tick,
    /// For add blocks, the operand sum `a + b`.
    pub linear: Option<u64>,
}

impl BlockCost {
    pub fn ticks(&self) -> u64 {
        self.finished_at.0 - self.fired_at.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViolationRecord {
    pub wire_line: usize,
    pub from: String,
    pub to: String,
    pub error: i128,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    /// Sorted by `(tick, block, port)`, ties in scheduling order.
    pub events: Vec<TraceEvent>,
    pub results: BTreeMap<String, ProbeValue>,
    pub costs: BTreeMap<String, BlockCost>,
    pub overflows: BTreeSet<String>,
    pub violations: Vec<ViolationRecord>,
    pub budget_exhausted: bool,
}

impl Trace {
    pub fn total_ticks(&self) -> u64 {
        self.events.last().map_or(0, |e| e.tick.0)
    }
}

/// Constant per-firing overhead, in ticks, for delimiter handling.
pub const BLOCK_OVERHEAD: u64 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AddCost {
    pub block: String,
    pub cost: u64,
    pub linear: u64,
}

impl AddCost {
    pub fn overhead(&self) -> i128 {
        self.cost as i128 - self.linear as i128
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Summary {
    pub total_ticks: u64,
    pub events: usize,
    pub block_costs: BTreeMap<String, u64>,
    pub adds: Vec<AddCost>,
    pub overflows: Vec<String>,
    pub violations: usize,
    pub budget_exhausted: bool,
}

pub fn stats(trace: &Trace) -> Summary {
    Summary {
        total_ticks: trace.total_ticks(),
        events: trace.events.len(),
        block_costs: trace.costs.iter().map(|(k, c)| (k.clone(), c.ticks())).collect(),
        adds: trace
            .costs
            .iter()
            .filter_map(|(k, c)| {
                c.linear.map(|linear| AddCost {
                    block: k.clone(),
                    cost: c.ticks(),
                    linear,
                })
            })
            .collect(),
        overflows: trace.overflows.iter().cloned().collect(),
        violations: trace.violations.len(),
        budget_exhausted: trace.budget_exhausted,
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "total_ticks={}", self.total_ticks)?;
        writeln!(f, "events={}", self.events)?;
        writeln!(f, "block_overhead={BLOCK_OVERHEAD}")?;
        for (b, c) in &self.block_costs {
            writeln!(f, "cost.{b}={c}")?;
        }
        for a in &self.adds {
            writeln!(f, "add.{}=cost:{} linear:{} overhead:{}", a.block, a.cost, a.linear, a.overhead())?;
        }
        if !self.overflows.is_empty() {
            writeln!(f, "overflow={}", self.overflows.join(","))?;
        }
        writeln!(f, "violations={}", self.violations)?;
        writeln!(f, "budget_exhausted={}", self.budget_exhausted)
    }
}

pub const CSV_HEADER: &str = "tick,block,port,role";

/// Events as CSV followed by `# key=value` result lines.
pub fn write_csv(trace: &Trace) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for e in &trace.events {
        let _ = writeln!(out, "{},{},{},{}", e.tick, e.block, e.port, e.role);
    }
    for (k, v) in &trace.results {
        let _ = writeln!(out, "# {k}={v}");
    }
    for v in &trace.violations {
        let _ = writeln!(out, "# violation={}->{}:{:+}", v.from, v.to, v.error);
    }
    if !trace.overflows.is_empty() {
        let list: Vec<&str> = trace.overflows.iter().map(String::as_str).collect();
        let _ = writeln!(out, "# overflow={}", list.join(","));
    }
    let _ = writeln!(out, "# budget_exhausted={}", trace.budget_exhausted);
    out
}

/// Read the event rows of a CSV trace back. Footer lines are skipped.
pub fn parse_csv(text: &str) -> Result<Vec<TraceEvent>, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => return Err(format!("missing `{CSV_HEADER}` header")),
    }
    let mut events = Vec::new();
    for (i, line) in lines {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let err = |m: &str| format!("line {}: {m}", i + 1);
        let fields: Vec<&str> = line.split(',').collect();
        let [tick, block, port, role] = fields.as_slice() else {
            return Err(err("expected 4 fields"));
        };
        events.push(TraceEvent {
            tick: Tick(tick.parse().map_err(|_| err("bad tick"))?),
            block: block.to_string(),
            port: port.parse().map_err(|_| err("bad port"))?,
            role: role.parse().map_err(|e: String| err(&e))?,
        });
    }
    Ok(events)
}

/// Value-change dump: one integer signal per `block.port`, set to the
/// event's amplitude (1 for start, pulse and end) on the event tick and
/// cleared on the following tick.
pub fn write_vcd(events: &[TraceEvent]) -> String {
    let signals: BTreeSet<(String, Port)> = events.iter().map(|e| (e.block.clone(), e.port)).collect();
    let ids: BTreeMap<(String, Port), String> = signals
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), vcd_id(i)))
        .collect();

    let mut out = String::new();
    out.push_str("$timescale 1 ns $end\n$scope module netlist $end\n");
    for ((block, port), id) in &ids {
        let _ = writeln!(out, "$var integer 64 {id} {block}.{port} $end");
    }
    out.push_str("$upscope $end\n$enddefinitions $end\n");

    // tick -> signal -> value; later events on the same tick win.
    let mut changes: BTreeMap<u64, BTreeMap<&str, u64>> = BTreeMap::new();
    for e in events {
        let id = ids[&(e.block.clone(), e.port)].as_str();
        let amp = match e.role {
            Role::Mark(a) => a,
            _ => 1,
        };
        changes.entry(e.tick.0).or_default().insert(id, amp);
    }
    let raised: Vec<(u64, Vec<&str>)> = changes
        .iter()
        .map(|(&t, m)| (t, m.keys().copied().collect()))
        .collect();
    for (t, sigs) in raised {
        let next = changes.entry(t + 1).or_default();
        for s in sigs {
            next.entry(s).or_insert(0);
        }
    }
    out.push_str("$dumpvars\n");
    for id in ids.values() {
        let _ = writeln!(out, "b0 {id}");
    }
    out.push_str("$end\n");
    for (t, m) in &changes {
        let _ = writeln!(out, "#{t}");
        for (id, v) in m {
            let _ = writeln!(out, "b{v:b} {id}");
        }
    }
    out
}

fn vcd_id(mut i: usize) -> String {
    // printable identifier characters `!`..`~`
    let mut s = String::new();
    loop {
        s.push((b'!' + (i % 94) as u8) as char);
        i /= 94;
        if i == 0 {
            return s;
        }
        i -= 1;
    }
}
