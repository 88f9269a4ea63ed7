//! Line-oriented netlist format.
//!
//! ```text
//! clock <id> <num>[/<den>]
//! block <id> <kind> [key=value ...]
//! wire <src>.<port> <dst>.<port> [latency=<int>|table=<file>|jitter=<max>]
//! probe <block>.<port>
//! ```
//!
//! `#` starts a comment. Parsing reports every syntax error with its line and
//! column; validation then reports every structural problem at once.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::accumulators::{AccumulatorConfig, AccumulatorModel};
use crate::channel::LatencyTable;
use crate::time::{parse_rational, ClockRef};

/// Clock used by blocks that do not name one, when the netlist declares none.
pub const DEFAULT_CLOCK: &str = "main";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetlistError {
    #[error("{}", join_lines(.0))]
    Parse(Vec<ParseError>),
    #[error("{}", join_lines(.0))]
    Validation(Vec<String>),
    #[error("cannot read `{path}`: {message}")]
    Io { path: String, message: String },
}

fn join_lines<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlockKind {
    Source,
    Add,
    Mul,
    Min,
    Max,
    Mux,
    Demux,
    Madd,
    Accumulator,
    Convert,
    Probe,
}

impl BlockKind {
    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Source => "source",
            BlockKind::Add => "add",
            BlockKind::Mul => "mul",
            BlockKind::Min => "min",
            BlockKind::Max => "max",
            BlockKind::Mux => "mux",
            BlockKind::Demux => "demux",
            BlockKind::Madd => "madd",
            BlockKind::Accumulator => "accumulator",
            BlockKind::Convert => "convert",
            BlockKind::Probe => "probe",
        }
    }

    fn allowed_params(self) -> &'static [&'static str] {
        match self {
            BlockKind::Source => &["value", "mv", "at", "clock"],
            BlockKind::Mul => &["k", "clock"],
            BlockKind::Accumulator => &["model", "ref", "depth", "rate", "flux", "seed", "noise", "clock"],
            BlockKind::Convert => &["to", "clock"],
            _ => &["clock"],
        }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BlockKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "source" => BlockKind::Source,
            "add" => BlockKind::Add,
            "mul" => BlockKind::Mul,
            "min" => BlockKind::Min,
            "max" => BlockKind::Max,
            "mux" => BlockKind::Mux,
            "demux" => BlockKind::Demux,
            "madd" => BlockKind::Madd,
            "accumulator" => BlockKind::Accumulator,
            "convert" => BlockKind::Convert,
            "probe" => BlockKind::Probe,
            _ => return Err(()),
        })
    }
}

/// A block port. Inputs are `in0, in1, …`; single-output blocks have `out`,
/// demultiplexers have `out0, out1, …`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Port {
    In(u32),
    Out,
    OutN(u32),
}

impl Port {
    pub fn is_input(self) -> bool {
        matches!(self, Port::In(_))
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Port::In(i) => write!(f, "in{i}"),
            Port::Out => f.write_str("out"),
            Port::OutN(i) => write!(f, "out{i}"),
        }
    }
}

impl FromStr for Port {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        if s == "out" {
            return Ok(Port::Out);
        }
        let index = |rest: &str| -> Result<u32, ()> {
            if rest.is_empty() || (rest.len() > 1 && rest.starts_with('0')) {
                return Err(());
            }
            rest.parse().map_err(|_| ())
        };
        if let Some(rest) = s.strip_prefix("out") {
            return index(rest).map(Port::OutN);
        }
        if let Some(rest) = s.strip_prefix("in") {
            return index(rest).map(Port::In);
        }
        Err(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortRef {
    pub block: String,
    pub port: Port,
}

impl PortRef {
    pub fn new(block: impl Into<String>, port: Port) -> Self {
        Self {
            block: block.into(),
            port,
        }
    }

    /// Name under which a probe on this port reports: the block id alone for
    /// a block's `out` port, `block.port` otherwise.
    pub fn result_key(&self) -> String {
        match self.port {
            Port::Out => self.block.clone(),
            p => format!("{}.{}", self.block, p),
        }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.block, self.port)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LatencySpec {
    Constant(u64),
    /// Table file, loaded by [`Netlist::resolve_tables`].
    Table { path: PathBuf, table: Option<LatencyTable> },
    /// Seeded uniform jitter in `[0, max]`.
    Jitter(u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Wire {
    pub src: PortRef,
    pub dst: PortRef,
    pub latency: LatencySpec,
    pub line: usize,
}

/// What a port carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignalKind {
    Interval,
    Mux,
    Marks,
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignalKind::Interval => "interval",
            SignalKind::Mux => "multiplexed",
            SignalKind::Marks => "multi-valent",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SourcePayload {
    Interval(u64),
    /// `(position, amplitude)` pairs.
    Marks(Vec<(u64, u64)>),
}

/// Accumulator noise seeding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseSeed {
    None,
    Fixed(u64),
    /// Taken from the run's global seed.
    Global,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BlockConfig {
    Source { payload: SourcePayload, at: u64 },
    Add,
    Mul { k: Option<u64> },
    Min,
    Max,
    Mux,
    Demux,
    Madd,
    Accumulator { config: AccumulatorConfig, reference: String, noise: NoiseSeed },
    Convert { to: String },
    Probe,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockSpec {
    pub id: String,
    pub kind: BlockKind,
    pub config: BlockConfig,
    /// Clock named by `clock=`, if any.
    pub clock: Option<String>,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Netlist {
    pub clocks: BTreeMap<String, ClockRef>,
    /// Keyed by id, so iteration is in the engine's tiebreak order.
    pub blocks: BTreeMap<String, BlockSpec>,
    pub wires: Vec<Wire>,
    pub probes: Vec<PortRef>,
    /// Blocks in a dependency-respecting order.
    pub topo_order: Vec<String>,
    /// Output port signal kinds and clocks, filled in by validation.
    pub port_types: BTreeMap<PortRef, (SignalKind, String)>,
}

impl Netlist {
    pub fn clock(&self, id: &str) -> &ClockRef {
        &self.clocks[id]
    }

    pub fn default_clock(&self) -> &str {
        self.clocks.keys().next().map_or(DEFAULT_CLOCK, String::as_str)
    }

    /// Wires leaving `port`, in netlist order.
    pub fn fanout<'a>(&'a self, port: &'a PortRef) -> impl Iterator<Item = &'a Wire> + 'a {
        self.wires.iter().filter(move |w| &w.src == port)
    }

    /// Wire driving `port`, if any.
    pub fn driver(&self, port: &PortRef) -> Option<&Wire> {
        self.wires.iter().find(|w| &w.dst == port)
    }

    /// Number of wired input ports of `block`.
    pub fn input_count(&self, block: &str) -> u32 {
        self.wires.iter().filter(|w| w.dst.block == block).count() as u32
    }

    /// Result keys paired with the port each reports on.
    pub fn probe_keys(&self) -> Vec<(String, PortRef)> {
        let mut keys: Vec<(String, PortRef)> = self
            .probes
            .iter()
            .map(|p| (p.result_key(), p.clone()))
            .collect();
        keys.extend(
            self.blocks
                .values()
                .filter(|b| b.kind == BlockKind::Probe)
                .map(|b| (b.id.clone(), PortRef::new(&b.id, Port::In(0)))),
        );
        keys
    }

    /// Load every `table=` file, relative paths resolved against `base`.
    pub fn resolve_tables(&mut self, base: &Path) -> Result<(), NetlistError> {
        let mut errors = Vec::new();
        for wire in &mut self.wires {
            if let LatencySpec::Table { path, table } = &mut wire.latency {
                let full = base.join(&*path);
                match std::fs::read_to_string(&full) {
                    Ok(text) => match LatencyTable::parse(&text) {
                        Ok(t) => *table = Some(t),
                        Err(e) => errors.push(format!("line {}: table `{}`: {e}", wire.line, path.display())),
                    },
                    Err(e) => errors.push(format!("line {}: table `{}`: {e}", wire.line, path.display())),
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(NetlistError::Validation(errors))
        }
    }
}

/// Read, parse and validate a netlist file, loading latency tables.
pub fn load_netlist(path: &Path) -> Result<Netlist, NetlistError> {
    let text = std::fs::read_to_string(path).map_err(|e| NetlistError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut net = parse_netlist(&text)?;
    net.resolve_tables(path.parent().unwrap_or(Path::new(".")))?;
    Ok(net)
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let code = line.split('#').next().unwrap_or("");
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, c) in code.char_indices().chain(std::iter::once((code.len(), ' '))) {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                tokens.push(Token {
                    text: &code[s..i],
                    column: s + 1,
                });
                start = None;
            }
            _ => {}
        }
    }
    tokens
}

struct RawBlock {
    id: String,
    kind: BlockKind,
    params: Vec<(String, String, usize)>,
    line: usize,
}

fn valid_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn parse_port_ref(tok: &Token, line: usize, errors: &mut Vec<ParseError>) -> Option<PortRef> {
    let err = |m: String| ParseError { line, column: tok.column, message: m };
    let Some((block, port)) = tok.text.split_once('.') else {
        errors.push(err(format!("expected `<block>.<port>`, found `{}`", tok.text)));
        return None;
    };
    if !valid_ident(block) {
        errors.push(err(format!("invalid block id `{block}`")));
        return None;
    }
    match port.parse::<Port>() {
        Ok(port) => Some(PortRef::new(block, port)),
        Err(()) => {
            errors.push(ParseError {
                line,
                column: tok.column + block.len() + 1,
                message: format!("invalid port `{port}` (expected in<N>, out or out<N>)"),
            });
            None
        }
    }
}

/// Parse and validate netlist text. Table files are not read; see
/// [`load_netlist`].
pub fn parse_netlist(text: &str) -> Result<Netlist, NetlistError> {
    let mut errors = Vec::new();
    let mut clocks_raw: Vec<(String, ClockRef, usize)> = Vec::new();
    let mut blocks_raw: Vec<RawBlock> = Vec::new();
    let mut wires = Vec::new();
    let mut probes = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks = tokenize(raw);
        let Some(head) = toks.first() else { continue };
        let err = |tok: &Token, m: String| ParseError { line, column: tok.column, message: m };
        let missing = |what: &str| ParseError {
            line,
            column: raw.split('#').next().unwrap_or("").trim_end().len() + 1,
            message: format!("missing {what}"),
        };
        match head.text {
            "clock" => {
                let (Some(id), Some(freq)) = (toks.get(1), toks.get(2)) else {
                    errors.push(missing("clock id and frequency"));
                    continue;
                };
                if let Some(extra) = toks.get(3) {
                    errors.push(err(extra, format!("unexpected `{}`", extra.text)));
                    continue;
                }
                if !valid_ident(id.text) {
                    errors.push(err(id, format!("invalid clock id `{}`", id.text)));
                    continue;
                }
                match parse_rational(freq.text).map(|f| ClockRef::new(id.text, f)) {
                    Ok(Ok(c)) => clocks_raw.push((id.text.to_string(), c, line)),
                    Ok(Err(_)) => errors.push(err(freq, "clock frequency must be positive".into())),
                    Err(_) => errors.push(err(freq, format!("invalid frequency `{}`", freq.text))),
                }
            }
            "block" => {
                let (Some(id), Some(kind)) = (toks.get(1), toks.get(2)) else {
                    errors.push(missing("block id and kind"));
                    continue;
                };
                if !valid_ident(id.text) {
                    errors.push(err(id, format!("invalid block id `{}`", id.text)));
                    continue;
                }
                let Ok(k) = kind.text.parse::<BlockKind>() else {
                    errors.push(err(kind, format!("unknown block kind `{}`", kind.text)));
                    continue;
                };
                let mut params = Vec::new();
                let mut ok = true;
                for tok in &toks[3..] {
                    match tok.text.split_once('=') {
                        Some((key, value)) if !key.is_empty() && !value.is_empty() => {
                            params.push((key.to_string(), value.to_string(), tok.column))
                        }
                        _ => {
                            errors.push(err(tok, format!("expected key=value, found `{}`", tok.text)));
                            ok = false;
                        }
                    }
                }
                if ok {
                    blocks_raw.push(RawBlock {
                        id: id.text.to_string(),
                        kind: k,
                        params,
                        line,
                    });
                }
            }
            "wire" => {
                let (Some(src), Some(dst)) = (toks.get(1), toks.get(2)) else {
                    errors.push(missing("wire endpoints"));
                    continue;
                };
                let src = parse_port_ref(src, line, &mut errors);
                let dst = parse_port_ref(dst, line, &mut errors);
                let mut latency = LatencySpec::Constant(0);
                let mut bad = false;
                for (n, tok) in toks[3..].iter().enumerate() {
                    if n > 0 {
                        errors.push(err(tok, "a wire takes at most one latency option".into()));
                        bad = true;
                        break;
                    }
                    let parsed = match tok.text.split_once('=') {
                        Some(("latency", v)) => v.parse().ok().map(LatencySpec::Constant),
                        Some(("jitter", v)) => v.parse().ok().map(LatencySpec::Jitter),
                        Some(("table", v)) if !v.is_empty() => Some(LatencySpec::Table {
                            path: PathBuf::from(v),
                            table: None,
                        }),
                        _ => None,
                    };
                    match parsed {
                        Some(l) => latency = l,
                        None => {
                            errors.push(err(
                                tok,
                                format!("expected latency=<int>, table=<file> or jitter=<int>, found `{}`", tok.text),
                            ));
                            bad = true;
                        }
                    }
                }
                if let (Some(src), Some(dst), false) = (src, dst, bad) {
                    wires.push(Wire { src, dst, latency, line });
                }
            }
            "probe" => {
                let Some(target) = toks.get(1) else {
                    errors.push(missing("probe target"));
                    continue;
                };
                if let Some(extra) = toks.get(2) {
                    errors.push(err(extra, format!("unexpected `{}`", extra.text)));
                    continue;
                }
                // `probe x` is shorthand for `probe x.out`
                if !target.text.contains('.') && valid_ident(target.text) {
                    probes.push((PortRef::new(target.text, Port::Out), line));
                } else if let Some(p) = parse_port_ref(target, line, &mut errors) {
                    probes.push((p, line));
                }
            }
            other => errors.push(err(head, format!("unknown directive `{other}`"))),
        }
    }

    if !errors.is_empty() {
        return Err(NetlistError::Parse(errors));
    }
    validate(clocks_raw, blocks_raw, wires, probes)
}

fn validate(
    clocks_raw: Vec<(String, ClockRef, usize)>,
    blocks_raw: Vec<RawBlock>,
    wires: Vec<Wire>,
    probes_raw: Vec<(PortRef, usize)>,
) -> Result<Netlist, NetlistError> {
    let mut errors: Vec<String> = Vec::new();
    if blocks_raw.is_empty() {
        errors.push("no blocks".to_string());
    }

    let mut clocks = BTreeMap::new();
    for (id, c, line) in clocks_raw {
        if clocks.insert(id.clone(), c).is_some() {
            errors.push(format!("line {line}: duplicate clock `{id}`"));
        }
    }
    if clocks.is_empty() {
        clocks.insert(DEFAULT_CLOCK.to_string(), ClockRef::unit(DEFAULT_CLOCK));
    }

    let mut blocks = BTreeMap::new();
    for raw in blocks_raw {
        let line = raw.line;
        match build_block(raw, &clocks) {
            Ok(b) => {
                if blocks.contains_key(&b.id) {
                    errors.push(format!("line {line}: duplicate block `{}`", b.id));
                } else {
                    blocks.insert(b.id.clone(), b);
                }
            }
            Err(mut es) => errors.append(&mut es),
        }
    }

    // Wire endpoints and drivers.
    let mut driven: HashMap<&PortRef, usize> = HashMap::new();
    let mut wiring_ok = true;
    for w in &wires {
        for (end, want_input) in [(&w.src, false), (&w.dst, true)] {
            match blocks.get(&end.block) {
                None => {
                    errors.push(format!("line {}: wire references unknown block `{}`", w.line, end.block));
                    wiring_ok = false;
                }
                Some(b) if end.port.is_input() != want_input || !port_exists(b.kind, end.port) => {
                    errors.push(format!(
                        "line {}: `{}` is not an {} port of {} block `{}`",
                        w.line,
                        end.port,
                        if want_input { "input" } else { "output" },
                        b.kind,
                        b.id
                    ));
                    wiring_ok = false;
                }
                Some(_) => {}
            }
        }
        if let Some(prev) = driven.insert(&w.dst, w.line) {
            errors.push(format!(
                "line {}: input `{}` is already driven by the wire on line {prev}",
                w.line, w.dst
            ));
            wiring_ok = false;
        }
    }

    // Arity: inputs must be in0..in{n-1}.
    for b in blocks.values() {
        let mut ins: Vec<u32> = wires
            .iter()
            .filter(|w| w.dst.block == b.id)
            .filter_map(|w| match w.dst.port {
                Port::In(i) => Some(i),
                _ => None,
            })
            .collect();
        ins.sort_unstable();
        ins.dedup();
        let n = ins.len() as u32;
        if ins.iter().enumerate().any(|(i, &p)| p != i as u32) {
            errors.push(format!(
                "block `{}`: inputs must be wired contiguously from in0",
                b.id
            ));
        }
        let (lo, hi) = arity(b);
        if n < lo || n > hi {
            let want = if lo == hi {
                format!("{lo}")
            } else if hi == u32::MAX {
                format!("at least {lo}")
            } else {
                format!("{lo} to {hi}")
            };
            errors.push(format!(
                "block `{}` ({}) needs {want} input(s), {n} wired",
                b.id, b.kind
            ));
            wiring_ok = false;
        }
    }

    let mut probes = Vec::new();
    let mut keys: BTreeSet<String> = blocks
        .values()
        .filter(|b| b.kind == BlockKind::Probe)
        .map(|b| b.id.clone())
        .collect();
    for (p, line) in probes_raw {
        match blocks.get(&p.block) {
            None => errors.push(format!("line {line}: probe references unknown block `{}`", p.block)),
            Some(b) if !port_exists(b.kind, p.port) => {
                errors.push(format!("line {line}: {} block `{}` has no port `{}`", b.kind, b.id, p.port))
            }
            Some(_) => {
                if !keys.insert(p.result_key()) {
                    errors.push(format!("line {line}: result `{}` is reported twice", p.result_key()));
                }
                probes.push(p);
            }
        }
    }

    let mut net = Netlist {
        clocks,
        blocks,
        wires,
        probes,
        topo_order: Vec::new(),
        port_types: BTreeMap::new(),
    };
    if wiring_ok {
        match topo_sort(&net) {
            Ok(order) => {
                net.topo_order = order;
                infer_types(&mut net, &mut errors);
            }
            Err(cycle) => errors.push(format!("cycle through blocks: {}", cycle.join(" -> "))),
        }
    }

    if errors.is_empty() {
        Ok(net)
    } else {
        Err(NetlistError::Validation(errors))
    }
}

fn port_exists(kind: BlockKind, port: Port) -> bool {
    match (kind, port) {
        (BlockKind::Source, Port::In(_)) => false,
        (BlockKind::Probe, Port::Out | Port::OutN(_)) => false,
        (BlockKind::Demux, Port::Out) => false,
        (BlockKind::Demux, Port::OutN(_)) => true,
        (_, Port::OutN(_)) => false,
        _ => true,
    }
}

fn arity(b: &BlockSpec) -> (u32, u32) {
    match &b.config {
        BlockConfig::Source { .. } => (0, 0),
        BlockConfig::Add => (2, 2),
        BlockConfig::Mul { k: Some(_) } => (1, 1),
        BlockConfig::Mul { k: None } => (2, 2),
        BlockConfig::Min | BlockConfig::Max | BlockConfig::Mux | BlockConfig::Madd => (1, u32::MAX),
        BlockConfig::Demux | BlockConfig::Accumulator { .. } | BlockConfig::Convert { .. } | BlockConfig::Probe => {
            (1, 1)
        }
    }
}

fn build_block(raw: RawBlock, clocks: &BTreeMap<String, ClockRef>) -> Result<BlockSpec, Vec<String>> {
    let RawBlock { id, kind, params, line } = raw;
    let mut errors = Vec::new();
    let mut map: BTreeMap<&str, &str> = BTreeMap::new();
    for (k, v, col) in &params {
        if !kind.allowed_params().contains(&k.as_str()) {
            errors.push(format!("line {line}:{col}: {kind} block `{id}` has no parameter `{k}`"));
        } else if map.insert(k, v).is_some() {
            errors.push(format!("line {line}:{col}: parameter `{k}` given twice"));
        }
    }
    let here = |m: String| format!("line {line}: block `{id}`: {m}");
    let clock_ok = |c: &str, errors: &mut Vec<String>| {
        if !clocks.contains_key(c) {
            errors.push(here(format!("unknown clock `{c}`")));
        }
    };
    let int = |key: &str, errors: &mut Vec<String>| -> Option<u64> {
        map.get(key).and_then(|v| match v.parse::<u64>() {
            Ok(n) => Some(n),
            Err(_) => {
                errors.push(here(format!("`{key}` must be a non-negative integer, got `{v}`")));
                None
            }
        })
    };

    let clock = map.get("clock").map(|c| c.to_string());
    if let Some(c) = &clock {
        clock_ok(c, &mut errors);
    }

    let config = match kind {
        BlockKind::Source => {
            let at = int("at", &mut errors).unwrap_or(0);
            match (map.get("value"), map.get("mv")) {
                (Some(_), None) => int("value", &mut errors).map(|v| BlockConfig::Source {
                    payload: SourcePayload::Interval(v),
                    at,
                }),
                (None, Some(mv)) => match parse_marks(mv) {
                    Ok(marks) => Some(BlockConfig::Source {
                        payload: SourcePayload::Marks(marks),
                        at,
                    }),
                    Err(m) => {
                        errors.push(here(m));
                        None
                    }
                },
                _ => {
                    errors.push(here("source needs exactly one of `value=` or `mv=`".into()));
                    None
                }
            }
        }
        BlockKind::Add => Some(BlockConfig::Add),
        BlockKind::Mul => {
            let k = int("k", &mut errors);
            if k == Some(0) {
                errors.push(here("`k` must be at least 1".into()));
            }
            Some(BlockConfig::Mul { k })
        }
        BlockKind::Min => Some(BlockConfig::Min),
        BlockKind::Max => Some(BlockConfig::Max),
        BlockKind::Mux => Some(BlockConfig::Mux),
        BlockKind::Demux => Some(BlockConfig::Demux),
        BlockKind::Madd => Some(BlockConfig::Madd),
        BlockKind::Probe => Some(BlockConfig::Probe),
        BlockKind::Convert => match map.get("to") {
            Some(to) => {
                clock_ok(to, &mut errors);
                Some(BlockConfig::Convert { to: to.to_string() })
            }
            None => {
                errors.push(here("convert needs `to=<clock>`".into()));
                None
            }
        },
        BlockKind::Accumulator => build_accumulator(&map, &here, &mut errors, clocks),
    };

    match config {
        Some(config) if errors.is_empty() => Ok(BlockSpec {
            id,
            kind,
            config,
            clock,
            line,
        }),
        _ => Err(errors),
    }
}

fn build_accumulator(
    map: &BTreeMap<&str, &str>,
    here: &dyn Fn(String) -> String,
    errors: &mut Vec<String>,
    clocks: &BTreeMap<String, ClockRef>,
) -> Option<BlockConfig> {
    let reference = match map.get("ref") {
        Some(r) if clocks.contains_key(*r) => r.to_string(),
        Some(r) => {
            errors.push(here(format!("unknown clock `{r}`")));
            return None;
        }
        None => {
            errors.push(here("accumulator needs `ref=<clock>`".into()));
            return None;
        }
    };
    let rational = |key: &str, errors: &mut Vec<String>| {
        let text = map.get(key).copied().unwrap_or("1");
        match parse_rational(text) {
            Ok(r) => Some(r),
            Err(_) => {
                errors.push(here(format!("`{key}` must be a rational, got `{text}`")));
                None
            }
        }
    };
    let model = match map.get("model").copied().unwrap_or("digital") {
        "digital" => AccumulatorModel::DigitalCounter,
        "toggle" => {
            let depth = map.get("depth").and_then(|d| d.parse::<u32>().ok());
            match depth {
                Some(depth) => AccumulatorModel::ToggleChain { depth },
                None => {
                    errors.push(here("toggle accumulator needs `depth=<int>`".into()));
                    return None;
                }
            }
        }
        "analog" => AccumulatorModel::AnalogIntegrator { rate: rational("rate", errors)? },
        "photon" => AccumulatorModel::PhotonCounter { flux: rational("flux", errors)? },
        other => {
            errors.push(here(format!(
                "unknown accumulator model `{other}` (digital, toggle, analog, photon)"
            )));
            return None;
        }
    };
    let noise = match (map.get("seed"), map.get("noise")) {
        (Some(s), _) => match s.parse() {
            Ok(s) => NoiseSeed::Fixed(s),
            Err(_) => {
                errors.push(here(format!("`seed` must be an integer, got `{s}`")));
                return None;
            }
        },
        (None, Some(&"poisson")) => NoiseSeed::Global,
        (None, Some(&"none")) | (None, None) => NoiseSeed::None,
        (None, Some(other)) => {
            errors.push(here(format!("unknown noise `{other}` (poisson, none)")));
            return None;
        }
    };
    if noise != NoiseSeed::None && !matches!(model, AccumulatorModel::PhotonCounter { .. }) {
        errors.push(here("noise applies to photon accumulators only".into()));
        return None;
    }
    let config = match AccumulatorConfig::new(model, None) {
        Ok(c) => c,
        Err(e) => {
            errors.push(here(e.to_string()));
            return None;
        }
    };
    Some(BlockConfig::Accumulator {
        config,
        reference,
        noise,
    })
}

/// `amp@pos,amp@pos,...`
fn parse_marks(text: &str) -> Result<Vec<(u64, u64)>, String> {
    let mut seen = BTreeSet::new();
    let mut marks = Vec::new();
    for item in text.split(',') {
        let (amp, pos) = item
            .split_once('@')
            .ok_or_else(|| format!("expected <amplitude>@<position>, found `{item}`"))?;
        let amp: u64 = amp.parse().map_err(|_| format!("bad amplitude `{amp}`"))?;
        let pos: u64 = pos.parse().map_err(|_| format!("bad position `{pos}`"))?;
        if amp == 0 {
            return Err(format!("amplitude at position {pos} must be at least 1"));
        }
        if !seen.insert(pos) {
            return Err(format!("position {pos} given twice"));
        }
        marks.push((pos, amp));
    }
    marks.sort_unstable();
    Ok(marks)
}

/// Kahn's algorithm; ties broken by block id so the order is deterministic.
fn topo_sort(net: &Netlist) -> Result<Vec<String>, Vec<String>> {
    let mut indegree: BTreeMap<&str, usize> = net.blocks.keys().map(|k| (k.as_str(), 0)).collect();
    for w in &net.wires {
        *indegree.get_mut(w.dst.block.as_str()).expect("validated") += 1;
    }
    let mut ready: BTreeSet<&str> = indegree.iter().filter(|(_, &d)| d == 0).map(|(k, _)| *k).collect();
    let mut order = Vec::new();
    while let Some(b) = ready.pop_first() {
        order.push(b.to_string());
        for w in net.wires.iter().filter(|w| w.src.block == b) {
            let d = indegree.get_mut(w.dst.block.as_str()).expect("validated");
            *d -= 1;
            if *d == 0 {
                ready.insert(&w.dst.block);
            }
        }
    }
    if order.len() == net.blocks.len() {
        Ok(order)
    } else {
        Err(indegree
            .into_iter()
            .filter(|(k, _)| !order.iter().any(|o| o == k))
            .map(|(k, _)| k.to_string())
            .collect())
    }
}

fn infer_types(net: &mut Netlist, errors: &mut Vec<String>) {
    let default = net.default_clock().to_string();
    for id in net.topo_order.clone() {
        let b = &net.blocks[&id];
        let inputs: Vec<Option<(SignalKind, String)>> = (0..net.input_count(&id))
            .map(|i| {
                net.driver(&PortRef::new(&id, Port::In(i)))
                    .and_then(|w| net.port_types.get(&w.src).cloned())
            })
            .collect();
        if inputs.iter().any(Option::is_none) {
            continue; // upstream already reported
        }
        let inputs: Vec<(SignalKind, String)> = inputs.into_iter().flatten().collect();
        let own_clock = b.clock.clone();
        let mut expect = |want: SignalKind| {
            for (i, (kind, _)) in inputs.iter().enumerate() {
                if *kind != want {
                    errors.push(format!(
                        "block `{id}` ({}) input in{i} carries a {kind} signal, expected {want}",
                        b.kind
                    ));
                }
            }
        };
        let out_kind = match b.kind {
            BlockKind::Source => Some(match &b.config {
                BlockConfig::Source { payload: SourcePayload::Marks(_), .. } => SignalKind::Marks,
                _ => SignalKind::Interval,
            }),
            BlockKind::Add | BlockKind::Mul | BlockKind::Min | BlockKind::Max => {
                expect(SignalKind::Interval);
                Some(SignalKind::Interval)
            }
            BlockKind::Mux => {
                expect(SignalKind::Interval);
                Some(SignalKind::Mux)
            }
            BlockKind::Demux => {
                expect(SignalKind::Mux);
                Some(SignalKind::Interval)
            }
            BlockKind::Madd => {
                expect(SignalKind::Marks);
                Some(SignalKind::Interval)
            }
            BlockKind::Accumulator | BlockKind::Convert => {
                expect(SignalKind::Interval);
                Some(SignalKind::Interval)
            }
            BlockKind::Probe => None,
        };

        // Operands of a combining block share one reference.
        let in_clock = inputs.first().map(|(_, c)| c.clone());
        if !matches!(b.kind, BlockKind::Probe) {
            if let Some((i, (_, c))) = inputs
                .iter()
                .enumerate()
                .find(|(_, (_, c))| Some(c) != in_clock.as_ref())
            {
                errors.push(format!(
                    "block `{id}`: input in{i} is counted in clock `{c}` but in0 in `{}`; insert a convert block",
                    in_clock.as_deref().unwrap_or("?")
                ));
            }
        }
        let out_clock = match &b.config {
            BlockConfig::Source { .. } => own_clock.unwrap_or_else(|| default.clone()),
            BlockConfig::Convert { to } => to.clone(),
            BlockConfig::Accumulator { reference, .. } => reference.clone(),
            _ => {
                let c = in_clock.unwrap_or_else(|| default.clone());
                if let Some(own) = own_clock.filter(|own| *own != c) {
                    errors.push(format!(
                        "block `{id}` declares clock `{own}` but its inputs are counted in `{c}`"
                    ));
                }
                c
            }
        };
        let Some(kind) = out_kind else { continue };
        if b.kind == BlockKind::Demux {
            // Outputs exist for every wired or probed demux port.
            let ports: BTreeSet<Port> = net
                .wires
                .iter()
                .map(|w| &w.src)
                .chain(net.probes.iter())
                .filter(|p| p.block == id)
                .map(|p| p.port)
                .collect();
            for p in ports {
                net.port_types.insert(PortRef::new(&id, p), (kind, out_clock.clone()));
            }
        } else {
            net.port_types.insert(PortRef::new(&id, Port::Out), (kind, out_clock));
        }
    }
}
