//! Random well-formed netlists for property testing.

use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::Rng;

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub max_depth: u32,
    pub max_value: u64,
    pub max_latency: u64,
    /// Largest value any generated block may produce.
    pub value_cap: u64,
    pub max_ops: usize,
    /// Restrict to add, mul, min, max and madd over one clock.
    pub core_only: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            max_depth: 5,
            max_value: 1_000,
            max_latency: 1_000,
            value_cap: 10_000_000,
            max_ops: 8,
            core_only: false,
        }
    }
}

const CLOCKS: [(&str, &str); 3] = [("main", "1"), ("fast", "2"), ("slow", "1/2")];

#[derive(Clone)]
struct Node {
    port: String,
    value: u64,
    depth: u32,
    clock: usize,
}

struct Builder<'r, R> {
    rng: &'r mut R,
    cfg: &'r GenConfig,
    blocks: Vec<String>,
    wires: Vec<String>,
    nodes: Vec<Node>,
    used: Vec<bool>,
}

impl<R: Rng> Builder<'_, R> {
    fn name(&self) -> String {
        format!("b{:02}", self.blocks.len())
    }

    fn latency(&mut self) -> String {
        if self.rng.random_bool(0.5) {
            String::new()
        } else {
            format!(" latency={}", self.rng.random_range(0..=self.cfg.max_latency))
        }
    }

    fn wire(&mut self, src: &str, dst: &str, port: u32) {
        let lat = self.latency();
        self.wires.push(format!("wire {src} {dst}.in{port}{lat}"));
    }

    fn add_node(&mut self, node: Node) {
        self.nodes.push(node);
        self.used.push(false);
    }

    fn source(&mut self, clock: usize) {
        let id = self.name();
        let value = self.rng.random_range(1..=self.cfg.max_value);
        self.blocks.push(format!("block {id} source value={value} clock={}", CLOCKS[clock].0));
        self.add_node(Node { port: format!("{id}.out"), value, depth: 0, clock });
    }

    /// Indices of `n` distinct operands counted in one clock, if there are
    /// enough shallow enough nodes.
    fn operands(&mut self, n: usize) -> Option<Vec<usize>> {
        let clock = if self.cfg.core_only { 0 } else { self.rng.random_range(0..CLOCKS.len()) };
        let pool: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].clock == clock && self.nodes[i].depth < self.cfg.max_depth)
            .collect();
        if pool.len() < n {
            return None;
        }
        Some(pool.choose_multiple(self.rng, n).copied().collect())
    }

    fn op(&mut self, kind: &str, params: &str, inputs: &[usize], value: u64, clock: usize) {
        let id = self.name();
        self.blocks.push(format!("block {id} {kind}{params}"));
        for (i, &n) in inputs.iter().enumerate() {
            let src = self.nodes[n].port.clone();
            self.wire(&src, &id, i as u32);
            self.used[n] = true;
        }
        let depth = inputs.iter().map(|&n| self.nodes[n].depth).max().unwrap_or(0) + 1;
        self.add_node(Node { port: format!("{id}.out"), value, depth, clock });
    }

    fn step(&mut self) {
        let cap = self.cfg.value_cap;
        let pick = if self.cfg.core_only {
            *[0, 1, 2, 3, 4, 7].choose(self.rng).expect("non-empty")
        } else {
            self.rng.random_range(0..9)
        };
        match pick {
            0 => {
                let Some(ins) = self.operands(2) else { return };
                let v = self.nodes[ins[0]].value + self.nodes[ins[1]].value;
                if v <= cap {
                    self.op("add", "", &ins, v, self.nodes[ins[0]].clock);
                }
            }
            1 => {
                let Some(ins) = self.operands(1) else { return };
                let k = self.rng.random_range(1..=3u64);
                let v = self.nodes[ins[0]].value * k;
                if v <= cap {
                    self.op("mul", &format!(" k={k}"), &ins, v, self.nodes[ins[0]].clock);
                }
            }
            2 => {
                let Some(ins) = self.operands(2) else { return };
                let v = self.nodes[ins[0]].value.saturating_mul(self.nodes[ins[1]].value);
                if v <= cap {
                    self.op("mul", "", &ins, v, self.nodes[ins[0]].clock);
                }
            }
            3 | 4 => {
                let n = self.rng.random_range(1..=3);
                let Some(ins) = self.operands(n) else { return };
                let vals = ins.iter().map(|&i| self.nodes[i].value);
                let (kind, v) = if self.rng.random_bool(0.5) {
                    ("min", vals.min().expect("non-empty"))
                } else {
                    ("max", vals.max().expect("non-empty"))
                };
                self.op(kind, "", &ins, v, self.nodes[ins[0]].clock);
            }
            5 => {
                let Some(ins) = self.operands(1) else { return };
                let to = self.rng.random_range(0..CLOCKS.len());
                let v = convert(self.nodes[ins[0]].value, self.nodes[ins[0]].clock, to);
                self.op("convert", &format!(" to={}", CLOCKS[to].0), &ins, v, to);
            }
            6 => {
                let Some(ins) = self.operands(1) else { return };
                let to = self.rng.random_range(0..CLOCKS.len());
                let periods = convert(self.nodes[ins[0]].value, self.nodes[ins[0]].clock, to);
                let r = CLOCKS[to].0;
                if self.rng.random_bool(0.5) {
                    self.op("accumulator", &format!(" ref={r}"), &ins, periods, to);
                } else {
                    let depth = self.rng.random_range(1..=12u32);
                    let v = periods % (1u64 << depth);
                    self.op("accumulator", &format!(" model=toggle depth={depth} ref={r}"), &ins, v, to);
                }
            }
            7 => self.madd(),
            _ => self.mux_demux(),
        }
    }

    fn madd(&mut self) {
        let n = self.rng.random_range(1..=3);
        let mut total = 0;
        let mut srcs = Vec::new();
        for _ in 0..n {
            let id = self.name();
            let buckets = self.rng.random_range(1..=4);
            let mut positions: Vec<u64> = (0..=50).collect::<Vec<_>>().choose_multiple(self.rng, buckets).copied().collect();
            positions.sort_unstable();
            let marks: Vec<String> = positions
                .iter()
                .map(|&p| {
                    let a = self.rng.random_range(1..=10u64);
                    total += a * p;
                    format!("{a}@{p}")
                })
                .collect();
            self.blocks.push(format!("block {id} source mv={} clock=main", marks.join(",")));
            srcs.push(id);
        }
        let id = self.name();
        self.blocks.push(format!("block {id} madd"));
        for (i, s) in srcs.iter().enumerate() {
            self.wire(&format!("{s}.out"), &id, i as u32);
        }
        self.add_node(Node { port: format!("{id}.out"), value: total, depth: 1, clock: 0 });
    }

    fn mux_demux(&mut self) {
        let n = self.rng.random_range(1..=3);
        let Some(ins) = self.operands(n) else { return };
        if ins.iter().any(|&i| self.nodes[i].depth + 2 > self.cfg.max_depth) {
            return;
        }
        let mut vals: Vec<u64> = ins.iter().map(|&i| self.nodes[i].value).collect();
        vals.sort_unstable();
        if vals[0] == 0 || vals.windows(2).any(|w| w[0] == w[1]) {
            return;
        }
        let clock = self.nodes[ins[0]].clock;
        let depth = ins.iter().map(|&i| self.nodes[i].depth).max().expect("non-empty") + 2;
        self.op("mux", "", &ins, 0, clock);
        let mux = self.nodes.pop().expect("just pushed");
        self.used.pop();
        let id = self.name();
        self.blocks.push(format!("block {id} demux"));
        self.wire(&mux.port, &id, 0);
        for (i, v) in vals.into_iter().enumerate() {
            self.add_node(Node { port: format!("{id}.out{i}"), value: v, depth, clock });
        }
    }
}

/// `floor(value * to / from)` over the fixed clock table.
fn convert(value: u64, from: usize, to: usize) -> u64 {
    // frequencies as n/2
    const HALVES: [u64; 3] = [2, 4, 1];
    value * HALVES[to] / HALVES[from]
}

/// Text of a random acyclic netlist of sources, arithmetic, races,
/// conversions, accumulators, MADD and mux/demux pairs, with probes on
/// every unconsumed output.
pub fn random_netlist<R: Rng>(rng: &mut R, cfg: &GenConfig) -> String {
    let mut b = Builder {
        rng,
        cfg,
        blocks: Vec::new(),
        wires: Vec::new(),
        nodes: Vec::new(),
        used: Vec::new(),
    };
    let sources = b.rng.random_range(2..=5);
    for _ in 0..sources {
        let clock = if cfg.core_only || b.rng.random_bool(0.7) { 0 } else { b.rng.random_range(1..CLOCKS.len()) };
        b.source(clock);
    }
    let ops = b.rng.random_range(1..=cfg.max_ops);
    for _ in 0..ops {
        b.step();
    }

    let mut out = String::new();
    let clocks = if cfg.core_only { &CLOCKS[..1] } else { &CLOCKS[..] };
    for (id, f) in clocks {
        let _ = writeln!(out, "clock {id} {f}");
    }
    for line in b.blocks.iter().chain(&b.wires) {
        let _ = writeln!(out, "{line}");
    }
    for (n, used) in b.nodes.iter().zip(&b.used) {
        if !used {
            let _ = writeln!(out, "probe {}", n.port);
        }
    }
    out
}
