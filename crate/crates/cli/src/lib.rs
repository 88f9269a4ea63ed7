//! `tempo` subcommands. Each `cmd_*` function returns the text it would
//! print and the process exit code, so the binary is a thin wrapper.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use temporal_core::arith::{demux, mux};
use temporal_core::channel::{parse_stream, serialize_stream};
use temporal_core::codes::{decode_hybrid, decode_pim, decode_unary, encode_hybrid, encode_pim, encode_unary};
use temporal_core::sim::netlist::load_netlist;
use temporal_core::sim::trace::parse_csv;
use temporal_core::sim::{evaluate, run, stats, write_csv, write_vcd, Fault, RunOptions, DEFAULT_BUDGET};
use temporal_core::{ClockRef, DeliveryMode, PulseTrain};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

/// What a command printed and how it ended.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self { code: EXIT_OK, stdout, stderr: String::new() }
    }

    fn error(message: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_ERROR,
            stdout: String::new(),
            stderr: format!("error: {message}\n"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "tempo", version, about = "Temporal computing simulator")]
pub struct Cli {
    /// Seed for every stochastic component (link jitter, photon noise).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a netlist and print its probe values.
    Run {
        netlist: PathBuf,
        /// Last tick that may be simulated.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Write the event trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = TraceFormat::Csv)]
        trace_format: TraceFormat,
        /// Print the cost summary after the probe values.
        #[arg(long)]
        stats: bool,
    },
    /// Simulate a netlist and compare every probe against integer evaluation.
    Check {
        netlist: PathBuf,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
    /// Encode values in a temporal code and decode them back.
    Encode {
        #[arg(value_enum)]
        scheme: Scheme,
        #[arg(required = true)]
        values: Vec<String>,
        /// Radix for the hybrid scheme.
        #[arg(long, default_value_t = 10)]
        base: u32,
        /// Idle ticks between values for the discontinuous scheme.
        #[arg(long, default_value_t = 1)]
        gap: u64,
    },
    /// Simulated tick cost of one operation over a range of operand sizes.
    Bench {
        #[arg(value_enum)]
        op: BenchOp,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<u64>,
        /// Constant factor for mul.
        #[arg(long, default_value_t = 1)]
        k: u64,
        /// Bucket amplitude for madd.
        #[arg(long, default_value_t = 1)]
        amplitude: u64,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a CSV trace.
    Export {
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = TraceFormat::Csv)]
        format: TraceFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TraceFormat {
    Csv,
    Vcd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    AddOffByOne,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    Unary,
    Pim,
    Hybrid,
    Mux,
    Serial,
    Discontinuous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchOp {
    Add,
    Mul,
    Madd,
}

/// Parse `args` (program name first) and run the selected command.
pub fn main_with<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code: EXIT_ERROR, stdout: String::new(), stderr: text }
            } else {
                Outcome::ok(text)
            };
        }
    };
    let seed = cli.seed;
    match cli.command {
        Command::Run { netlist, budget, trace, trace_format, stats } => {
            cmd_run(&netlist, budget, trace.as_deref().map(|p| (p, trace_format)), stats, seed)
        }
        Command::Check { netlist, inject_fault } => {
            cmd_check(&netlist, inject_fault.map(|FaultArg::AddOffByOne| Fault::AddOffByOne), seed)
        }
        Command::Encode { scheme, values, base, gap } => cmd_encode(scheme, &values, base, gap),
        Command::Bench { op, sizes, k, amplitude, out } => cmd_bench(op, &sizes, k, amplitude, out.as_deref()),
        Command::Export { trace, format, out } => cmd_export(&trace, format, out.as_deref()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn cmd_run(path: &Path, budget: u64, trace_out: Option<(&Path, TraceFormat)>, with_stats: bool, seed: u64) -> Outcome {
    let net = match load_netlist(path) {
        Ok(n) => n,
        Err(e) => return Outcome::error(format!("{}: {e}", path.display())),
    };
    let trace = match run(&net, &RunOptions { budget, seed, ..Default::default() }) {
        Ok(t) => t,
        Err(e) => return Outcome::error(e),
    };
    if let Some((out, format)) = trace_out {
        let text = match format {
            TraceFormat::Csv => write_csv(&trace),
            TraceFormat::Vcd => write_vcd(&trace.events),
        };
        if let Err(e) = write_file(out, &text) {
            return Outcome::error(e);
        }
    }
    let mut stdout = String::new();
    for (k, v) in &trace.results {
        let _ = writeln!(stdout, "probe {k}={v}");
    }
    if with_stats {
        let _ = write!(stdout, "{}", stats(&trace));
    }
    let mut stderr = String::new();
    for v in &trace.violations {
        let _ = writeln!(stderr, "warning: line {}: unstable link {} -> {} (error {:+})", v.wire_line, v.from, v.to, v.error);
    }
    let code = if trace.budget_exhausted {
        let _ = writeln!(stderr, "budget of {budget} ticks exhausted");
        EXIT_BUDGET
    } else {
        EXIT_OK
    };
    Outcome { code, stdout, stderr }
}

pub fn cmd_check(path: &Path, fault: Option<Fault>, seed: u64) -> Outcome {
    let net = match load_netlist(path) {
        Ok(n) => n,
        Err(e) => return Outcome::error(format!("{}: {e}", path.display())),
    };
    let expected = match evaluate(&net) {
        Ok(r) => r,
        Err(e) => return Outcome::error(e),
    };
    let trace = match run(&net, &RunOptions { seed, fault, ..Default::default() }) {
        Ok(t) => t,
        Err(e) => return Outcome::error(e),
    };
    let mut stdout = String::new();
    let mut mismatches = 0;
    for (key, want) in &expected {
        match trace.results.get(key) {
            Some(got) if got == want => {
                let _ = writeln!(stdout, "match {key}: {want} = {got}");
            }
            got => {
                mismatches += 1;
                let got = got.map_or_else(|| "<none>".to_string(), ToString::to_string);
                let _ = writeln!(stdout, "mismatch {key}: expected {want}, actual {got}");
            }
        }
    }
    if mismatches == 0 {
        Outcome::ok(stdout)
    } else {
        Outcome {
            code: EXIT_MISMATCH,
            stdout,
            stderr: format!("{mismatches} probe(s) differ\n"),
        }
    }
}

fn pulses(t: &PulseTrain) -> String {
    t.pulses().iter().map(|p| p.0.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_all<T: FromStr>(values: &[String]) -> Result<Vec<T>, String> {
    values
        .iter()
        .map(|v| v.parse().map_err(|_| format!("`{v}` is not a non-negative integer")))
        .collect()
}

pub fn cmd_encode(scheme: Scheme, values: &[String], base: u32, gap: u64) -> Outcome {
    match encode(scheme, values, base, gap) {
        Ok(text) => Outcome::ok(text),
        Err(e) => Outcome::error(e),
    }
}

fn encode(scheme: Scheme, values: &[String], base: u32, gap: u64) -> Result<String, String> {
    let clock = ClockRef::unit("main");
    let mut out = String::new();
    let single = |name: &str| -> Result<(), String> {
        if values.len() == 1 {
            Ok(())
        } else {
            Err(format!("{name} encodes exactly one value"))
        }
    };
    match scheme {
        Scheme::Unary => {
            single("unary")?;
            let n: BigUint = parse_all(values)?.remove(0);
            let t = encode_unary(n.clone(), &clock);
            let _ = writeln!(out, "unary {n}: {t}");
            let _ = writeln!(out, "decoded {}", decode_unary(&t));
        }
        Scheme::Pim => {
            single("pim")?;
            let n: u64 = parse_all(values)?[0];
            let t = encode_pim(n, &clock);
            let _ = writeln!(out, "pim {n}: pulses {}", pulses(&t));
            let _ = writeln!(out, "decoded {}", decode_pim(&t).map_err(|e| e.to_string())?);
        }
        Scheme::Hybrid => {
            single("hybrid")?;
            let n: BigUint = parse_all(values)?.remove(0);
            let digits = encode_hybrid(&n, base, &clock).map_err(|e| e.to_string())?;
            // most significant digit first, as written
            let shown: Vec<String> = digits.iter().rev().map(ToString::to_string).collect();
            let _ = writeln!(out, "hybrid {n} base {base}: {}", shown.join("|"));
            let _ = writeln!(out, "decoded {}", decode_hybrid(&digits, base).map_err(|e| e.to_string())?);
        }
        Scheme::Mux => {
            let vs: Vec<u64> = parse_all(values)?;
            let ch = mux(&vs, &clock).map_err(|e| e.to_string())?;
            let t = ch.to_train();
            let set = |s: &mut dyn Iterator<Item = u64>| s.map(|v| v.to_string()).collect::<Vec<_>>().join(",");
            let _ = writeln!(out, "mux {{{}}}: pulses {}", set(&mut ch.values().iter().copied()), pulses(&t));
            let decoded = demux(&t).map_err(|e| e.to_string())?;
            let _ = writeln!(out, "decoded {{{}}}", set(&mut decoded.into_iter()));
        }
        Scheme::Serial | Scheme::Discontinuous => {
            let vs: Vec<u64> = parse_all(values)?;
            let (mode, name) = if scheme == Scheme::Serial {
                (DeliveryMode::Serial, "serial")
            } else {
                (DeliveryMode::SerialDiscontinuous, "discontinuous")
            };
            let gaps = vec![gap; vs.len().saturating_sub(1)];
            let gaps = (mode == DeliveryMode::SerialDiscontinuous).then_some(gaps.as_slice());
            let t = serialize_stream(&vs, mode, gaps, &clock).map_err(|e| e.to_string())?;
            let _ = writeln!(out, "{name} {}: pulses {}", values.join(","), pulses(&t));
            let decoded = parse_stream(&t, mode).map_err(|e| e.to_string())?;
            let decoded: Vec<String> = decoded.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "decoded {}", decoded.join(","));
        }
    }
    Ok(out)
}

/// Netlist exercising one `op` block at operand size `size`.
pub fn bench_netlist(op: BenchOp, size: u64, k: u64, amplitude: u64) -> String {
    match op {
        BenchOp::Add => format!(
            "block a source value={size}\nblock b source value={size}\nblock op add\n\
             wire a.out op.in0\nwire b.out op.in1\nprobe op.out\n"
        ),
        BenchOp::Mul => format!("block a source value={size}\nblock op mul k={k}\nwire a.out op.in0\nprobe op.out\n"),
        BenchOp::Madd => format!("block a source mv={amplitude}@{size}\nblock op madd\nwire a.out op.in0\nprobe op.out\n"),
    }
}

/// `(size, ticks)` rows, ticks being the op block's firing-to-last-event cost.
pub fn bench_rows(op: BenchOp, sizes: &[u64], k: u64, amplitude: u64) -> Result<Vec<(u64, u64)>, String> {
    sizes
        .iter()
        .map(|&size| {
            if size == 0 {
                return Err("sizes must be positive".to_string());
            }
            let text = bench_netlist(op, size, k, amplitude);
            let net = temporal_core::sim::parse_netlist(&text).map_err(|e| e.to_string())?;
            let trace = run(&net, &RunOptions::default()).map_err(|e| e.to_string())?;
            if trace.budget_exhausted {
                return Err(format!("size {size} does not finish within the default budget"));
            }
            Ok((size, trace.costs["op"].ticks()))
        })
        .collect()
}

pub fn cmd_bench(op: BenchOp, sizes: &[u64], k: u64, amplitude: u64, out: Option<&Path>) -> Outcome {
    let rows = match bench_rows(op, sizes, k, amplitude) {
        Ok(r) => r,
        Err(e) => return Outcome::error(e),
    };
    let mut csv = String::from("size,ticks\n");
    for (size, ticks) in rows {
        let _ = writeln!(csv, "{size},{ticks}");
    }
    match out {
        Some(path) => match write_file(path, &csv) {
            Ok(()) => Outcome::ok(String::new()),
            Err(e) => Outcome::error(e),
        },
        None => Outcome::ok(csv),
    }
}

pub fn cmd_export(path: &Path, format: TraceFormat, out: Option<&Path>) -> Outcome {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return Outcome::error(format!("{}: {e}", path.display())),
    };
    let events = match parse_csv(&text) {
        Ok(e) => e,
        Err(e) => return Outcome::error(format!("{}: {e}", path.display())),
    };
    let rendered = match format {
        TraceFormat::Vcd => write_vcd(&events),
        TraceFormat::Csv => {
            // rows only; the footer belongs to the run that produced them
            let mut s = String::from(temporal_core::sim::trace::CSV_HEADER);
            s.push('\n');
            for e in &events {
                let _ = writeln!(s, "{},{},{},{}", e.tick, e.block, e.port, e.role);
            }
            s
        }
    };
    match out {
        Some(p) => match write_file(p, &rendered) {
            Ok(()) => Outcome::ok(String::new()),
            Err(e) => Outcome::error(e),
        },
        None => Outcome::ok(rendered),
    }
}
