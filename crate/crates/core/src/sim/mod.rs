//! Netlists of temporal blocks and the event-driven engine that runs them.

pub mod engine;
pub mod generate;
pub mod netlist;
pub mod oracle;
pub mod trace;

pub use engine::{run, Fault, RunOptions, SimError, DEFAULT_BUDGET};
pub use netlist::{load_netlist, parse_netlist, Netlist, NetlistError};
pub use oracle::{evaluate, OracleError};
pub use trace::{stats, write_csv, write_vcd, ProbeValue, Summary, Trace};
