//! Netlist front-end: parse, validate, execute and emit results.

mod emit;
mod execute;
mod netlist;
mod parse;

pub use emit::{csv_files, emit, tallies_csv, to_json, OutputFormat};
pub use execute::{execute, netlist_hash, LockSummary, Provenance, RunError, RunResult};
pub use netlist::{
    Detection, LockBlock, Netlist, RunBlock, RunKind, Source, SourceState, SpaceBlock, NETLIST_VERSION,
};
pub use parse::{check_netlist, parse_any, parse_netlist, parse_netlist_json, Diagnostic, Diagnostics};
