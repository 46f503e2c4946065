//! Benchmark harness: timed scenarios, CSV output, input generation and the
//! obliviousness checker behind the `bench` binary.

pub mod check;
pub mod csv;
pub mod error;
pub mod gen;
pub mod scenario;

pub use check::{check_oblivious, miss_report, CheckReport, MissReport};
pub use csv::{emit_csv, CSV_HEADER};
pub use error::{CliError, Result};
pub use gen::{gen_input, GenKind};
pub use scenario::{run_scenario, Impl, Kind, Measurement, Scenario};
