//! Configuration, snapshots, output files, seeded random data and the
//! experiment drivers behind the command-line front end.

pub mod config;
pub mod experiments;
pub mod output;
pub mod random;
pub mod snapshot;

pub use config::{parse_config, Experiment, InitKind, RunConfig, TargetChoice};
pub use output::{DiagnosticsRow, OutputDir};
pub use random::{generate_random_field, Bubble, RandomFieldSpec};
pub use snapshot::{read_snapshot, write_snapshot, SnapshotData};
