//! Experiment orchestration: config files, single runs, batch-size sweeps,
//! CSV/SVG output, and the consistency verifier behind the CLI.

pub mod config;
pub mod csv_io;
pub mod run;
pub mod svg;
pub mod sweep;

pub use config::SweepConfig;
pub use run::{run_training, RunRecord, RunSettings, RunStatus, StopRule};
pub use sweep::{lr_grid, sweep_batches, BatchAggregate, CellResult, LrGridResult, SweepResult};
