//! Configuration-driven experiment runner.

pub mod config;
pub mod output;
pub mod presets;
pub mod run;
pub mod sweep;
pub mod verify;

pub use config::{ProblemSpec, RunConfig, SetSpec};
pub use output::{load_model, save_model, CsvTable, MetricsRow};
pub use run::{
    prepare, prepare_with_reference, reference_for, run_in_memory, run_to_dir, BoundKind,
    PreparedRun, RunOutput,
};
pub use sweep::{sweep, Cell, CellOutcome, CellSummary};
pub use verify::{verify, verify_with_lmo, Invariants, VerifyReport};
