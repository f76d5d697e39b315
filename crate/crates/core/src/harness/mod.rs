//! Evaluation tooling over run logs: tracking error, temporal shift
//! sweeps, lead/lag, run summaries and workspace reachability.

pub mod metrics;
pub mod summary;
pub mod workspace;

pub use metrics::{cross_correlation, peak_lag, shift_sweep, tracking_error, ErrorStats, MetricError, ShiftSweep};
pub use summary::{RunLogs, Summary};
pub use workspace::{analyze_workspace, perturbed_mounts, PoseRecord, ReachModel, WorkspaceReport};
