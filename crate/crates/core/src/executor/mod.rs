//! Batch execution with data skipping and view reuse.

pub mod batch;
pub mod metrics;
pub mod partition;
pub mod reuse;
pub mod skip;

pub use skip::{analyze_blocks, skip_analysis, BlockSkip, SkipAnalysis};
pub use reuse::{reuse_phase, ReuseDecision, ReuseProblem};
pub use batch::{execute_batch, execute_batch_into, BatchOutput};
pub use metrics::{results_csv, results_digest, BatchMetrics, METRICS_HEADER};
