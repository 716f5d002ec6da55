//! Sharing-aware view selection and partition-granular materialization.

pub mod cuts;
pub mod graph;
pub mod selection;
pub mod solver;
pub mod view;

pub use cuts::{enumerate_cuts, Cut, CutEnumeration, CutLimits};
pub use selection::{CutInstance, CutSpec};
pub use solver::{solve_gr, solve_isk, IskParams, Selection};
pub use graph::{build_instance, build_workload_graph, materialize, Component, GraphInstance, SelectionReport, WorkloadGraph};
pub use view::{read_views, write_views, MaterializedView, ViewPartition, ViewStore};
