//! Shared plans: construction, per-batch dimension state, cost estimation
//! and execution.

pub mod dimstate;
pub mod engine;
pub mod estimate;
pub mod plan;

pub use dimstate::{DimState, PredicateIndex};
pub use engine::{execute_plan, ExecCounters, Partials, SourceData};
pub use estimate::{apply_costs, estimate_baseline, estimate_plan_cost, node_cost, NodeEstimate};
pub use plan::{build_global_plan, join_order, GlobalPlan, NodeKind, PlanNode};
