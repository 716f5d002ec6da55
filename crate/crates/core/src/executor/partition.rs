use crate::config::EngineConfig;
use crate::executor::skip::{skip_analysis, SkipAnalysis};
use crate::globalplan::{apply_costs, build_global_plan, estimate_baseline, DimState, GlobalPlan};
use crate::queryset::QuerySet;
use crate::storage::Partition;
use crate::workload::Batch;

/// Skip analysis and costed baseline plan for one partition.
#[derive(Clone, Debug)]
pub struct PartitionPlan {
    pub skip: SkipAnalysis,
    pub plan: GlobalPlan,
}

/// Returns `None` when skipping leaves no query on the partition.
pub fn plan_partition(
    batch: &Batch,
    partition: &Partition,
    dims: &DimState,
    cfg: &EngineConfig,
) -> Option<PartitionPlan> {
    let all = QuerySet::full(dims.words, batch.len());
    let skip = skip_analysis(partition, batch, &all, cfg.skipping);
    if skip.union.is_empty() {
        return None;
    }
    let mut plan = build_global_plan(batch, &skip.union);
    let est = estimate_baseline(&plan, batch, &partition.blocks, &skip, dims, cfg.cost.filter_exponent);
    apply_costs(&mut plan, &est, &cfg.cost);
    Some(PartitionPlan { skip, plan })
}
