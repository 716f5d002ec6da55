use crate::config::CostModel;
use crate::executor::skip::SkipAnalysis;
use crate::globalplan::dimstate::DimState;
use crate::globalplan::plan::{GlobalPlan, NodeKind};
use crate::storage::{BlockSet, ColumnRef, Zone};
use crate::workload::Batch;

/// Estimated input rows of a node plus kind-specific work: for filters the
/// rows weighted by ambivalent predicate count, for view scans the rows
/// weighted by runtime filter count.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NodeEstimate {
    pub rows: f64,
    pub work: f64,
}

impl NodeEstimate {
    pub fn uniform(rows: f64) -> Self {
        NodeEstimate { rows, work: rows }
    }
}

pub fn node_cost(kind: NodeKind, e: NodeEstimate, m: &CostModel) -> f64 {
    match kind {
        NodeKind::Scan => m.c_scan * e.rows,
        NodeKind::Filter { .. } => m.c_filter * e.work,
        NodeKind::Probe { .. } => m.c_probe * e.rows,
        NodeKind::Aggregate { .. } => m.c_agg * e.rows,
        NodeKind::ViewScan => m.c_f * e.work,
    }
}

/// Sum of per-node costs.
pub fn estimate_plan_cost(plan: &GlobalPlan, est: &[NodeEstimate], m: &CostModel) -> f64 {
    plan.nodes
        .iter()
        .zip(est)
        .map(|(n, e)| node_cost(n.kind, *e, m))
        .sum()
}

/// Writes per-node costs into the plan.
pub fn apply_costs(plan: &mut GlobalPlan, est: &[NodeEstimate], m: &CostModel) {
    for (n, e) in plan.nodes.iter_mut().zip(est) {
        n.cost = node_cost(n.kind, *e, m);
    }
}

/// Fraction of a block's rows expected to satisfy `[lo, hi)`, assuming
/// values spread uniformly between the block's min and max.
pub fn overlap_fraction(zone: Zone, lo: i64, hi: i64) -> f64 {
    let (min, max) = (zone.min as i64, zone.max as i64 + 1);
    let a = lo.max(min);
    let b = hi.min(max);
    if b <= a {
        0.0
    } else {
        (b - a) as f64 / (max - min) as f64
    }
}

/// Estimates input cardinalities for a baseline plan over a fact partition.
///
/// Fact predicate selectivity per block comes from the zone maps; dimension
/// selectivity from the batch's dimension state. Queries are assumed
/// independent when estimating how many rows serve at least one query.
pub fn estimate_baseline(
    plan: &GlobalPlan,
    batch: &Batch,
    blocks: &BlockSet,
    skip: &SkipAnalysis,
    dims: &DimState,
    filter_exponent: f64,
) -> Vec<NodeEstimate> {
    let mut est = vec![NodeEstimate::default(); plan.len()];
    let Some(scan) = plan.nodes.iter().find(|n| n.kind == NodeKind::Scan) else {
        return est;
    };
    let scan_qs = &scan.query_set;
    let producers = plan.producers();
    let filters: Vec<(usize, usize)> = plan
        .nodes
        .iter()
        .filter_map(|n| match n.kind {
            NodeKind::Filter { column } => Some((n.id, column)),
            _ => None,
        })
        .collect();
    let queries: Vec<usize> = scan_qs.iter().collect();
    // Dimension pass rate per query for each probe's producer table set.
    let dim_pass = |q: usize, set: crate::workload::DimSet| -> f64 {
        set.iter().map(|d| dims.selectivity(d, q)).product()
    };
    let mut sel = vec![1.0f64; batch.len()];
    let mut pass = vec![1.0f64; batch.len()];
    for (b, bs) in skip.blocks.iter().enumerate() {
        let alive = bs.qs.intersection(scan_qs);
        if alive.is_empty() {
            continue;
        }
        let rows = blocks.block_rows(b) as f64;
        est[scan.id].rows += rows;
        est[scan.id].work += rows;
        for &q in &queries {
            pass[q] = if alive.contains(q) { 1.0 } else { 0.0 };
        }
        for &(node, column) in &filters {
            let any = 1.0 - queries.iter().map(|q| 1.0 - pass[*q]).product::<f64>();
            let input = rows * any;
            let n_amb = bs.ambivalent_count(ColumnRef::fact(column));
            est[node].rows += input;
            if n_amb > 0 {
                est[node].work += input * (n_amb as f64).powf(filter_exponent);
            }
            let slot = blocks.slot(column);
            for &q in &queries {
                if pass[q] == 0.0 {
                    continue;
                }
                for p in batch.queries[q].fact_filters().filter(|p| p.column.column == column) {
                    let f = match slot {
                        Some(s) => overlap_fraction(blocks.zone(s, b), p.range.lo, p.range.hi),
                        None => 0.5,
                    };
                    pass[q] *= f;
                }
            }
        }
        for &q in &queries {
            sel[q] = pass[q];
        }
        for n in &plan.nodes {
            match n.kind {
                NodeKind::Probe { .. } => {
                    let parent = producers[n.id].expect("probe has a producer");
                    let upstream = plan.nodes[parent].dims;
                    let none: f64 = n
                        .query_set
                        .iter()
                        .map(|q| 1.0 - sel[q] * dim_pass(q, upstream))
                        .product();
                    let input = rows * (1.0 - none);
                    est[n.id].rows += input;
                    est[n.id].work += input;
                }
                NodeKind::Aggregate { query } => {
                    let input = rows * sel[query] * dim_pass(query, batch.queries[query].joins);
                    est[n.id].rows += input;
                    est[n.id].work += input;
                }
                _ => {}
            }
        }
    }
    est
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::globalplan::plan::build_global_plan;
    use crate::queryset::QuerySet;
    use crate::storage::ValueRange;
    use crate::workload::{DimSet, Predicate, Query};

    fn unit() -> CostModel {
        CostModel {
            c_scan: 1.0,
            c_filter: 1.0,
            c_probe: 1.0,
            c_agg: 1.0,
            c_f: 1.0,
            filter_exponent: 1.0,
        }
    }

    #[test]
    fn empty_plan_costs_nothing() {
        assert_eq!(estimate_plan_cost(&GlobalPlan::empty(1), &[], &unit()), 0.0);
    }

    #[test]
    fn scan_costs_rows() {
        let batch = Batch::new(
            "b",
            vec![Query {
                name: String::new(),
                joins: DimSet::EMPTY,
                filters: vec![],
                sum: 0,
                group_by: None,
            }],
        );
        let plan = build_global_plan(&batch, &QuerySet::full(1, 1));
        let m = CostModel::default();
        let mut est = vec![NodeEstimate::default(); plan.len()];
        est[0] = NodeEstimate::uniform(5000.0);
        assert_eq!(estimate_plan_cost(&plan, &est, &m), m.c_scan * 5000.0);
    }

    #[test]
    fn running_pair_with_unit_costs() {
        let q = |joins: &[usize]| Query {
            name: String::new(),
            joins: DimSet::from_dims(joins.iter().copied()),
            filters: vec![Predicate {
                column: ColumnRef::fact(0),
                range: ValueRange::new(0, 5),
            }],
            sum: 0,
            group_by: None,
        };
        let batch = Batch::new("b", vec![q(&[0, 1, 2]), q(&[0, 3])]);
        let plan = build_global_plan(&batch, &QuerySet::full(1, 2));
        let est = vec![NodeEstimate::uniform(100.0); plan.len()];
        assert_eq!(estimate_plan_cost(&plan, &est, &unit()), 800.0);
    }

    #[test]
    fn overlap_interpolates() {
        let z = Zone { min: 0, max: 99 };
        assert_eq!(overlap_fraction(z, 0, 10), 0.1);
        assert_eq!(overlap_fraction(z, 200, 300), 0.0);
        assert_eq!(overlap_fraction(z, -5, 500), 1.0);
    }
}
