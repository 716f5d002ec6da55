//! Historical workload graph: one costed plan per (partition, batch).

use std::fmt::Write as _;

use serde::Serialize;

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::executor::partition::plan_partition;
use crate::globalplan::{DimState, GlobalPlan, NodeKind};
use crate::materializer::cuts::{enumerate_cuts, Cut, CutLimits};
use crate::materializer::selection::{CutInstance, CutSpec};
use crate::materializer::solver::Selection;
use crate::materializer::view::{
    materialize_partition, view_bucket_attrs, view_columns, MaterializedView, ViewStore, VALUE_BYTES,
};
use crate::partitioner::BlockParams;
use crate::queryset::words_for;
use crate::storage::{Database, Layout};
use crate::workload::{Batch, SubqueryCatalog};

#[derive(Clone, Debug)]
pub struct Component {
    pub partition: usize,
    pub batch: usize,
    pub plan: GlobalPlan,
    /// Catalog id of the subquery each materializable node produces.
    pub subquery: Vec<Option<usize>>,
    /// Bytes needed to materialize each node on this partition.
    pub node_budget: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct WorkloadGraph {
    pub components: Vec<Component>,
}

impl WorkloadGraph {
    pub fn node_count(&self) -> usize {
        self.components.iter().map(|c| c.plan.len()).sum()
    }

    /// Bytes needed to materialize every materializable node once.
    pub fn full_coverage_bytes(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.subquery.iter().zip(&c.node_budget))
            .filter(|(s, _)| s.is_some())
            .map(|(_, b)| *b)
            .sum()
    }

    /// Bytes needed to materialize the direct producer of every aggregate,
    /// counting a node shared by several aggregates once.
    pub fn producer_cover_bytes(&self) -> f64 {
        let mut total = 0.0;
        for c in &self.components {
            let producers = c.plan.producers();
            let mut seen = vec![false; c.plan.len()];
            for n in &c.plan.nodes {
                if let NodeKind::Aggregate { .. } = n.kind {
                    if let Some(p) = producers[n.id] {
                        if c.subquery[p].is_some() && !seen[p] {
                            seen[p] = true;
                            total += c.node_budget[p];
                        }
                    }
                }
            }
        }
        total
    }
}

/// Builds one component per (partition, batch) pair the batch touches after
/// skipping. Node costs come from the partition-local estimates.
pub fn build_workload_graph(
    db: &Database,
    layout: &Layout,
    batches: &[Batch],
    catalog: &SubqueryCatalog,
    cfg: &EngineConfig,
) -> Result<WorkloadGraph> {
    let mut components = Vec::new();
    for (b, batch) in batches.iter().enumerate() {
        if batch.is_empty() {
            continue;
        }
        let words = words_for(cfg.queryset_width.max(batch.len()));
        let dims = DimState::build(db, batch, words);
        for part in &layout.partitions {
            let Some(pp) = plan_partition(batch, part, &dims, cfg) else {
                continue;
            };
            let mut subquery = vec![None; pp.plan.len()];
            let mut node_budget = vec![0.0; pp.plan.len()];
            for n in &pp.plan.nodes {
                if let NodeKind::Probe { .. } = n.kind {
                    let id = catalog.lookup(b, n.dims).ok_or_else(|| {
                        Error::Invariant(format!("subquery {:?} of batch {b} missing from catalog", n.dims))
                    })?;
                    subquery[n.id] = Some(id);
                    let cols = view_columns(&db.schema, batch, n.dims).len();
                    node_budget[n.id] = (part.len() * cols * VALUE_BYTES) as f64;
                }
            }
            components.push(Component {
                partition: part.id,
                batch: b,
                plan: pp.plan,
                subquery,
                node_budget,
            });
        }
    }
    Ok(WorkloadGraph { components })
}

/// A cut tagged with its component.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphCut {
    pub component: usize,
    pub cut: Cut,
}

/// Flattened cut-selection instance over every component. Node ids are
/// namespaced by component offset; elements are the materializable nodes.
#[derive(Clone, Debug)]
pub struct GraphInstance {
    pub instance: CutInstance,
    pub cuts: Vec<GraphCut>,
    pub offsets: Vec<usize>,
    pub truncated: bool,
}

pub fn build_instance(graph: &WorkloadGraph, limits: CutLimits) -> GraphInstance {
    let mut offsets = Vec::with_capacity(graph.components.len());
    let mut node_cost = Vec::new();
    let mut elem_budget = Vec::new();
    let mut cuts = Vec::new();
    let mut specs = Vec::new();
    let mut truncated = false;
    for (ci, comp) in graph.components.iter().enumerate() {
        let off = node_cost.len();
        offsets.push(off);
        node_cost.extend(comp.plan.nodes.iter().map(|n| n.cost.max(0.0)));
        elem_budget.extend(comp.node_budget.iter().copied());
        let e = enumerate_cuts(&comp.plan, &|v| comp.subquery[v].is_some(), limits);
        truncated |= e.truncated;
        for cut in e.cuts {
            specs.push(CutSpec {
                domain: cut.nodes.iter().map(|v| v + off).collect(),
                bc: cut.bc.iter().map(|v| v + off).collect(),
            });
            cuts.push(GraphCut { component: ci, cut });
        }
    }
    GraphInstance {
        instance: CutInstance {
            node_cost,
            elem_budget,
            cuts: specs,
        },
        cuts,
        offsets,
        truncated,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportCut {
    pub partition: usize,
    pub batch: usize,
    pub nodes: Vec<usize>,
    pub anchor: usize,
    pub reduction: f64,
    pub budget: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelectionReport {
    pub solver: String,
    pub budget_limit: f64,
    pub full_coverage_bytes: f64,
    pub reduction: f64,
    pub estimated_bytes: f64,
    pub measured_bytes: Option<usize>,
    pub truncated: bool,
    pub cuts: Vec<ReportCut>,
}

impl SelectionReport {
    pub fn new(
        solver: &str,
        budget: f64,
        graph: &WorkloadGraph,
        gi: &GraphInstance,
        sel: &Selection,
    ) -> Self {
        let cuts = sel
            .cuts
            .iter()
            .map(|c| {
                let gc = &gi.cuts[*c];
                let comp = &graph.components[gc.component];
                ReportCut {
                    partition: comp.partition,
                    batch: comp.batch,
                    nodes: gc.cut.nodes.clone(),
                    anchor: gc.cut.anchor,
                    reduction: gi.instance.reduction(&[*c]),
                    budget: gi.instance.budget(&[*c]),
                }
            })
            .collect();
        SelectionReport {
            solver: solver.to_string(),
            budget_limit: budget,
            full_coverage_bytes: graph.full_coverage_bytes(),
            reduction: sel.reduction,
            estimated_bytes: sel.budget,
            measured_bytes: None,
            truncated: gi.truncated,
            cuts,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "selection solver={} budget={:.0} full_coverage={:.0} reduction={:.3} estimated_bytes={:.0} measured_bytes={} truncated={}",
            self.solver,
            self.budget_limit,
            self.full_coverage_bytes,
            self.reduction,
            self.estimated_bytes,
            self.measured_bytes.map_or("-".to_string(), |b| b.to_string()),
            self.truncated
        );
        for c in &self.cuts {
            let nodes: Vec<String> = c.nodes.iter().map(|n| n.to_string()).collect();
            let _ = writeln!(
                out,
                "cut partition={} batch={} nodes=[{}] anchor={} reduction={:.3} budget={:.0}",
                c.partition,
                c.batch,
                nodes.join(","),
                c.anchor,
                c.reduction,
                c.budget
            );
        }
        out
    }
}

/// Materializes every (subquery, partition) element in the selection's
/// domain. Fails if the measured size exceeds `limit` × `slack`.
pub fn materialize(
    db: &Database,
    layout: &Layout,
    batches: &[Batch],
    graph: &WorkloadGraph,
    gi: &GraphInstance,
    sel: &Selection,
    limit: f64,
    cfg: &EngineConfig,
) -> Result<ViewStore> {
    let params = BlockParams {
        min_avg_rows: cfg.block_min_rows,
        max_rows: cfg.block_max_rows,
    };
    let mut store = ViewStore::default();
    let mut total = 0usize;
    for &elem in &sel.domain {
        let ci = gi.offsets.partition_point(|o| *o <= elem) - 1;
        let comp = &graph.components[ci];
        let node = elem - gi.offsets[ci];
        let subquery = comp.subquery[node].ok_or_else(|| Error::Invariant(format!("element {elem} is not materializable")))?;
        let dims = comp.plan.nodes[node].dims;
        let batch = &batches[comp.batch];
        let idx = match store.views.iter().position(|v| v.subquery == subquery) {
            Some(i) => i,
            None => {
                store.views.push(MaterializedView {
                    subquery,
                    batch: comp.batch,
                    dims,
                    columns: view_columns(&db.schema, batch, dims),
                    partitions: Default::default(),
                });
                store.views.len() - 1
            }
        };
        let view = &mut store.views[idx];
        let attrs = view_bucket_attrs(batch, dims, &view.columns);
        let part = &layout.partitions[comp.partition];
        let slab = materialize_partition(db, part, &view.columns, &attrs, params)?;
        total += slab.bytes();
        if total as f64 > limit * cfg.materialize_slack {
            return Err(Error::exec(format!(
                "materialized {total} bytes, above the {limit:.0}-byte budget times slack {}",
                cfg.materialize_slack
            )));
        }
        view.partitions.insert(comp.partition, slab);
    }
    Ok(store)
}
