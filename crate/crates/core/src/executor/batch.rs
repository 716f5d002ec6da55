//! Two-phase batch execution: shared dimension state, then partitions in
//! parallel with skipping, reuse and vectorized plan execution.

use std::time::Instant;

use rayon::prelude::*;

use crate::config::{EngineConfig, ReuseMode};
use crate::error::{Error, Result};
use crate::executor::metrics::BatchMetrics;
use crate::executor::partition::plan_partition;
use crate::executor::reuse::{reuse_phase, ReuseProblem};
use crate::executor::skip::{analyze_blocks, SkipAnalysis};
use crate::globalplan::{execute_plan, DimState, ExecCounters, GlobalPlan, NodeKind, Partials, SourceData};
use crate::materializer::view::required_columns;
use crate::materializer::ViewStore;
use crate::queryset::words_for;
use crate::storage::{ColumnRef, Database, Layout, Partition};
use crate::workload::Batch;

#[derive(Clone, Debug, PartialEq)]
pub struct BatchOutput {
    /// Per query, one sum per group (a single slot without grouping).
    pub results: Vec<Vec<i64>>,
    pub metrics: BatchMetrics,
}

#[derive(Clone, Debug, Default)]
struct PartStats {
    counters: ExecCounters,
    skipped_filters: u64,
    partitions_run: u64,
    views_used: u64,
    est_baseline: f64,
    est_rewritten: f64,
}

impl PartStats {
    fn add(&mut self, o: &PartStats) {
        self.counters.add(&o.counters);
        self.skipped_filters += o.skipped_filters;
        self.partitions_run += o.partitions_run;
        self.views_used += o.views_used;
        self.est_baseline += o.est_baseline;
        self.est_rewritten += o.est_rewritten;
    }
}

/// Chosen view for one plan node.
struct ViewChoice {
    view: usize,
    skip: SkipAnalysis,
    overhead: f64,
}

struct Ctx<'a> {
    db: &'a Database,
    views: &'a ViewStore,
    batch: &'a Batch,
    dims: &'a DimState,
    cfg: &'a EngineConfig,
}

fn choose_view(ctx: &Ctx<'_>, plan: &GlobalPlan, v: usize, part: &Partition) -> Option<ViewChoice> {
    let node = &plan.nodes[v];
    let schema = &ctx.db.schema;
    let mut required: Vec<ColumnRef> = node
        .query_set
        .iter()
        .flat_map(|q| required_columns(schema, &ctx.batch.queries[q], node.dims))
        .collect();
    required.sort_unstable();
    required.dedup();
    let view_skipping = ctx.cfg.skipping && ctx.cfg.reuse == ReuseMode::Optimized;
    let mut best: Option<ViewChoice> = None;
    for (i, view) in ctx.views.candidates(node.dims, part.id) {
        if !required.iter().all(|c| view.column_slot(*c).is_some()) {
            continue;
        }
        let slab = &view.partitions[&part.id];
        let slot_of = |c: ColumnRef| view.column_slot(c);
        let skip = analyze_blocks(&slab.blocks, &slot_of, ctx.batch, &node.query_set, view_skipping);
        let work: f64 = skip
            .blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| !b.is_skipped())
            .map(|(b, s)| (slab.blocks.block_rows(b) * s.runtime_filters()) as f64)
            .sum();
        let overhead = ctx.cfg.cost.c_f * work;
        if best.as_ref().is_none_or(|b| overhead < b.overhead) {
            best = Some(ViewChoice {
                view: i,
                skip,
                overhead,
            });
        }
    }
    best
}

fn run_partition(ctx: &Ctx<'_>, part: &Partition, out: &mut Partials) -> Result<PartStats> {
    let mut stats = PartStats::default();
    let Some(pp) = plan_partition(ctx.batch, part, ctx.dims, ctx.cfg) else {
        stats.counters.skipped_blocks += part.blocks.len() as u64;
        return Ok(stats);
    };
    stats.partitions_run = 1;
    stats.est_baseline = pp.plan.total_cost();
    let n = pp.plan.len();
    let mut choices: Vec<Option<ViewChoice>> = (0..n).map(|_| None).collect();
    if ctx.cfg.reuse != ReuseMode::Off && !ctx.views.is_empty() {
        for v in 0..n {
            if matches!(pp.plan.nodes[v].kind, NodeKind::Probe { .. }) {
                choices[v] = choose_view(ctx, &pp.plan, v, part);
            }
        }
    }
    let materialized: Vec<bool> = choices.iter().map(Option::is_some).collect();
    let overhead: Vec<f64> = choices.iter().map(|c| c.as_ref().map_or(0.0, |c| c.overhead)).collect();
    let (plan, kept_or_injected) = if materialized.iter().any(|m| *m) {
        let problem = ReuseProblem::from_plan(&pp.plan, materialized, overhead.clone());
        let d = reuse_phase(&problem, ctx.cfg.reuse == ReuseMode::Naive);
        stats.est_rewritten = d.cost;
        let rewritten = pp.plan.rewrite(&d.kept, &d.injected, |v| overhead[v]);
        let mut map = Vec::new();
        for v in 0..n {
            if d.kept[v] || d.injected.contains(&v) {
                map.push(v);
            }
        }
        (rewritten, map)
    } else {
        stats.est_rewritten = stats.est_baseline;
        (pp.plan.clone(), (0..n).collect())
    };

    let fact = &ctx.db.fact;
    let range = part.rows.clone();
    let mut sources = Vec::new();
    for node in plan.sources() {
        match node.kind {
            NodeKind::Scan => {
                stats.skipped_filters += pp.skip.skipped_filters as u64;
                sources.push(SourceData {
                    node: node.id,
                    columns: fact
                        .columns
                        .iter()
                        .enumerate()
                        .map(|(i, c)| (ColumnRef::fact(i), &c[range.clone()]))
                        .collect(),
                    blocks: &part.blocks,
                    skip: &pp.skip,
                    is_view: false,
                });
            }
            NodeKind::ViewScan => {
                let orig = kept_or_injected[node.id];
                let choice = choices[orig]
                    .as_ref()
                    .ok_or_else(|| Error::Invariant(format!("view scan {orig} without a view")))?;
                let view = &ctx.views.views[choice.view];
                let slab = view.partitions.get(&part.id).ok_or_else(|| {
                    Error::exec(format!("view {} has no slab for partition {}", choice.view, part.id))
                })?;
                if slab.rows != part.len() {
                    return Err(Error::exec(format!(
                        "view {} and partition {} are misaligned",
                        choice.view, part.id
                    )));
                }
                stats.views_used += 1;
                stats.skipped_filters += choice.skip.skipped_filters as u64;
                sources.push(SourceData {
                    node: node.id,
                    columns: view.columns.iter().copied().zip(slab.data.iter().map(|c| c.as_slice())).collect(),
                    blocks: &slab.blocks,
                    skip: &choice.skip,
                    is_view: true,
                });
            }
            _ => unreachable!("sources are scans"),
        }
    }
    execute_plan(
        &plan,
        ctx.batch,
        &ctx.db.schema,
        ctx.dims,
        &sources,
        ctx.cfg.vector_size,
        out,
        &mut stats.counters,
    )?;
    Ok(stats)
}

/// Executes `batch` over the partitions of `layout`, reusing views where the
/// reuse phase finds them beneficial. Metrics gathered before a failure are
/// left in `metrics`.
pub fn execute_batch_into(
    db: &Database,
    layout: &Layout,
    views: &ViewStore,
    batch: &Batch,
    cfg: &EngineConfig,
    metrics: &mut BatchMetrics,
) -> Result<Vec<Vec<i64>>> {
    let start = Instant::now();
    *metrics = BatchMetrics::new(&batch.name, batch.len());
    metrics.partitions = layout.partitions.len() as u64;
    metrics.blocks = layout.total_blocks() as u64;
    if batch.is_empty() {
        metrics.wall_ns = start.elapsed().as_nanos() as u64;
        return Ok(Vec::new());
    }
    batch.validate(&db.schema, cfg.queryset_width)?;
    let words = words_for(batch.len());
    let dims = DimState::build(db, batch, words);
    metrics.dimstate_ns = start.elapsed().as_nanos() as u64;
    let ctx = Ctx {
        db,
        views,
        batch,
        dims: &dims,
        cfg,
    };
    let phase2 = Instant::now();
    let work = || {
        layout
            .partitions
            .par_iter()
            .try_fold(
                || (Partials::new(batch, &db.schema), PartStats::default()),
                |(mut partials, mut stats), part| {
                    let s = run_partition(&ctx, part, &mut partials)?;
                    stats.add(&s);
                    Ok::<_, Error>((partials, stats))
                },
            )
            .try_reduce(
                || (Partials::new(batch, &db.schema), PartStats::default()),
                |(mut pa, mut sa), (pb, sb)| {
                    pa.merge(&pb);
                    sa.add(&sb);
                    Ok((pa, sa))
                },
            )
    };
    let result = if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?
            .install(work)
    } else {
        work()
    };
    metrics.exec_ns = phase2.elapsed().as_nanos() as u64;
    metrics.wall_ns = start.elapsed().as_nanos() as u64;
    let (partials, stats) = result?;
    metrics.record(&stats.counters);
    metrics.skipped_filters = stats.skipped_filters;
    metrics.partitions_run = stats.partitions_run;
    metrics.views_used = stats.views_used;
    metrics.est_baseline_cost = stats.est_baseline;
    metrics.est_cost = stats.est_rewritten;
    metrics.set_results(&partials.values);
    Ok(partials.values)
}

pub fn execute_batch(
    db: &Database,
    layout: &Layout,
    views: &ViewStore,
    batch: &Batch,
    cfg: &EngineConfig,
) -> Result<BatchOutput> {
    let mut metrics = BatchMetrics::default();
    let results = execute_batch_into(db, layout, views, batch, cfg, &mut metrics)?;
    Ok(BatchOutput { results, metrics })
}
