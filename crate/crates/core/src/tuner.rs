//! Offline tuning: partition the fact table, select views under a budget and
//! materialize them. Artifacts live in one directory.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::config::{Budget, EngineConfig, Solver};
use crate::error::{Error, Result};
use crate::materializer::{
    build_instance, build_workload_graph, materialize, read_views, solve_gr, solve_isk, write_views, CutLimits,
    GraphInstance, IskParams, Selection, SelectionReport, ViewStore, WorkloadGraph,
};
use crate::partitioner::{
    build_layout, candidate_cuts, fact_bucket_attrs, partition, BlockParams, PartitionParams,
};
use crate::storage::{Database, Layout, PartitionTree, Schema};
use crate::workload::{enumerate_subqueries, record_access_matrix, Batch};

pub const LAYOUT_FILE: &str = "layout.txt";
pub const VIEWS_FILE: &str = "views.scvw";
pub const SELECTION_TEXT: &str = "selection.txt";
pub const SELECTION_JSON: &str = "selection.json";

pub fn block_params(cfg: &EngineConfig) -> BlockParams {
    BlockParams {
        min_avg_rows: cfg.block_min_rows,
        max_rows: cfg.block_max_rows,
    }
}

/// Homogeneity partitioning over the tuning batches, or a single leaf when
/// partitioning is disabled.
pub fn plan_partitions(db: &Database, tuning: &[Batch], cfg: &EngineConfig) -> Result<PartitionTree> {
    if !cfg.partitioning || tuning.iter().all(|b| b.is_empty()) {
        return Ok(PartitionTree::single());
    }
    let catalog = enumerate_subqueries(tuning);
    let w = record_access_matrix(db, tuning, &catalog, cfg.sample_rate, cfg.seed)?;
    let cuts = candidate_cuts(db, tuning);
    Ok(partition(
        &db.fact,
        &w,
        &cuts,
        PartitionParams {
            ps_min: cfg.ps_min,
            sample_rate: cfg.sample_rate,
            threshold: cfg.split_threshold,
        },
    ))
}

/// Reorganizes the fact table along `tree` and clusters blocks on the
/// tuning predicates. Deterministic, so `run` can rebuild what `tune` saw.
pub fn derive_layout(
    db: &Database,
    tree: PartitionTree,
    tuning: &[Batch],
    cfg: &EngineConfig,
) -> Result<(Database, Layout)> {
    build_layout(db, tree, &fact_bucket_attrs(tuning), block_params(cfg))
}

pub fn cut_limits(cfg: &EngineConfig) -> CutLimits {
    CutLimits {
        max_width: Some(cfg.max_cut_width),
        max_cuts: Some(cfg.max_cuts_per_component),
    }
}

pub fn solve(gi: &GraphInstance, limit: f64, cfg: &EngineConfig) -> Selection {
    match cfg.solver {
        Solver::Gr => solve_gr(&gi.instance, limit),
        Solver::Isk => solve_isk(
            &gi.instance,
            limit,
            IskParams {
                iterations: cfg.isk_iterations,
                seed_size: cfg.isk_seed_size,
                seed_pool: cfg.isk_seed_pool,
            },
        ),
    }
}

pub struct Tuned {
    /// Fact table in partition order.
    pub db: Database,
    pub layout: Layout,
    pub graph: WorkloadGraph,
    pub views: ViewStore,
    pub report: SelectionReport,
}

pub fn tune(db: &Database, tuning: &[Batch], budget: Budget, cfg: &EngineConfig) -> Result<Tuned> {
    cfg.validate()?;
    for b in tuning {
        b.validate(&db.schema, cfg.queryset_width)?;
    }
    let tree = plan_partitions(db, tuning, cfg)?;
    let (db, layout) = derive_layout(db, tree, tuning, cfg)?;
    let catalog = enumerate_subqueries(tuning);
    let graph = build_workload_graph(&db, &layout, tuning, &catalog, cfg)?;
    let gi = build_instance(&graph, cut_limits(cfg));
    let limit = budget.resolve(graph.full_coverage_bytes());
    let sel = solve(&gi, limit, cfg);
    let solver = match cfg.solver {
        Solver::Gr => "gr",
        Solver::Isk => "isk",
    };
    let mut report = SelectionReport::new(solver, limit, &graph, &gi, &sel);
    let views = materialize(&db, &layout, tuning, &graph, &gi, &sel, limit, cfg)?;
    report.measured_bytes = Some(views.bytes());
    Ok(Tuned {
        db,
        layout,
        graph,
        views,
        report,
    })
}

pub fn save_artifacts(dir: &Path, tuned: &Tuned) -> Result<()> {
    fs::create_dir_all(dir)?;
    let schema = &tuned.db.schema;
    let rows: Vec<usize> = tuned.layout.partitions.iter().map(|p| p.len()).collect();
    fs::write(dir.join(LAYOUT_FILE), tuned.layout.tree.to_text(schema, Some(&rows)))?;
    let f = BufWriter::new(fs::File::create(dir.join(VIEWS_FILE))?);
    write_views(f, &tuned.views, schema)?;
    fs::write(dir.join(SELECTION_TEXT), tuned.report.to_text())?;
    let json = serde_json::to_string_pretty(&tuned.report)
        .map_err(|e| Error::Invariant(format!("selection report: {e}")))?;
    fs::write(dir.join(SELECTION_JSON), json)?;
    Ok(())
}

/// Loads a saved tree and views. `None` when the directory has no layout.
pub fn load_artifacts(dir: &Path, schema: &Schema) -> Result<Option<(PartitionTree, ViewStore)>> {
    let layout = dir.join(LAYOUT_FILE);
    if !layout.exists() {
        return Ok(None);
    }
    let tree = PartitionTree::from_text(&fs::read_to_string(layout)?, schema)?;
    let views_path = dir.join(VIEWS_FILE);
    let views = if views_path.exists() {
        read_views(BufReader::new(fs::File::open(views_path)?), schema)?
    } else {
        ViewStore::default()
    };
    Ok(Some((tree, views)))
}
