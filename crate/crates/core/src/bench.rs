//! Experiment grids: generated workloads, timed under the work-sharing
//! baseline, naive reuse and the full engine.

use std::fmt::Write as _;

use serde::Serialize;

use crate::config::{Budget, EngineConfig, ReuseMode};
use crate::error::{Error, Result};
use crate::executor::{execute_batch, BatchMetrics};
use crate::materializer::{build_workload_graph, ViewStore};
use crate::storage::{generate_database, Database, Layout};
use crate::tuner::{derive_layout, plan_partitions, tune};
use crate::workload::{enumerate_subqueries, parse_workload, Batch, Workload};

pub const BENCH_HEADER: &str = "# sharecut-bench v1";

/// Dimensions joined by every template in the star workloads.
const SHARED_DIMS: usize = 3;
/// Templates (and private dimensions) in the star workloads.
const STAR_TEMPLATES: usize = 4;
/// Filterable attributes per private dimension.
const DIM_ATTRS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Grid {
    Filters,
    Joins,
    Selectivity,
    Budget,
    Miss,
}

impl std::str::FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "filters" => Ok(Grid::Filters),
            "joins" => Ok(Grid::Joins),
            "selectivity" => Ok(Grid::Selectivity),
            "budget" => Ok(Grid::Budget),
            "miss" => Ok(Grid::Miss),
            other => Err(Error::config(format!(
                "unknown grid `{other}` (filters|joins|selectivity|budget|miss)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum System {
    /// Shared execution without views.
    Sharing,
    /// Every usable view injected, filters evaluated row by row.
    Naive,
    /// Cost-based reuse with view skipping.
    Full,
}

impl System {
    pub fn name(self) -> &'static str {
        match self {
            System::Sharing => "sharing",
            System::Naive => "naive",
            System::Full => "full",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Scale {
    pub rows: usize,
    pub queries_per_template: usize,
    pub reps: usize,
    pub seed: u64,
}

impl Default for Scale {
    fn default() -> Self {
        Scale {
            rows: 1_000_000,
            queries_per_template: 16,
            reps: 3,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Measurement {
    pub grid: Grid,
    pub param: f64,
    pub system: System,
    pub median_wall_ns: u64,
    pub min_wall_ns: u64,
    pub metrics: BatchMetrics,
}

fn star_schema(rows: usize) -> String {
    let mut s = String::from("schema\n");
    let _ = writeln!(s, "  fact lo rows={rows}");
    s.push_str("  column lo.revenue domain=0..1000\n");
    for i in 0..SHARED_DIMS {
        let _ = writeln!(s, "  dimension s{i} rows=1000 key=fk_s{i}");
        let _ = writeln!(s, "  column s{i}.v domain=0..100");
    }
    for i in 0..STAR_TEMPLATES {
        let _ = writeln!(s, "  dimension f{i} rows=100 key=fk_f{i}");
        for a in 0..DIM_ATTRS {
            let _ = writeln!(s, "  column f{i}.a{a} domain=0..100");
        }
    }
    s.push_str("end\n");
    s
}

/// Width of each of `filters` independent filters on a 0..100 domain so
/// that their conjunction selects `selectivity`.
fn filter_width(filters: usize, selectivity: f64) -> i64 {
    ((100.0 * selectivity.powf(1.0 / filters as f64)).round() as i64).clamp(1, 100)
}

fn batch_block(s: &mut String, name: &str, kind: &str, seed: u64, uses: &[String]) {
    let _ = writeln!(s, "batch {name} {kind} seed={seed}");
    for u in uses {
        let _ = writeln!(s, "  {u}");
    }
    s.push_str("end\n");
}

/// Star workload: each template joins `shared` common dimensions plus its own
/// dimension, filtered on `filters` attributes with joint `selectivity`.
/// The runtime batch repeats the tuning batch.
pub fn star_workload(
    rows: usize,
    shared: usize,
    filters: usize,
    selectivity: f64,
    per_template: usize,
    seed: u64,
) -> String {
    assert!(shared <= SHARED_DIMS && (1..=DIM_ATTRS).contains(&filters));
    let mut s = star_schema(rows);
    let width = filter_width(filters, selectivity);
    let mut uses = Vec::new();
    for t in 0..STAR_TEMPLATES {
        let mut joins: Vec<String> = (0..shared).map(|i| format!("s{i}")).collect();
        joins.push(format!("f{t}"));
        let _ = writeln!(s, "template t{t}\n  join {}", joins.join(","));
        for a in 0..filters {
            let _ = writeln!(s, "  filter f{t}.a{a} width={width} within=0..100 step=1");
        }
        s.push_str("  sum lo.revenue\nend\n");
        uses.push(format!("use t{t} count={per_template}"));
    }
    batch_block(&mut s, "history", "tune", seed, &uses);
    batch_block(&mut s, "current", "run", seed, &uses);
    s
}

fn banded_schema(rows: usize, day_hi: i64, dims: &[String]) -> String {
    let mut s = String::from("schema\n");
    let _ = writeln!(s, "  fact lo rows={rows}");
    s.push_str("  column lo.revenue domain=0..1000\n");
    let _ = writeln!(s, "  column lo.day domain=0..{day_hi}");
    for d in dims {
        let _ = writeln!(s, "  dimension {d} rows=500 key=fk_{d}");
        let _ = writeln!(s, "  column {d}.v domain=0..100");
    }
    s.push_str("end\n");
    s
}

/// Eight four-join templates in pairs that share two joins, each pair
/// filtering its own band of `lo.day`: overlapping bands of width 40 that
/// start at 0, 20, 40 and 60.
pub fn banded_workload(rows: usize, per_template: usize, seed: u64) -> String {
    let dims: Vec<String> = ["s", "x", "y"]
        .iter()
        .flat_map(|p| (0..4).map(move |i| format!("{p}{i}")))
        .collect();
    let mut s = banded_schema(rows, 100, &dims);
    // (template, private dimension prefix, band start)
    let layout: [(usize, &str, i64); 8] = [
        (0, "x", 0),
        (1, "x", 0),
        (0, "y", 20),
        (2, "y", 20),
        (2, "x", 40),
        (3, "x", 40),
        (1, "y", 60),
        (3, "y", 60),
    ];
    let mut uses = Vec::new();
    for (t, (j, private, band)) in layout.iter().enumerate() {
        let k = (j + 1) % 4;
        let _ = writeln!(
            s,
            "template t{t}\n  join s{j},s{k},{private}{j},{private}{k}\n  filter lo.day width=10 within={band}..{} step=1\n  sum lo.revenue\nend",
            band + 40
        );
        uses.push(format!("use t{t} count={per_template}"));
    }
    batch_block(&mut s, "history", "tune", seed, &uses);
    batch_block(&mut s, "current", "run", seed, &uses);
    s
}

/// Four two-join template groups on disjoint bands of `lo.day`, with
/// predicates on a 5-day grid. The runtime batch slides every band up by
/// `slide` of its width, moving that share of the input to data the group
/// has no views for.
pub fn miss_workload(rows: usize, per_template: usize, slide: f64, seed: u64) -> String {
    assert!((0.0..=1.0).contains(&slide));
    let dims: Vec<String> = (0..8).map(|i| format!("d{i}")).collect();
    let (band, grid) = (20i64, 5i64);
    let mut s = banded_schema(rows, band * 5, &dims);
    let mut tune_uses = Vec::new();
    let mut run_uses = Vec::new();
    let shift = ((slide * band as f64 / grid as f64).round() as i64) * grid;
    for g in 0..4i64 {
        let lo = g * band;
        let _ = writeln!(
            s,
            "template g{g}\n  join d{},d{}\n  filter lo.day width={grid} within={lo}..{} step={grid}\n  sum lo.revenue\nend",
            2 * g,
            2 * g + 1,
            lo + band
        );
        tune_uses.push(format!("use g{g} count={per_template}"));
        run_uses.push(format!("use g{g} count={per_template} shift={shift}"));
    }
    batch_block(&mut s, "history", "tune", seed, &tune_uses);
    batch_block(&mut s, "current", "run", seed, &run_uses);
    s
}

/// How strongly each template's fact predicate is tied to a region of the
/// fact table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Correlation {
    /// Each template filters its own quarter of `lo.day`.
    Correlated,
    /// Template windows overlap their neighbours by half.
    Semi,
    /// Every template draws from the whole domain.
    Uncorrelated,
}

/// Mixed workload over four templates with fact and dimension filters,
/// grouping and 1 to 3 joins. `selectivity` sets the width of the fact
/// predicate; the runtime batch slides every fact window by `slide` of the
/// template's window.
pub fn mixed_workload(
    rows: usize,
    corr: Correlation,
    selectivity: f64,
    queries: usize,
    slide: f64,
    seed: u64,
) -> String {
    let mut s = format!("schema\n  fact lo rows={rows}\n  column lo.revenue domain=0..1000\n  column lo.qty domain=0..50\n  column lo.day domain=0..200\n");
    for (d, n, cols) in [("c", 500, &["region:10", "seg:5"][..]), ("s", 200, &["nation:25"][..]), ("p", 800, &["cat:40"][..])] {
        let _ = writeln!(s, "  dimension {d} rows={n} key=fk_{d}");
        for c in cols {
            let (name, hi) = c.split_once(':').expect("name:hi");
            let _ = writeln!(s, "  column {d}.{name} domain=0..{hi}");
        }
    }
    s.push_str("end\n");
    let width = ((selectivity * 100.0).round() as i64).clamp(1, 100);
    let templates: [(&str, Option<(&str, i64)>, &str, Option<&str>); 4] = [
        ("c", Some(("c.region", 5)), "revenue", Some("qty")),
        ("c,s", Some(("s.nation", 12)), "revenue", None),
        ("s,p", Some(("p.cat", 20)), "qty", None),
        ("c,s,p", None, "revenue", None),
    ];
    let per = queries / templates.len();
    let extra = queries % templates.len();
    let mut tune_uses = Vec::new();
    let mut run_uses = Vec::new();
    for (t, (joins, dim_filter, sum, group)) in templates.iter().enumerate() {
        let t64 = t as i64;
        let (lo, span) = match corr {
            Correlation::Correlated => (25 * t64, 25),
            Correlation::Semi => (16 * t64, 50),
            Correlation::Uncorrelated => (0, 100),
        };
        let span = span.max(width);
        let shift = (slide * span as f64).round() as i64;
        for (prefix, off) in [("t", 0), ("r", shift)] {
            let _ = writeln!(s, "template {prefix}{t}\n  join {joins}");
            let _ = writeln!(
                s,
                "  filter lo.day width={width} within={}..{} step=1",
                lo + off,
                lo + off + span
            );
            if let Some((col, w)) = dim_filter {
                let _ = writeln!(s, "  filter {col} width={w} step=1");
            }
            let _ = writeln!(s, "  sum lo.{sum}");
            if let Some(g) = group {
                let _ = writeln!(s, "  group lo.{g}");
            }
            s.push_str("end\n");
        }
        let count = per + usize::from(t < extra);
        if count > 0 {
            tune_uses.push(format!("use t{t} count={count}"));
            run_uses.push(format!("use r{t} count={count}"));
        }
    }
    batch_block(&mut s, "history", "tune", seed, &tune_uses);
    batch_block(&mut s, "current", "run", seed, &run_uses);
    s
}

fn system_config(base: &EngineConfig, system: System) -> EngineConfig {
    EngineConfig {
        reuse: match system {
            System::Sharing => ReuseMode::Off,
            System::Naive => ReuseMode::Naive,
            System::Full => ReuseMode::Optimized,
        },
        ..base.clone()
    }
}

/// Runs `batch` `reps` times; returns the median and minimum wall time and
/// the metrics of the last run.
pub fn measure(
    db: &Database,
    layout: &Layout,
    views: &ViewStore,
    batch: &Batch,
    cfg: &EngineConfig,
    reps: usize,
) -> Result<(u64, u64, BatchMetrics, Vec<Vec<i64>>)> {
    let mut walls = Vec::with_capacity(reps.max(1));
    let mut last = None;
    for _ in 0..reps.max(1) {
        let out = execute_batch(db, layout, views, batch, cfg)?;
        walls.push(out.metrics.wall_ns);
        last = Some(out);
    }
    walls.sort_unstable();
    let out = last.expect("at least one run");
    Ok((walls[walls.len() / 2], walls[0], out.metrics, out.results))
}

struct Prepared {
    db: Database,
    layout: Layout,
    views: ViewStore,
    run: Batch,
}

fn prepare(w: &Workload, db: &Database, budget: Budget, cfg: &EngineConfig) -> Result<Prepared> {
    let tuned = tune(db, &w.tuning, budget, cfg)?;
    let run = w
        .runtime
        .first()
        .cloned()
        .ok_or_else(|| Error::config("workload has no runtime batch"))?;
    Ok(Prepared {
        db: tuned.db,
        layout: tuned.layout,
        views: tuned.views,
        run,
    })
}

fn time_systems(
    grid: Grid,
    param: f64,
    p: &Prepared,
    systems: &[System],
    cfg: &EngineConfig,
    reps: usize,
    out: &mut Vec<Measurement>,
) -> Result<()> {
    let empty = ViewStore::default();
    let mut reference: Option<Vec<Vec<i64>>> = None;
    for &system in systems {
        let views = if system == System::Sharing { &empty } else { &p.views };
        let (median, min, metrics, results) =
            measure(&p.db, &p.layout, views, &p.run, &system_config(cfg, system), reps)?;
        match &reference {
            None => reference = Some(results),
            Some(r) if *r != results => {
                return Err(Error::Invariant(format!(
                    "{} results differ from {} in grid {grid:?} at {param}",
                    system.name(),
                    systems[0].name()
                )))
            }
            Some(_) => {}
        }
        out.push(Measurement {
            grid,
            param,
            system,
            median_wall_ns: median,
            min_wall_ns: min,
            metrics,
        });
    }
    Ok(())
}

const ALL_SYSTEMS: [System; 3] = [System::Sharing, System::Naive, System::Full];

/// Runs one grid. Each cell tunes with the given budget (full coverage for
/// the reuse grids) and times every system on the runtime batch.
pub fn run_grid(grid: Grid, scale: Scale, cfg: &EngineConfig) -> Result<Vec<Measurement>> {
    let mut out = Vec::new();
    let per = scale.queries_per_template;
    let star = |shared, filters, sel| star_workload(scale.rows, shared, filters, sel, per, scale.seed);
    match grid {
        Grid::Filters => {
            let cells: Vec<(f64, String)> = (1..=8).map(|f| (f as f64, star(SHARED_DIMS, f, 0.1))).collect();
            run_cells(grid, &cells, Budget::Fraction(1.0), &ALL_SYSTEMS, scale, cfg, &mut out)?;
        }
        Grid::Joins => {
            let cells: Vec<(f64, String)> =
                (0..=SHARED_DIMS).map(|s| ((s + 1) as f64, star(s, 1, 0.1))).collect();
            run_cells(grid, &cells, Budget::Fraction(1.0), &ALL_SYSTEMS, scale, cfg, &mut out)?;
        }
        Grid::Selectivity => {
            let cells: Vec<(f64, String)> = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5]
                .iter()
                .map(|s| (s * 100.0, star(SHARED_DIMS, 1, *s)))
                .collect();
            run_cells(grid, &cells, Budget::Fraction(1.0), &ALL_SYSTEMS, scale, cfg, &mut out)?;
        }
        Grid::Budget => {
            let w = parse_workload(&banded_workload(scale.rows, per, scale.seed))?;
            let db = generate_database(&w.schema, scale.seed)?;
            let needed = coverage_bytes(&db, &w.tuning, cfg)?;
            for pct in [0.0, 25.0, 50.0, 75.0, 100.0] {
                let p = prepare(&w, &db, Budget::Bytes(needed * pct / 100.0), cfg)?;
                time_systems(grid, pct, &p, &[System::Full], cfg, scale.reps, &mut out)?;
            }
        }
        Grid::Miss => {
            let cells: Vec<(f64, String)> = [0.0, 0.25, 0.5, 0.75, 1.0]
                .iter()
                .map(|m| (m * 100.0, miss_workload(scale.rows, per, *m, scale.seed)))
                .collect();
            run_cells(
                grid,
                &cells,
                Budget::Fraction(1.0),
                &[System::Sharing, System::Full],
                scale,
                cfg,
                &mut out,
            )?;
        }
    }
    Ok(out)
}

fn run_cells(
    grid: Grid,
    cells: &[(f64, String)],
    budget: Budget,
    systems: &[System],
    scale: Scale,
    cfg: &EngineConfig,
    out: &mut Vec<Measurement>,
) -> Result<()> {
    // All cells of a grid share one schema, so the data is generated once.
    let mut db: Option<Database> = None;
    for (param, text) in cells {
        let w = parse_workload(text)?;
        if db.is_none() {
            db = Some(generate_database(&w.schema, scale.seed)?);
        }
        let p = prepare(&w, db.as_ref().expect("generated"), budget, cfg)?;
        time_systems(grid, *param, &p, systems, cfg, scale.reps, out)?;
    }
    Ok(())
}

/// Bytes needed to store the result feeding every aggregate of `tuning`
/// under the layout `cfg` produces.
pub fn coverage_bytes(db: &Database, tuning: &[Batch], cfg: &EngineConfig) -> Result<f64> {
    let tree = plan_partitions(db, tuning, cfg)?;
    let (db, layout) = derive_layout(db, tree, tuning, cfg)?;
    let catalog = enumerate_subqueries(tuning);
    let graph = build_workload_graph(&db, &layout, tuning, &catalog, cfg)?;
    Ok(graph.producer_cover_bytes())
}

pub fn bench_csv(rows: &[Measurement]) -> String {
    let mut s = format!("{BENCH_HEADER}\ngrid,param,system,median_wall_ns,min_wall_ns,");
    let metric_cols = BatchMetrics::csv_header();
    s.push_str(metric_cols.lines().nth(1).unwrap_or(""));
    s.push('\n');
    for m in rows {
        let _ = write!(
            s,
            "{:?},{},{},{},{},{}",
            m.grid,
            m.param,
            m.system.name(),
            m.median_wall_ns,
            m.min_wall_ns,
            m.metrics.csv_row()
        );
    }
    s
}
