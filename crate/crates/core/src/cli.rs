//! Command-line front end. Every flag can also be set through an
//! environment variable with the `SHARECUT_` prefix.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::bench::{bench_csv, run_grid, Grid, Scale};
use crate::calibrate::calibrate;
use crate::config::{Budget, EngineConfig, ReuseMode, Solver};
use crate::error::{Error, Result};
use crate::executor::{execute_batch, execute_batch_into, results_csv, BatchMetrics};
use crate::materializer::{build_instance, build_workload_graph, ViewStore};
use crate::oracle::{optimal_selection, qat_batch};
use crate::storage::snapshot::{read_database, write_database};
use crate::storage::{generate_database, Database, PartitionTree};
use crate::tuner::{cut_limits, derive_layout, load_artifacts, save_artifacts, solve, tune};
use crate::workload::{enumerate_subqueries, parse_workload_with, Workload};

pub const DATA_FILE: &str = "data.scdb";
pub const METRICS_FILE: &str = "metrics.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const RESULTS_FILE: &str = "results.csv";
pub const BENCH_FILE: &str = "bench.csv";
pub const CALIBRATION_FILE: &str = "calibration.txt";

#[derive(Parser, Debug)]
#[command(name = "sharecut", version, about = "Shared execution of analytical query batches with partition-aware view reuse")]
pub struct Cli {
    #[command(flatten)]
    pub opts: Opts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Opts {
    /// Workload file (schema, templates and batches).
    #[arg(long, global = true, env = "SHARECUT_WORKLOAD")]
    pub workload: Option<PathBuf>,
    /// Seed for data generation and sampling.
    #[arg(long, global = true, env = "SHARECUT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// View storage budget: bytes, or a percentage of full coverage ("40%").
    #[arg(long, global = true, env = "SHARECUT_BUDGET", default_value = "100%")]
    pub budget: Budget,
    /// Cut selection algorithm: gr or isk.
    #[arg(long, global = true, env = "SHARECUT_SOLVER", default_value = "gr")]
    pub solver: Solver,
    /// Minimum rows per partition.
    #[arg(long, global = true, env = "SHARECUT_PSMIN", default_value_t = 1 << 16)]
    pub psmin: usize,
    /// Fact-row sample rate for access tracking.
    #[arg(long, global = true, env = "SHARECUT_SAMPLE_RATE", default_value_t = 0.01)]
    pub sample_rate: f64,
    /// Minimum average rows per block.
    #[arg(long, global = true, env = "SHARECUT_BLOCK_MIN", default_value_t = 256)]
    pub block_min: usize,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "SHARECUT_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Disable zone-map skipping.
    #[arg(long, global = true, env = "SHARECUT_NO_SKIP")]
    pub no_skip: bool,
    /// Ignore materialized views at run time.
    #[arg(long, global = true, env = "SHARECUT_NO_REUSE", conflicts_with = "naive_reuse")]
    pub no_reuse: bool,
    /// Inject every usable view without the benefit test or view skipping.
    #[arg(long, global = true, env = "SHARECUT_NAIVE_REUSE")]
    pub naive_reuse: bool,
    /// Keep the fact table in a single partition.
    #[arg(long, global = true, env = "SHARECUT_NO_PARTITION")]
    pub no_partition: bool,
    /// Directory for data, artifacts and reports.
    #[arg(long, global = true, env = "SHARECUT_OUT", default_value = "sharecut-out")]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the database declared by the workload schema.
    Generate,
    /// Partition, select and materialize views for the tuning batches.
    Tune,
    /// Execute the runtime batches and write metrics.
    Run,
    /// Time the experiment grids.
    Bench(BenchArgs),
    /// Fit the cost constants to measured runs.
    Calibrate(CalibrateArgs),
    /// Check execution against query-at-a-time evaluation and the selection
    /// against exhaustive search.
    Oracle,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// filters, joins, selectivity, budget, miss or all.
    #[arg(long, default_value = "all")]
    pub grid: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub rows: usize,
    #[arg(long, default_value_t = 16)]
    pub per_template: usize,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[arg(long, default_value_t = 500_000)]
    pub rows: usize,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
}

impl Opts {
    pub fn engine_config(&self) -> Result<EngineConfig> {
        let d = EngineConfig::default();
        let cfg = EngineConfig {
            ps_min: self.psmin,
            sample_rate: self.sample_rate,
            block_min_rows: self.block_min,
            block_max_rows: d.block_max_rows.max(self.block_min),
            threads: self.threads,
            skipping: !self.no_skip,
            reuse: if self.no_reuse {
                ReuseMode::Off
            } else if self.naive_reuse {
                ReuseMode::Naive
            } else {
                ReuseMode::Optimized
            },
            partitioning: !self.no_partition,
            solver: self.solver,
            seed: self.seed,
            ..d
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn load_workload(&self, cfg: &EngineConfig) -> Result<Workload> {
        let path = self
            .workload
            .as_ref()
            .ok_or_else(|| Error::config("--workload is required for this command"))?;
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read workload {}: {e}", path.display())))?;
        parse_workload_with(&text, cfg.queryset_width)
    }
}

/// Loads the snapshot in `out` if present, otherwise generates the data.
fn load_or_generate(w: &Workload, opts: &Opts) -> Result<Database> {
    let path = opts.out.join(DATA_FILE);
    if path.exists() {
        read_database(BufReader::new(fs::File::open(&path)?), &w.schema)
    } else {
        generate_database(&w.schema, opts.seed)
    }
}

fn cmd_generate(opts: &Opts) -> Result<String> {
    let cfg = opts.engine_config()?;
    let w = opts.load_workload(&cfg)?;
    let db = generate_database(&w.schema, opts.seed)?;
    fs::create_dir_all(&opts.out)?;
    let path = opts.out.join(DATA_FILE);
    write_database(BufWriter::new(fs::File::create(&path)?), &db)?;
    Ok(format!(
        "generated {} fact rows and {} dimensions into {}\n",
        db.fact.rows,
        db.dims.len(),
        path.display()
    ))
}

fn cmd_tune(opts: &Opts) -> Result<String> {
    let cfg = opts.engine_config()?;
    let w = opts.load_workload(&cfg)?;
    let db = load_or_generate(&w, opts)?;
    let tuned = tune(&db, &w.tuning, opts.budget, &cfg)?;
    save_artifacts(&opts.out, &tuned)?;
    Ok(format!(
        "partitions={} views={} view_bytes={} budget={:.0}\n{}",
        tuned.layout.partitions.len(),
        tuned.views.views.len(),
        tuned.views.bytes(),
        tuned.report.budget_limit,
        tuned.report.to_text()
    ))
}

/// Rebuilds the tuned layout and views, or a single-partition layout without
/// views when `out` holds no tuning artifacts.
fn prepared_state(
    w: &Workload,
    opts: &Opts,
    cfg: &EngineConfig,
    warnings: &mut Vec<String>,
) -> Result<(Database, crate::storage::Layout, ViewStore)> {
    let db = load_or_generate(w, opts)?;
    let (tree, views) = match load_artifacts(&opts.out, &db.schema)? {
        Some(a) => a,
        None => {
            warnings.push(format!(
                "no tuning artifacts in {}; running with work sharing only",
                opts.out.display()
            ));
            (PartitionTree::single(), ViewStore::default())
        }
    };
    let (db, layout) = derive_layout(&db, tree, &w.tuning, cfg)?;
    views.check_alignment(&layout.partitions)?;
    Ok((db, layout, views))
}

fn runtime_batches(w: &Workload) -> &[crate::workload::Batch] {
    if w.runtime.is_empty() {
        &w.tuning
    } else {
        &w.runtime
    }
}

fn cmd_run(opts: &Opts, warnings: &mut Vec<String>) -> Result<String> {
    let cfg = opts.engine_config()?;
    let w = opts.load_workload(&cfg)?;
    let (db, layout, views) = prepared_state(&w, opts, &cfg, warnings)?;
    fs::create_dir_all(&opts.out)?;
    let mut csv = BatchMetrics::csv_header();
    let mut results = String::new();
    let mut all = Vec::new();
    let batches = runtime_batches(&w);
    let mut failure = None;
    for batch in batches {
        let mut m = BatchMetrics::default();
        match execute_batch_into(&db, &layout, &views, batch, &cfg, &mut m) {
            Ok(r) => {
                let text = results_csv(batch, &r);
                if results.is_empty() {
                    results.push_str(&text);
                } else {
                    results.extend(text.lines().skip(1).map(|l| format!("{l}\n")));
                }
            }
            Err(e) => failure = Some(e),
        }
        csv.push_str(&m.csv_row());
        all.push(m);
        if failure.is_some() {
            break;
        }
    }
    fs::write(opts.out.join(METRICS_FILE), &csv)?;
    let json = serde_json::to_string_pretty(&all).map_err(|e| Error::Invariant(format!("metrics: {e}")))?;
    fs::write(opts.out.join(METRICS_JSON), json)?;
    if let Some(e) = failure {
        return Err(e);
    }
    fs::write(opts.out.join(RESULTS_FILE), results)?;
    Ok(csv)
}

fn cmd_bench(opts: &Opts, args: &BenchArgs) -> Result<String> {
    let cfg = opts.engine_config()?;
    let grids: Vec<Grid> = if args.grid == "all" {
        vec![Grid::Filters, Grid::Joins, Grid::Selectivity, Grid::Budget, Grid::Miss]
    } else {
        vec![args.grid.parse()?]
    };
    let scale = Scale {
        rows: args.rows,
        queries_per_template: args.per_template,
        reps: args.reps,
        seed: opts.seed,
    };
    let mut rows = Vec::new();
    for g in grids {
        rows.extend(run_grid(g, scale, &cfg)?);
    }
    let csv = bench_csv(&rows);
    fs::create_dir_all(&opts.out)?;
    fs::write(opts.out.join(BENCH_FILE), &csv)?;
    Ok(csv)
}

fn cmd_calibrate(opts: &Opts, args: &CalibrateArgs) -> Result<String> {
    let cfg = opts.engine_config()?;
    let c = calibrate(args.rows, args.reps, &cfg)?;
    let text = c.to_text();
    fs::create_dir_all(&opts.out)?;
    fs::write(opts.out.join(CALIBRATION_FILE), &text)?;
    Ok(text)
}

/// Largest instance the exhaustive selection check is attempted on.
const ORACLE_MAX_CUTS: usize = 16;

fn cmd_oracle(opts: &Opts, warnings: &mut Vec<String>) -> Result<String> {
    let cfg = opts.engine_config()?;
    let w = opts.load_workload(&cfg)?;
    let raw = load_or_generate(&w, opts)?;
    let (db, layout, views) = prepared_state(&w, opts, &cfg, warnings)?;
    let mut out = String::new();
    let mut mismatches = 0;
    for batch in runtime_batches(&w) {
        let expected = qat_batch(&raw, batch);
        let got = execute_batch(&db, &layout, &views, batch, &cfg)?.results;
        let bad = expected.iter().zip(&got).filter(|(a, b)| a != b).count();
        mismatches += bad;
        out.push_str(&format!(
            "exactness batch={} queries={} mismatched={}\n",
            batch.name,
            batch.len(),
            bad
        ));
    }
    let catalog = enumerate_subqueries(&w.tuning);
    let graph = build_workload_graph(&db, &layout, &w.tuning, &catalog, &cfg)?;
    let gi = build_instance(&graph, cut_limits(&cfg));
    let limit = opts.budget.resolve(graph.full_coverage_bytes());
    if gi.instance.cuts.len() <= ORACLE_MAX_CUTS {
        let (best, _) = optimal_selection(&gi.instance, limit);
        let sel = solve(&gi, limit, &cfg);
        out.push_str(&format!(
            "selection cuts={} solver_reduction={:.3} optimal_reduction={:.3}\n",
            gi.instance.cuts.len(),
            sel.reduction,
            best
        ));
    } else {
        out.push_str(&format!(
            "selection cuts={} exhaustive check skipped (more than {ORACLE_MAX_CUTS} cuts)\n",
            gi.instance.cuts.len()
        ));
    }
    if mismatches > 0 {
        return Err(Error::Invariant(format!(
            "{mismatches} queries differ from query-at-a-time evaluation\n{out}"
        )));
    }
    Ok(out)
}

/// Output of one invocation: stdout text, warnings for stderr, exit code.
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

pub fn run_cli(cli: &Cli) -> Outcome {
    let mut warnings = Vec::new();
    let result = match &cli.command {
        Command::Generate => cmd_generate(&cli.opts),
        Command::Tune => cmd_tune(&cli.opts),
        Command::Run => cmd_run(&cli.opts, &mut warnings),
        Command::Bench(a) => cmd_bench(&cli.opts, a),
        Command::Calibrate(a) => cmd_calibrate(&cli.opts, a),
        Command::Oracle => cmd_oracle(&cli.opts, &mut warnings),
    };
    let mut stderr: String = warnings.iter().map(|w| format!("warning: {w}\n")).collect();
    match result {
        Ok(stdout) => Outcome {
            stdout,
            stderr,
            code: 0,
        },
        Err(e) => {
            stderr.push_str(&format!("error: {e}\n"));
            Outcome {
                stdout: String::new(),
                stderr,
                code: e.exit_code(),
            }
        }
    }
}

/// Parses `args` and runs the command; clap usage errors exit with code 2.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let o = run_cli(&cli);
    print!("{}", o.stdout);
    eprint!("{}", o.stderr);
    o.code
}
