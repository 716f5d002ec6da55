//! Per-batch execution metrics and their CSV form.

use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::globalplan::ExecCounters;

pub const METRICS_HEADER: &str = "# sharecut-metrics v1";

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BatchMetrics {
    pub batch: String,
    pub queries: usize,
    pub wall_ns: u64,
    pub dimstate_ns: u64,
    pub exec_ns: u64,
    pub partitions: u64,
    pub partitions_run: u64,
    pub blocks: u64,
    pub scanned_blocks: u64,
    pub skipped_blocks: u64,
    pub skipped_filters: u64,
    pub filter_evals: u64,
    pub probe_tuples: u64,
    pub agg_updates: u64,
    /// Rows read from the fact table.
    pub base_rows: u64,
    /// Rows read from materialized views.
    pub view_rows: u64,
    pub views_used: u64,
    pub miss_rate: f64,
    pub est_baseline_cost: f64,
    pub est_cost: f64,
    /// Truncated SHA-256 over the results, for cheap diffing between runs.
    pub results_digest: String,
}

const COLUMNS: &[&str] = &[
    "batch",
    "queries",
    "wall_ns",
    "dimstate_ns",
    "exec_ns",
    "partitions",
    "partitions_run",
    "blocks",
    "scanned_blocks",
    "skipped_blocks",
    "skipped_filters",
    "filter_evals",
    "probe_tuples",
    "agg_updates",
    "scan_rows",
    "base_rows",
    "view_rows",
    "views_used",
    "miss_rate",
    "est_baseline_cost",
    "est_cost",
    "results_digest",
];

impl BatchMetrics {
    pub fn new(batch: &str, queries: usize) -> Self {
        BatchMetrics {
            batch: batch.to_string(),
            queries,
            ..Default::default()
        }
    }

    pub fn scan_rows(&self) -> u64 {
        self.base_rows + self.view_rows
    }

    pub(crate) fn record(&mut self, c: &ExecCounters) {
        self.scanned_blocks += c.scanned_blocks;
        self.skipped_blocks += c.skipped_blocks;
        self.filter_evals += c.filter_evals;
        self.probe_tuples += c.probe_tuples;
        self.agg_updates += c.agg_updates;
        self.base_rows += c.base_rows;
        self.view_rows += c.view_rows;
        let total = self.base_rows + self.view_rows;
        self.miss_rate = if total == 0 {
            0.0
        } else {
            self.base_rows as f64 / total as f64
        };
    }

    pub(crate) fn set_results(&mut self, results: &[Vec<i64>]) {
        self.results_digest = results_digest(results);
    }

    pub fn csv_header() -> String {
        format!("{METRICS_HEADER}\n{}\n", COLUMNS.join(","))
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.6},{:.3},{:.3},{}\n",
            self.batch,
            self.queries,
            self.wall_ns,
            self.dimstate_ns,
            self.exec_ns,
            self.partitions,
            self.partitions_run,
            self.blocks,
            self.scanned_blocks,
            self.skipped_blocks,
            self.skipped_filters,
            self.filter_evals,
            self.probe_tuples,
            self.agg_updates,
            self.scan_rows(),
            self.base_rows,
            self.view_rows,
            self.views_used,
            self.miss_rate,
            self.est_baseline_cost,
            self.est_cost,
            self.results_digest,
        )
    }
}

pub fn results_digest(results: &[Vec<i64>]) -> String {
    let mut h = Sha256::new();
    for (q, r) in results.iter().enumerate() {
        h.update((q as u64).to_le_bytes());
        h.update((r.len() as u64).to_le_bytes());
        for v in r {
            h.update(v.to_le_bytes());
        }
    }
    let d = h.finalize();
    d[..8].iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Results as `batch,query,name,group,sum` lines; groups with a zero sum are
/// omitted.
pub fn results_csv(batch: &crate::workload::Batch, results: &[Vec<i64>]) -> String {
    let mut out = String::from("batch,query,name,group,sum\n");
    for (q, r) in results.iter().enumerate() {
        let name = &batch.queries[q].name;
        for (g, v) in r.iter().enumerate() {
            if *v != 0 || r.len() == 1 {
                let _ = writeln!(out, "{},{q},{name},{g},{v}", batch.name);
            }
        }
    }
    out
}
