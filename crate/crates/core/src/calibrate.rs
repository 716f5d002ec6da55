//! Least-squares fit of the per-tuple cost constants to measured runs.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::{CostModel, EngineConfig, ReuseMode};
use crate::error::{Error, Result};
use crate::executor::BatchMetrics;
use crate::materializer::ViewStore;
use crate::partitioner::default_layout;
use crate::storage::generate_database;
use crate::workload::parse_workload;

/// One observation: counters of a run and its wall time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub scan_rows: f64,
    pub filter_evals: f64,
    pub probe_tuples: f64,
    pub agg_updates: f64,
    pub wall_ns: f64,
}

impl Sample {
    pub fn from_metrics(m: &BatchMetrics, wall_ns: u64) -> Self {
        Sample {
            scan_rows: m.scan_rows() as f64,
            filter_evals: m.filter_evals as f64,
            probe_tuples: m.probe_tuples as f64,
            agg_updates: m.agg_updates as f64,
            wall_ns: wall_ns as f64,
        }
    }

    fn features(&self) -> [f64; 4] {
        [self.scan_rows, self.filter_evals, self.probe_tuples, self.agg_updates]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Calibration {
    /// Fitted nanoseconds per scanned row, filter evaluation, probe and
    /// aggregate update.
    pub ns_per_op: [f64; 4],
    /// Constants relative to one scanned row; `c_f` and the exponent are
    /// carried over from the input model.
    pub model: CostModel,
    /// Root-mean-square relative error of the fit.
    pub rms_relative_error: f64,
    pub samples: Vec<Sample>,
}

/// Solves min ‖A c − t‖ over the samples.
pub fn fit(samples: &[Sample]) -> Result<[f64; 4]> {
    if samples.len() < 4 {
        return Err(Error::config(format!("calibration needs at least 4 samples, got {}", samples.len())));
    }
    let a = DMatrix::from_fn(samples.len(), 4, |r, c| samples[r].features()[c]);
    let t = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.wall_ns));
    let svd = a.svd(true, true);
    let c = svd
        .solve(&t, 1e-9)
        .map_err(|e| Error::Invariant(format!("least squares: {e}")))?;
    Ok([c[0], c[1], c[2], c[3]])
}

fn rms_relative(samples: &[Sample], c: &[f64; 4]) -> f64 {
    let sq: f64 = samples
        .iter()
        .map(|s| {
            let pred: f64 = s.features().iter().zip(c).map(|(x, k)| x * k).sum();
            ((pred - s.wall_ns) / s.wall_ns.max(1.0)).powi(2)
        })
        .sum();
    (sq / samples.len() as f64).sqrt()
}

/// Turns fitted ns-per-op into constants relative to a scanned row. Fits
/// that come out non-positive keep the input model's value for that term.
pub fn to_model(ns: &[f64; 4], base: &CostModel) -> CostModel {
    let defaults = [base.c_scan, base.c_filter, base.c_probe, base.c_agg];
    let unit = if ns[0] > 0.0 { ns[0] } else { 1.0 };
    let rel: Vec<f64> = ns
        .iter()
        .zip(defaults)
        .map(|(v, d)| if *v > 0.0 { v / unit } else { d })
        .collect();
    CostModel {
        c_scan: if ns[0] > 0.0 { 1.0 } else { base.c_scan },
        c_filter: rel[1],
        c_probe: rel[2],
        c_agg: rel[3],
        ..*base
    }
}

fn design(rows: usize, queries: usize, joins: usize, filter_width: Option<i64>, seed: u64) -> String {
    let mut s = format!(
        "schema\n  fact f rows={rows}\n  column f.v domain=0..1000\n  column f.w domain=0..1000\n"
    );
    for d in 0..3 {
        let _ = writeln!(s, "  dimension d{d} rows=1000 key=fk_d{d}\n  column d{d}.a domain=0..100");
    }
    s.push_str("end\ntemplate t\n");
    if joins > 0 {
        let names: Vec<String> = (0..joins).map(|d| format!("d{d}")).collect();
        let _ = writeln!(s, "  join {}", names.join(","));
    }
    if let Some(w) = filter_width {
        let _ = writeln!(s, "  filter f.w width={w} within=0..1000 step=1");
    }
    let _ = write!(s, "  sum f.v\nend\nbatch b run seed={seed}\n  use t count={queries}\nend\n");
    s
}

/// Runs a fixed set of designs that vary scan, filter, probe and aggregation
/// work independently and fits the constants to their wall times.
pub fn calibrate(rows: usize, reps: usize, cfg: &EngineConfig) -> Result<Calibration> {
    let run_cfg = EngineConfig {
        reuse: ReuseMode::Off,
        skipping: false,
        ..cfg.clone()
    };
    let mut samples = Vec::new();
    let mut db = None;
    for (queries, joins, width) in [
        (1, 0, None),
        (8, 0, None),
        (32, 0, None),
        (8, 0, Some(100)),
        (32, 0, Some(50)),
        (64, 0, Some(10)),
        (8, 1, None),
        (8, 3, None),
        (32, 2, Some(200)),
        (16, 3, Some(500)),
        (64, 1, Some(20)),
        (4, 2, None),
    ] {
        let w = parse_workload(&design(rows, queries, joins, width, cfg.seed))?;
        if db.is_none() {
            db = Some(generate_database(&w.schema, cfg.seed)?);
        }
        let db = db.as_ref().expect("generated");
        let layout = default_layout(db, cfg.block_max_rows)?;
        let batch = &w.runtime[0];
        let (median, _, metrics, _) =
            crate::bench::measure(db, &layout, &ViewStore::default(), batch, &run_cfg, reps)?;
        samples.push(Sample::from_metrics(&metrics, median));
    }
    let ns = fit(&samples)?;
    Ok(Calibration {
        ns_per_op: ns,
        model: to_model(&ns, &cfg.cost),
        rms_relative_error: rms_relative(&samples, &ns),
        samples,
    })
}

impl Calibration {
    pub fn to_text(&self) -> String {
        let m = &self.model;
        format!(
            "ns_per_op scan={:.4} filter={:.4} probe={:.4} agg={:.4}\nmodel c_scan={:.3} c_filter={:.3} c_probe={:.3} c_agg={:.3} c_f={:.3} filter_exponent={:.3}\nrms_relative_error={:.4} samples={}\n",
            self.ns_per_op[0],
            self.ns_per_op[1],
            self.ns_per_op[2],
            self.ns_per_op[3],
            m.c_scan,
            m.c_filter,
            m.c_probe,
            m.c_agg,
            m.c_f,
            m.filter_exponent,
            self.rms_relative_error,
            self.samples.len()
        )
    }
}
