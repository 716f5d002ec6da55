use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-tuple abstract cost constants. Units are relative to one scanned row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub c_scan: f64,
    pub c_filter: f64,
    pub c_probe: f64,
    pub c_agg: f64,
    /// Cost per view row per ambivalent runtime filter.
    pub c_f: f64,
    /// Filter cost grows as `ambivalent_predicates ^ filter_exponent`.
    pub filter_exponent: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            c_scan: 1.0,
            c_filter: 2.0,
            c_probe: 10.0,
            c_agg: 2.0,
            c_f: 139.45,
            filter_exponent: 1.0,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        let all = [self.c_scan, self.c_filter, self.c_probe, self.c_agg, self.c_f];
        if all.iter().any(|c| !c.is_finite() || *c <= 0.0) {
            return Err(Error::config("cost constants must be finite and positive"));
        }
        if !self.filter_exponent.is_finite() || self.filter_exponent < 0.0 {
            return Err(Error::config("filter exponent must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Solver {
    Gr,
    Isk,
}

impl std::str::FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gr" => Ok(Solver::Gr),
            "isk" => Ok(Solver::Isk),
            other => Err(Error::config(format!("unknown solver `{other}` (gr|isk)"))),
        }
    }
}

/// How the executor treats materialized views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReuseMode {
    /// Pure work sharing; views are ignored.
    Off,
    /// Inject every usable view without a benefit test and without view skipping.
    Naive,
    /// Cost-based injection.
    Optimized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub queryset_width: usize,
    pub ps_min: usize,
    pub sample_rate: f64,
    pub block_min_rows: usize,
    pub block_max_rows: usize,
    pub vector_size: usize,
    /// The partitioner recurses only when the best split beats `threshold * H`.
    pub split_threshold: f64,
    pub max_cut_width: usize,
    pub max_cuts_per_component: usize,
    pub isk_iterations: usize,
    pub isk_seed_size: usize,
    /// Partial enumeration seeds are drawn from this many top cuts.
    pub isk_seed_pool: usize,
    pub materialize_slack: f64,
    /// Worker threads for partition execution; 0 means all cores.
    pub threads: usize,
    pub skipping: bool,
    pub reuse: ReuseMode,
    pub partitioning: bool,
    pub solver: Solver,
    pub cost: CostModel,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            queryset_width: 512,
            ps_min: 1 << 16,
            sample_rate: 0.01,
            block_min_rows: 256,
            block_max_rows: 8192,
            vector_size: 1024,
            split_threshold: 1.01,
            max_cut_width: 4,
            max_cuts_per_component: 512,
            isk_iterations: 10,
            isk_seed_size: 3,
            isk_seed_pool: 16,
            materialize_slack: 1.1,
            threads: 0,
            skipping: true,
            reuse: ReuseMode::Optimized,
            partitioning: true,
            solver: Solver::Gr,
            cost: CostModel::default(),
            seed: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.cost.validate()?;
        if self.queryset_width == 0 {
            return Err(Error::config("query-set width must be positive"));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate <= 1.0) {
            return Err(Error::config(format!(
                "sample rate {} outside (0, 1]",
                self.sample_rate
            )));
        }
        if self.block_min_rows == 0 || self.block_max_rows < self.block_min_rows {
            return Err(Error::config("block bounds must satisfy 0 < min <= max"));
        }
        if self.vector_size == 0 {
            return Err(Error::config("vector size must be positive"));
        }
        if self.max_cut_width == 0 {
            return Err(Error::config("cut width cap must be positive"));
        }
        if self.materialize_slack < 1.0 {
            return Err(Error::config("materialization slack must be >= 1"));
        }
        Ok(())
    }
}

/// Storage budget for views, either absolute or relative to full coverage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Budget {
    Bytes(f64),
    /// Fraction of the bytes needed to cover every aggregate producer.
    Fraction(f64),
}

impl std::str::FromStr for Budget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(p) = s.strip_suffix('%') {
            let v: f64 = p
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("bad budget percentage `{s}`")))?;
            if !(0.0..=1000.0).contains(&v) {
                return Err(Error::config(format!("budget percentage `{s}` out of range")));
            }
            return Ok(Budget::Fraction(v / 100.0));
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::config(format!("bad budget `{s}` (bytes or N%)")))?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::config(format!("budget `{s}` must be non-negative")));
        }
        Ok(Budget::Bytes(v))
    }
}

impl Budget {
    pub fn resolve(&self, full_coverage_bytes: f64) -> f64 {
        match *self {
            Budget::Bytes(b) => b,
            Budget::Fraction(f) => f * full_coverage_bytes,
        }
    }
}
