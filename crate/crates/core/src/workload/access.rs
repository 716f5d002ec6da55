use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::queryset::{iter_bits, words_for};
use crate::storage::{Database, TableId};
use crate::workload::catalog::SubqueryCatalog;
use crate::workload::query::Batch;

/// Sampled row × subquery access matrix. Row `t` holds a bitset over catalog
/// ids; the matrix entry is the subquery weight where the bit is set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessMatrix {
    /// Original fact row ids of the sampled rows.
    pub sample: Vec<u32>,
    pub weights: Vec<u32>,
    words: usize,
    bits: Vec<u64>,
    row_sums: Vec<u64>,
}

impl AccessMatrix {
    /// Builds a matrix from explicit per-row subquery lists.
    pub fn from_rows(weights: Vec<u32>, sample: Vec<u32>, rows: &[Vec<usize>]) -> Self {
        assert_eq!(sample.len(), rows.len());
        let words = words_for(weights.len());
        let mut bits = vec![0u64; words * rows.len()];
        for (t, subs) in rows.iter().enumerate() {
            for &j in subs {
                bits[t * words + j / 64] |= 1 << (j % 64);
            }
        }
        let mut m = AccessMatrix {
            sample,
            weights,
            words,
            bits,
            row_sums: Vec::new(),
        };
        m.row_sums = (0..m.len()).map(|t| m.compute_row_sum(t)).collect();
        m
    }

    pub fn len(&self) -> usize {
        self.sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample.is_empty()
    }

    pub fn words(&self) -> usize {
        self.words
    }

    pub fn row(&self, t: usize) -> &[u64] {
        &self.bits[t * self.words..(t + 1) * self.words]
    }

    pub fn row_sum(&self, t: usize) -> u64 {
        self.row_sums[t]
    }

    pub fn get(&self, t: usize, j: usize) -> u32 {
        if self.row(t)[j / 64] & (1 << (j % 64)) != 0 {
            self.weights[j]
        } else {
            0
        }
    }

    fn compute_row_sum(&self, t: usize) -> u64 {
        iter_bits(self.row(t)).map(|j| self.weights[j] as u64).sum()
    }

    /// Sparse `row subquery weight` lines, one per non-zero entry.
    pub fn to_triplets(&self) -> String {
        let mut out = String::from("# row subquery weight\n");
        for t in 0..self.len() {
            for j in iter_bits(self.row(t)) {
                let _ = writeln!(out, "{} {} {}", self.sample[t], j, self.weights[j]);
            }
        }
        out
    }
}

/// Samples fact rows at `sample_rate` and records which subqueries access
/// each one. Only fact-table predicates decide access; dimension filters are
/// ignored, so the matrix over-approximates.
pub fn record_access_matrix(
    db: &Database,
    batches: &[Batch],
    catalog: &SubqueryCatalog,
    sample_rate: f64,
    seed: u64,
) -> Result<AccessMatrix> {
    if !(sample_rate > 0.0 && sample_rate <= 1.0) {
        return Err(Error::config(format!("sample rate {sample_rate} outside (0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample: Vec<u32> = (0..db.fact.rows as u32)
        .filter(|_| rng.random::<f64>() < sample_rate)
        .collect();
    if sample.is_empty() {
        return Err(Error::config(format!(
            "sample rate {sample_rate} yields an empty sample of {} rows",
            db.fact.rows
        )));
    }
    let words = words_for(catalog.len());
    struct Rule {
        preds: Vec<(usize, crate::storage::ValueRange)>,
        mask: Vec<u64>,
    }
    let mut rules = Vec::new();
    for (b, batch) in batches.iter().enumerate() {
        for q in &batch.queries {
            let mut mask = vec![0u64; words];
            for j in catalog.for_joins(b, q.joins) {
                mask[j / 64] |= 1 << (j % 64);
            }
            if mask.iter().all(|w| *w == 0) {
                continue;
            }
            let preds = q
                .filters
                .iter()
                .filter(|p| p.column.table == TableId::Fact)
                .map(|p| (p.column.column, p.range))
                .collect();
            rules.push(Rule { preds, mask });
        }
    }
    let mut bits = vec![0u64; words * sample.len()];
    for (t, &row) in sample.iter().enumerate() {
        let out = &mut bits[t * words..(t + 1) * words];
        for r in &rules {
            if r.preds
                .iter()
                .all(|(c, range)| range.contains(db.fact.columns[*c][row as usize]))
            {
                for (o, m) in out.iter_mut().zip(&r.mask) {
                    *o |= m;
                }
            }
        }
    }
    let mut m = AccessMatrix {
        sample,
        weights: catalog.entries.iter().map(|s| s.weight).collect(),
        words,
        bits,
        row_sums: Vec::new(),
    };
    m.row_sums = (0..m.len()).map(|t| m.compute_row_sum(t)).collect();
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::{generate_database, ColumnRef, Schema, ValueRange};
    use crate::workload::catalog::enumerate_subqueries;
    use crate::workload::query::{DimSet, Predicate, Query};

    fn db() -> Database {
        let mut s = Schema::new("a", 2000);
        s.add_fact_column("f", 0, 100).unwrap();
        s.add_dimension("b", 10, "fk_b").unwrap();
        s.add_dimension("c", 10, "fk_c").unwrap();
        s.add_dimension("d", 10, "fk_d").unwrap();
        generate_database(&s, 1).unwrap()
    }

    fn query(joins: &[usize], lo: i64, hi: i64) -> Query {
        Query {
            name: String::new(),
            joins: DimSet::from_dims(joins.iter().copied()),
            filters: vec![Predicate {
                column: ColumnRef::fact(0),
                range: ValueRange::new(lo, hi),
            }],
            sum: 0,
            group_by: None,
        }
    }

    #[test]
    fn weights_match_table_counts() {
        let db = db();
        let batches = vec![Batch::new("b", vec![query(&[0, 1], 0, 50)])];
        let cat = enumerate_subqueries(&batches);
        let w = record_access_matrix(&db, &batches, &cat, 1.0, 5).unwrap();
        assert_eq!(w.len(), db.fact.rows);
        for t in 0..w.len() {
            let v = db.fact.column(0)[w.sample[t] as usize];
            let row: Vec<u32> = (0..cat.len()).map(|j| w.get(t, j)).collect();
            if v < 50 {
                let mut sorted = row.clone();
                sorted.sort();
                assert_eq!(sorted, vec![2, 2, 3]);
            } else {
                assert!(row.iter().all(|x| *x == 0));
            }
            for (j, x) in row.iter().enumerate() {
                assert!(*x == 0 || *x == cat.entries[j].dims.len() as u32 + 1);
            }
        }
    }

    #[test]
    fn empty_sample_is_config_error() {
        let db = db();
        let batches = vec![Batch::new("b", vec![query(&[0], 0, 50)])];
        let cat = enumerate_subqueries(&batches);
        let err = record_access_matrix(&db, &batches, &cat, 1e-9, 5).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn deterministic_sample() {
        let db = db();
        let batches = vec![Batch::new("b", vec![query(&[0], 0, 50)])];
        let cat = enumerate_subqueries(&batches);
        let a = record_access_matrix(&db, &batches, &cat, 0.1, 5).unwrap();
        let b = record_access_matrix(&db, &batches, &cat, 0.1, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inclusion_frequency_matches_rate() {
        // Chi-squared over 20 row groups: inclusion counts across seeds should
        // look uniform at the requested rate.
        let db = db();
        let batches = vec![Batch::new("b", vec![query(&[0], 0, 100)])];
        let cat = enumerate_subqueries(&batches);
        let rate = 0.05;
        let seeds = 200;
        let groups = 20;
        let per_group = db.fact.rows / groups;
        let mut counts = vec![0f64; groups];
        for seed in 0..seeds {
            let w = record_access_matrix(&db, &batches, &cat, rate, seed).unwrap();
            for &r in &w.sample {
                counts[(r as usize / per_group).min(groups - 1)] += 1.0;
            }
        }
        let expected = rate * per_group as f64 * seeds as f64;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // 19 degrees of freedom; the 0.999 quantile is about 43.8.
        assert!(chi2 < 43.8, "chi2 = {chi2}");
    }
}
