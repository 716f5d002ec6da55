use std::collections::HashMap;

use crate::queryset::QuerySet;
use crate::storage::{ColumnRef, Database, TableId, ValueRange};
use crate::workload::Batch;

/// Per-attribute predicate index: sorted predicate boundaries split the value
/// line into intervals, each carrying the set of queries it satisfies.
/// Queries without a predicate on the attribute are set everywhere.
#[derive(Clone, Debug)]
pub struct PredicateIndex {
    bounds: Vec<i64>,
    sets: Vec<u64>,
    words: usize,
}

impl PredicateIndex {
    pub fn build(preds: &[(usize, ValueRange)], all: &QuerySet) -> Self {
        let words = all.word_count();
        let mut bounds: Vec<i64> = preds.iter().flat_map(|(_, r)| [r.lo, r.hi]).collect();
        bounds.sort_unstable();
        bounds.dedup();
        let intervals = bounds.len() + 1;
        let mut sets = Vec::with_capacity(intervals * words);
        for _ in 0..intervals {
            sets.extend_from_slice(all.words());
        }
        for &(q, r) in preds {
            for i in 0..intervals {
                // Interval i is [bounds[i-1], bounds[i]).
                let lo = if i == 0 { i64::MIN } else { bounds[i - 1] };
                let hi = if i == bounds.len() { i64::MAX } else { bounds[i] };
                let inside = lo >= r.lo && hi <= r.hi;
                if !inside {
                    sets[i * words + q / 64] &= !(1u64 << (q % 64));
                }
            }
        }
        PredicateIndex {
            bounds,
            sets,
            words,
        }
    }

    #[inline]
    pub fn lookup(&self, v: i32) -> &[u64] {
        let v = v as i64;
        let i = self.bounds.partition_point(|b| *b <= v);
        &self.sets[i * self.words..(i + 1) * self.words]
    }
}

/// Shared state for one batch: predicate indexes on every filtered column
/// and, per joined dimension, a direct-address table of query sets.
#[derive(Clone, Debug)]
pub struct DimState {
    pub words: usize,
    pub all: QuerySet,
    pub indexes: HashMap<ColumnRef, PredicateIndex>,
    tables: Vec<Option<Vec<u64>>>,
    /// Fraction of rows whose entry carries each query, per dimension.
    density: Vec<Vec<f64>>,
}

impl DimState {
    /// Builds predicate indexes and per-dimension entry sets. An entry holds
    /// the queries that join the dimension and whose filters the row passes.
    pub fn build(db: &Database, batch: &Batch, words: usize) -> Self {
        let all = QuerySet::full(words, batch.len());
        let mut by_col: HashMap<ColumnRef, Vec<(usize, ValueRange)>> = HashMap::new();
        for (q, query) in batch.queries.iter().enumerate() {
            for p in &query.filters {
                by_col.entry(p.column).or_default().push((q, p.range));
            }
        }
        let indexes: HashMap<ColumnRef, PredicateIndex> = by_col
            .iter()
            .map(|(c, preds)| (*c, PredicateIndex::build(preds, &all)))
            .collect();

        let ndims = db.schema.dimensions.len();
        let mut tables = vec![None; ndims];
        let mut density = vec![Vec::new(); ndims];
        for (d, slot) in tables.iter_mut().enumerate() {
            let joining: Vec<usize> = (0..batch.len())
                .filter(|q| batch.queries[*q].joins.contains(d))
                .collect();
            if joining.is_empty() {
                continue;
            }
            let mut base = QuerySet::empty(words);
            for &q in &joining {
                base.insert(q);
            }
            let rows = db.schema.dimensions[d].rows;
            let mut table = Vec::with_capacity(rows * words);
            for _ in 0..rows {
                table.extend_from_slice(base.words());
            }
            let filtered: Vec<(usize, &PredicateIndex)> = indexes
                .iter()
                .filter(|(c, _)| c.table == TableId::Dim(d))
                .map(|(c, idx)| (c.column, idx))
                .collect();
            for (col, idx) in filtered {
                let values = db.dims[d].column(col);
                for (r, v) in values.iter().enumerate() {
                    let entry = &mut table[r * words..(r + 1) * words];
                    for (e, m) in entry.iter_mut().zip(idx.lookup(*v)) {
                        *e &= m;
                    }
                }
            }
            let mut counts = vec![0usize; batch.len()];
            for r in 0..rows {
                for q in crate::queryset::iter_bits(&table[r * words..(r + 1) * words]) {
                    counts[q] += 1;
                }
            }
            density[d] = counts.iter().map(|c| *c as f64 / rows as f64).collect();
            *slot = Some(table);
        }
        DimState {
            words,
            all,
            indexes,
            tables,
            density,
        }
    }

    /// Entry table for `dim`, `rows × words` long.
    pub fn table(&self, dim: usize) -> Option<&[u64]> {
        self.tables.get(dim).and_then(|t| t.as_deref())
    }

    #[inline]
    pub fn entry(&self, dim: usize, key: i32) -> &[u64] {
        let t = self.tables[dim].as_deref().expect("dimension joined by batch");
        let k = key as usize;
        &t[k * self.words..(k + 1) * self.words]
    }

    /// Fraction of dimension rows passing `query`'s filters.
    pub fn selectivity(&self, dim: usize, query: usize) -> f64 {
        self.density
            .get(dim)
            .and_then(|d| d.get(query))
            .copied()
            .unwrap_or(1.0)
    }

    pub fn index(&self, column: ColumnRef) -> Option<&PredicateIndex> {
        self.indexes.get(&column)
    }
}
