//! Reference implementations used to verify the engine: query-at-a-time
//! execution and brute-force optimizers.

use crate::executor::ReuseProblem;
use crate::materializer::CutInstance;
use crate::storage::{Database, TableId};
use crate::workload::{Batch, Query};

/// Evaluates one query with plain nested loops over the base tables.
pub fn qat_query(db: &Database, q: &Query) -> Vec<i64> {
    let schema = &db.schema;
    let mut out = vec![0i64; q.group_count(schema)];
    let sum = db.fact.column(q.sum);
    let group = q.group_by.map(|g| (db.fact.column(g), schema.fact.columns[g].lo as i64));
    let fks: Vec<(usize, &[i32])> = q
        .joins
        .iter()
        .map(|d| (d, db.fact.column(schema.fk_column(d))))
        .collect();
    'rows: for r in 0..db.fact.rows {
        for p in &q.filters {
            let v = match p.column.table {
                TableId::Fact => db.fact.column(p.column.column)[r],
                TableId::Dim(d) => {
                    let key = fks.iter().find(|(x, _)| *x == d).expect("joined").1[r];
                    db.dims[d].column(p.column.column)[key as usize]
                }
            };
            if !p.range.contains(v) {
                continue 'rows;
            }
        }
        let slot = match group {
            None => 0,
            Some((g, lo)) => (g[r] as i64 - lo) as usize,
        };
        out[slot] += sum[r] as i64;
    }
    out
}

/// Query-at-a-time results for a whole batch.
pub fn qat_batch(db: &Database, batch: &Batch) -> Vec<Vec<i64>> {
    batch.queries.iter().map(|q| qat_query(db, q)).collect()
}

/// Nodes eliminated when the nodes flagged in `in_view` are read from views:
/// a node is eliminated if it is in a view or all of its (one or more)
/// successors are eliminated. Node ids must be topological.
pub fn eliminated(successors: &[Vec<usize>], in_view: &[bool]) -> Vec<bool> {
    let n = successors.len();
    let mut out = vec![false; n];
    for v in (0..n).rev() {
        out[v] = in_view[v] || (!successors[v].is_empty() && successors[v].iter().all(|s| out[*s]));
    }
    out
}

/// Cost of the cheapest view injection, by trying every subset of the
/// materialized nodes.
pub fn exhaustive_rewrite_cost(p: &ReuseProblem) -> f64 {
    let mats: Vec<usize> = (0..p.len()).filter(|v| p.materialized[*v]).collect();
    assert!(mats.len() <= 20, "too many materialized nodes for exhaustive search");
    let mut best = f64::INFINITY;
    let mut in_view = vec![false; p.len()];
    for mask in 0u32..(1 << mats.len()) {
        for (i, &v) in mats.iter().enumerate() {
            in_view[v] = mask & (1 << i) != 0;
        }
        let elim = eliminated(&p.successors, &in_view);
        let cost: f64 = (0..p.len())
            .map(|v| {
                let mut c = if elim[v] { 0.0 } else { p.cost[v] };
                if in_view[v] {
                    c += p.overhead[v];
                }
                c
            })
            .sum();
        best = best.min(cost);
    }
    best
}

/// Best cut selection within `budget` by exhaustive search.
pub fn optimal_selection(inst: &CutInstance, budget: f64) -> (f64, Vec<usize>) {
    let n = inst.cuts.len();
    assert!(n <= 20, "too many cuts for exhaustive search");
    let mut best = (0.0, Vec::new());
    for mask in 0u32..(1 << n) {
        let sel: Vec<usize> = (0..n).filter(|c| mask & (1 << c) != 0).collect();
        if inst.budget(&sel) > budget + 1e-9 {
            continue;
        }
        let r = inst.reduction(&sel);
        if r > best.0 {
            best = (r, sel);
        }
    }
    best
}

/// Approximation factor 1 - ((K - 1) / K)^k of the greedy solver, with K the
/// largest feasible selection size and k the smallest size of a feasible
/// selection that some single extra cut would push over budget.
pub fn greedy_factor(inst: &CutInstance, budget: f64) -> f64 {
    let n = inst.cuts.len();
    assert!(n <= 20, "too many cuts for exhaustive search");
    let feasible = |m: u32| {
        let sel: Vec<usize> = (0..n).filter(|c| m & (1 << c) != 0).collect();
        inst.budget(&sel) <= budget + 1e-9
    };
    let fits: Vec<bool> = (0u32..(1 << n)).map(feasible).collect();
    let mut big_k = 0u32;
    let mut small_k = u32::MAX;
    for m in 0u32..(1 << n) {
        if !fits[m as usize] {
            continue;
        }
        big_k = big_k.max(m.count_ones());
        let blocked = (0..n).any(|c| m & (1 << c) == 0 && !fits[(m | (1 << c)) as usize]);
        if blocked {
            small_k = small_k.min(m.count_ones());
        }
    }
    if big_k == 0 || small_k == u32::MAX {
        return 1.0;
    }
    let k = big_k as f64;
    1.0 - ((k - 1.0) / k).powi(small_k as i32)
}
