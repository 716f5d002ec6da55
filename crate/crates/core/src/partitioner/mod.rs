//! Workload-driven physical layout: homogeneity-guided 1st-level cuts and
//! bucket-clustered 2nd-level blocks.

pub mod blocks;

use std::collections::BTreeMap;

use crate::error::Result;
use crate::queryset::iter_bits;
use crate::storage::layout::Bounds;
use crate::storage::{BlockSet, ColumnarTable, Database, Layout, Partition, PartitionTree, SplitPredicate};
use crate::workload::{AccessMatrix, Batch};

pub use blocks::{build_clustered, cluster_rows, BlockParams, BucketAttr};

/// Homogeneity of the sampled tuples `t`: total access weight divided by the
/// weight of the subqueries touching any of them.
pub fn homogeneity(t: &[usize], w: &AccessMatrix) -> f64 {
    let mut or = vec![0u64; w.words()];
    let mut num = 0u64;
    for &i in t {
        for (o, b) in or.iter_mut().zip(w.row(i)) {
            *o |= b;
        }
        num += w.row_sum(i);
    }
    num as f64 / subquery_weight(&or, w).max(1) as f64
}

fn subquery_weight(bits: &[u64], w: &AccessMatrix) -> u64 {
    iter_bits(bits).map(|j| w.weights[j] as u64).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionParams {
    pub ps_min: usize,
    pub sample_rate: f64,
    /// A cut is applied only if it lifts homogeneity above this multiple.
    pub threshold: f64,
}

/// Split values taken from the bounds of fact predicates in `batches` that
/// fall strictly inside the column domain. Sorted by (column, value).
pub fn candidate_cuts(db: &Database, batches: &[Batch]) -> Vec<SplitPredicate> {
    let mut cuts = Vec::new();
    for b in batches {
        for q in &b.queries {
            for p in q.fact_filters() {
                let col = &db.schema.fact.columns[p.column.column];
                for v in [p.range.lo, p.range.hi] {
                    if v > col.lo as i64 && v < col.hi as i64 {
                        cuts.push(SplitPredicate {
                            column: p.column.column,
                            value: v as i32,
                        });
                    }
                }
            }
        }
    }
    cuts.sort_unstable();
    cuts.dedup();
    cuts
}

/// Greedy homogeneity partitioning over the sampled tuples.
///
/// At each node every candidate cut whose sides both estimate at least
/// `ps_min` rows is scored by H(left) + H(right); the best cut is applied when
/// it beats `threshold` × H(node). Ties keep the lowest (column, value).
pub fn partition(fact: &ColumnarTable, w: &AccessMatrix, cuts: &[SplitPredicate], p: PartitionParams) -> PartitionTree {
    let mut by_col: BTreeMap<usize, Vec<i32>> = BTreeMap::new();
    for c in cuts {
        by_col.entry(c.column).or_default().push(c.value);
    }
    for v in by_col.values_mut() {
        v.sort_unstable();
        v.dedup();
    }
    let all: Vec<usize> = (0..w.len()).collect();
    let mut tree = split_node(fact, w, &by_col, p, all);
    tree.renumber();
    tree
}

fn split_node(
    fact: &ColumnarTable,
    w: &AccessMatrix,
    cuts: &BTreeMap<usize, Vec<i32>>,
    p: PartitionParams,
    tuples: Vec<usize>,
) -> PartitionTree {
    let leaf = PartitionTree::Leaf { id: 0 };
    let n = tuples.len();
    if n < 2 {
        return leaf;
    }
    let h = homogeneity(&tuples, w);
    let words = w.words();
    let mut best: Option<(f64, SplitPredicate)> = None;
    let mut sorted = tuples.clone();
    for (&column, values) in cuts {
        let col = fact.column(column);
        let val = |t: usize| col[w.sample[t] as usize];
        sorted.sort_by_key(|t| val(*t));
        // prefix[k]: OR and weight sum over sorted[..k]; suffix[k] over sorted[k..].
        let mut pre_or = vec![0u64; (n + 1) * words];
        let mut pre_sum = vec![0u64; n + 1];
        for (i, &t) in sorted.iter().enumerate() {
            let (a, b) = pre_or.split_at_mut((i + 1) * words);
            for ((o, prev), x) in b[..words].iter_mut().zip(&a[i * words..]).zip(w.row(t)) {
                *o = prev | x;
            }
            pre_sum[i + 1] = pre_sum[i] + w.row_sum(t);
        }
        let mut suf_or = vec![0u64; (n + 1) * words];
        for i in (0..n).rev() {
            let (a, b) = suf_or.split_at_mut((i + 1) * words);
            for ((o, next), x) in a[i * words..].iter_mut().zip(&b[..words]).zip(w.row(sorted[i])) {
                *o = next | x;
            }
        }
        for &v in values {
            let k = sorted.partition_point(|t| val(*t) < v);
            if k == 0 || k == n {
                continue;
            }
            let est = |c: usize| c as f64 / p.sample_rate;
            if est(k) < p.ps_min as f64 || est(n - k) < p.ps_min as f64 {
                continue;
            }
            let hl = pre_sum[k] as f64 / subquery_weight(&pre_or[k * words..(k + 1) * words], w).max(1) as f64;
            let hr = (pre_sum[n] - pre_sum[k]) as f64
                / subquery_weight(&suf_or[k * words..(k + 1) * words], w).max(1) as f64;
            let score = hl + hr;
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, SplitPredicate { column, value: v }));
            }
        }
    }
    match best {
        Some((score, split)) if score > p.threshold * h => {
            let col = fact.column(split.column);
            let (l, r): (Vec<usize>, Vec<usize>) = tuples
                .into_iter()
                .partition(|t| col[w.sample[*t] as usize] < split.value);
            PartitionTree::Split {
                split,
                left: Box::new(split_node(fact, w, cuts, p, l)),
                right: Box::new(split_node(fact, w, cuts, p, r)),
            }
        }
        _ => leaf,
    }
}

/// Bucketing attributes for fact blocks: filtered fact columns ordered by
/// descending predicate count, with every predicate bound as a boundary.
pub fn fact_bucket_attrs(batches: &[Batch]) -> Vec<BucketAttr> {
    let mut acc: BTreeMap<usize, (usize, Vec<i64>)> = BTreeMap::new();
    for b in batches {
        for q in &b.queries {
            for p in q.fact_filters() {
                let e = acc.entry(p.column.column).or_default();
                e.0 += 1;
                e.1.extend([p.range.lo, p.range.hi]);
            }
        }
    }
    let mut attrs: Vec<(usize, usize, Vec<i64>)> = acc.into_iter().map(|(c, (n, b))| (c, n, b)).collect();
    attrs.sort_by_key(|(c, n, _)| (std::cmp::Reverse(*n), *c));
    attrs
        .into_iter()
        .map(|(c, _, b)| BucketAttr::new(c, b.into_iter().filter(|v| i32::try_from(*v).is_ok()).collect()))
        .collect()
}

/// Reorganizes the fact table by `tree`, clusters each partition into blocks
/// and builds zone maps on every fact column.
pub fn build_layout(db: &Database, mut tree: PartitionTree, attrs: &[BucketAttr], p: BlockParams) -> Result<(Database, Layout)> {
    tree.renumber();
    let fact = &db.fact;
    let leaves = tree.leaf_count();
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); leaves];
    for r in 0..fact.rows {
        members[tree.route(|c| fact.columns[c][r])].push(r as u32);
    }
    let mut order: Vec<u32> = Vec::with_capacity(fact.rows);
    let mut ranges = Vec::with_capacity(leaves);
    let mut starts_per = Vec::with_capacity(leaves);
    let local: Vec<BucketAttr> = attrs
        .iter()
        .enumerate()
        .map(|(i, a)| BucketAttr {
            column: i,
            boundaries: a.boundaries.clone(),
        })
        .collect();
    for rows in &members {
        let data: Vec<Vec<i32>> = attrs
            .iter()
            .map(|a| rows.iter().map(|r| fact.columns[a.column][*r as usize]).collect())
            .collect();
        let (local_order, starts) = if data.is_empty() {
            let placeholder = vec![0i32; rows.len()];
            cluster_rows(&[&placeholder], &[], p)
        } else {
            let refs: Vec<&[i32]> = data.iter().map(|c| c.as_slice()).collect();
            cluster_rows(&refs, &local, p)
        };
        let start = order.len();
        order.extend(local_order.iter().map(|i| rows[*i as usize]));
        ranges.push(start..order.len());
        starts_per.push(starts);
    }
    let mut perm = vec![0u32; fact.rows];
    for (new, old) in order.iter().enumerate() {
        perm[*old as usize] = new as u32;
    }
    let out = db.with_fact_permuted(&perm);
    let bounds: Vec<Bounds> = tree.leaf_bounds();
    let tracked: Vec<usize> = (0..out.fact.columns.len()).collect();
    let mut partitions = Vec::with_capacity(leaves);
    for (id, (range, starts)) in ranges.into_iter().zip(starts_per).enumerate() {
        let data: Vec<&[i32]> = out.fact.columns.iter().map(|c| &c[range.clone()]).collect();
        let blocks = if range.is_empty() {
            BlockSet {
                starts: vec![0],
                columns: tracked.clone(),
                mins: vec![Vec::new(); tracked.len()],
                maxs: vec![Vec::new(); tracked.len()],
            }
        } else {
            BlockSet::build(&data, starts, &tracked)?
        };
        partitions.push(Partition {
            id,
            rows: range,
            bounds: bounds[id].clone(),
            blocks,
        });
    }
    Ok((out, Layout { tree, partitions }))
}

/// Single partition with fixed-size blocks, used when no tuned layout exists.
pub fn default_layout(db: &Database, block_rows: usize) -> Result<Layout> {
    let tracked: Vec<usize> = (0..db.fact.columns.len()).collect();
    let data: Vec<&[i32]> = db.fact.columns.iter().map(|c| c.as_slice()).collect();
    let blocks = if db.fact.rows == 0 {
        BlockSet {
            starts: vec![0],
            columns: tracked.clone(),
            mins: vec![Vec::new(); tracked.len()],
            maxs: vec![Vec::new(); tracked.len()],
        }
    } else {
        BlockSet::fixed(&data, block_rows, &tracked)?
    };
    Ok(Layout {
        tree: PartitionTree::single(),
        partitions: vec![Partition {
            id: 0,
            rows: 0..db.fact.rows,
            bounds: Vec::new(),
            blocks,
        }],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::{generate_database, ColumnRef, Schema, ValueRange};
    use crate::workload::{enumerate_subqueries, record_access_matrix, DimSet, Predicate, Query};
    use proptest::prelude::*;

    fn matrix(weights: Vec<u32>, rows: &[Vec<usize>]) -> AccessMatrix {
        let sample = (0..rows.len() as u32).collect();
        AccessMatrix::from_rows(weights, sample, rows)
    }

    #[test]
    fn homogeneity_examples() {
        let same = matrix(vec![2], &[vec![0], vec![0], vec![0]]);
        assert_eq!(homogeneity(&[0, 1, 2], &same), 3.0);
        let none = matrix(vec![2], &[vec![], vec![]]);
        assert_eq!(homogeneity(&[0, 1], &none), 0.0);
        let split = matrix(vec![2, 3], &[vec![0], vec![1]]);
        assert!((homogeneity(&[0, 1], &split) - 1.0).abs() < 1e-12);
    }

    fn two_group_setup(rows: usize, same_joins: bool) -> (Database, Vec<Batch>) {
        let mut s = Schema::new("a", rows);
        s.add_fact_column("f", 0, 100).unwrap();
        s.add_fact_column("x", 0, 100).unwrap();
        s.add_dimension("b", 10, "fk_b").unwrap();
        s.add_dimension("c", 10, "fk_c").unwrap();
        let db = generate_database(&s, 3).unwrap();
        let q = |d: usize, lo, hi| Query {
            name: String::new(),
            joins: DimSet::single(d),
            filters: vec![Predicate {
                column: ColumnRef::fact(1),
                range: ValueRange::new(lo, hi),
            }],
            sum: 0,
            group_by: None,
        };
        let second = if same_joins { 0 } else { 1 };
        let batch = Batch::new("t", vec![q(0, 0, 50), q(second, 50, 100)]);
        (db, vec![batch])
    }

    fn run(db: &Database, batches: &[Batch], ps_min: usize, rate: f64) -> PartitionTree {
        let cat = enumerate_subqueries(batches);
        let w = record_access_matrix(db, batches, &cat, rate, 1).unwrap();
        let cuts = candidate_cuts(db, batches);
        partition(
            &db.fact,
            &w,
            &cuts,
            PartitionParams {
                ps_min,
                sample_rate: rate,
                threshold: 1.01,
            },
        )
    }

    #[test]
    fn disjoint_groups_cut_once() {
        let (db, batches) = two_group_setup(20_000, false);
        let tree = run(&db, &batches, 1000, 0.1);
        match tree {
            PartitionTree::Split { split, left, right } => {
                assert_eq!(split, SplitPredicate { column: 1, value: 50 });
                assert!(matches!(*left, PartitionTree::Leaf { id: 0 }));
                assert!(matches!(*right, PartitionTree::Leaf { id: 1 }));
            }
            t => panic!("expected one cut, got {t:?}"),
        }
    }

    #[test]
    fn identical_subqueries_give_single_leaf() {
        let (db, mut batches) = two_group_setup(20_000, true);
        batches[0].queries[1].filters[0].range = ValueRange::new(0, 100);
        batches[0].queries[0].filters[0].range = ValueRange::new(0, 100);
        assert_eq!(run(&db, &batches, 1000, 0.1), PartitionTree::single());
    }

    #[test]
    fn large_ps_min_gives_single_leaf() {
        let (db, batches) = two_group_setup(20_000, false);
        assert_eq!(run(&db, &batches, 10_001, 0.1), PartitionTree::single());
    }

    fn leaf_sum(tree: &PartitionTree, fact: &ColumnarTable, w: &AccessMatrix) -> f64 {
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for t in 0..w.len() {
            let r = w.sample[t] as usize;
            groups.entry(tree.route(|c| fact.columns[c][r])).or_default().push(t);
        }
        groups.values().map(|g| homogeneity(g, w)).sum()
    }

    fn best_tree(t: &[usize], fact: &ColumnarTable, w: &AccessMatrix, cuts: &[SplitPredicate], ps_min: usize) -> f64 {
        let mut best = homogeneity(t, w);
        for c in cuts {
            let col = fact.column(c.column);
            let (l, r): (Vec<usize>, Vec<usize>) = t.iter().partition(|x| col[**x] < c.value);
            if l.is_empty() || r.is_empty() || l.len() < ps_min || r.len() < ps_min {
                continue;
            }
            let v = best_tree(&l, fact, w, cuts, ps_min) + best_tree(&r, fact, w, cuts, ps_min);
            best = best.max(v);
        }
        best
    }

    fn applied_cuts_improve(t: &PartitionTree, tuples: &[usize], fact: &ColumnarTable, w: &AccessMatrix) -> bool {
        match t {
            PartitionTree::Leaf { .. } => true,
            PartitionTree::Split { split, left, right } => {
                let col = fact.column(split.column);
                let (l, r): (Vec<usize>, Vec<usize>) = tuples.iter().partition(|x| col[**x] < split.value);
                homogeneity(&l, w) + homogeneity(&r, w) > 1.01 * homogeneity(tuples, w)
                    && applied_cuts_improve(left, &l, fact, w)
                    && applied_cuts_improve(right, &r, fact, w)
            }
        }
    }

    proptest! {
        #[test]
        fn greedy_is_bounded_by_exhaustive(
            access in proptest::collection::vec(proptest::collection::vec(0usize..4, 0..3), 2..=12),
            xs in proptest::collection::vec(0i32..10, 12),
            ys in proptest::collection::vec(0i32..10, 12),
            cut_vals in proptest::collection::vec((0usize..2, 1i32..10), 1..=4),
            ps_min in 0usize..4,
        ) {
            let n = access.len();
            let w = matrix(vec![2, 2, 3, 4], &access);
            let fact = ColumnarTable::new(
                "a",
                vec!["x".into(), "y".into()],
                vec![xs[..n].to_vec(), ys[..n].to_vec()],
            ).unwrap();
            let mut cuts: Vec<SplitPredicate> = cut_vals
                .iter()
                .map(|(c, v)| SplitPredicate { column: *c, value: *v })
                .collect();
            cuts.sort_unstable();
            cuts.dedup();
            let p = PartitionParams { ps_min, sample_rate: 1.0, threshold: 1.01 };
            let tree = partition(&fact, &w, &cuts, p);
            let all: Vec<usize> = (0..n).collect();
            let greedy = leaf_sum(&tree, &fact, &w);
            let opt = best_tree(&all, &fact, &w, &cuts, ps_min.max(1));
            prop_assert!(greedy <= opt + 1e-9, "greedy {greedy} > opt {opt}");
            prop_assert!(greedy >= homogeneity(&all, &w) - 1e-9);
            prop_assert!(applied_cuts_improve(&tree, &all, &fact, &w));
        }

        #[test]
        fn homogeneity_at_most_size(
            access in proptest::collection::vec(proptest::collection::vec(0usize..5, 0..4), 1..20),
        ) {
            let w = matrix(vec![1, 2, 2, 3, 4], &access);
            let all: Vec<usize> = (0..access.len()).collect();
            let h = homogeneity(&all, &w);
            prop_assert!(h <= all.len() as f64 + 1e-9);
        }
    }

    #[test]
    fn layout_preserves_rows_and_aligns_blocks() {
        let (db, batches) = two_group_setup(20_000, false);
        let tree = run(&db, &batches, 1000, 0.1);
        let attrs = fact_bucket_attrs(&batches);
        let p = BlockParams {
            min_avg_rows: 256,
            max_rows: 8192,
        };
        let (out, layout) = build_layout(&db, tree, &attrs, p).unwrap();
        assert_eq!(layout.total_rows(), 20_000);
        assert_eq!(layout.partitions.len(), 2);
        let sum = |d: &Database| d.fact.column(0).iter().map(|v| *v as i64).sum::<i64>();
        assert_eq!(sum(&db), sum(&out));
        for part in &layout.partitions {
            assert!(part.len() / part.blocks.len() >= 256);
            let slot = part.blocks.slot(1).unwrap();
            for b in 0..part.blocks.len() {
                for q in &batches[0].queries {
                    let c = crate::storage::classify_predicate(part.blocks.zone(slot, b), q.filters[0].range);
                    assert_ne!(c, crate::storage::Classification::Ambivalent);
                }
            }
        }
    }
}
