//! 2nd-level blocks: rows clustered by predicate-boundary buckets.

use crate::error::Result;
use crate::storage::BlockSet;

/// Bucketing attribute: a column index and its sorted, deduplicated
/// boundary values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BucketAttr {
    pub column: usize,
    pub boundaries: Vec<i64>,
}

impl BucketAttr {
    pub fn new(column: usize, mut boundaries: Vec<i64>) -> Self {
        boundaries.sort_unstable();
        boundaries.dedup();
        BucketAttr { column, boundaries }
    }

    #[inline]
    pub fn bucket(&self, v: i32) -> u32 {
        self.boundaries.partition_point(|b| *b <= v as i64) as u32
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockParams {
    pub min_avg_rows: usize,
    pub max_rows: usize,
}

/// Orders rows lexicographically by bucket index of each attribute (first
/// attribute most significant) and cuts the order into blocks. Returns the
/// row order (`order[new] = old`) and block starts including the final end.
///
/// Pure runs are split into chunks of at most `max_rows`; runs smaller than
/// `min_avg_rows` are merged with their neighbours until the average block
/// holds at least `min_avg_rows`.
pub fn cluster_rows(data: &[&[i32]], attrs: &[BucketAttr], p: BlockParams) -> (Vec<u32>, Vec<usize>) {
    let rows = data.first().map_or(0, |c| c.len());
    if rows == 0 {
        return (Vec::new(), vec![0]);
    }
    let mut order: Vec<u32> = (0..rows as u32).collect();
    let mut runs: Vec<usize> = vec![rows];
    if !attrs.is_empty() {
        let radix: Option<u64> = attrs
            .iter()
            .try_fold(1u64, |acc, a| acc.checked_mul(a.boundaries.len() as u64 + 1));
        let mut run_start = vec![false; rows];
        if radix.is_some() {
            let mut keys = vec![0u64; rows];
            for a in attrs {
                let base = a.boundaries.len() as u64 + 1;
                for (k, v) in keys.iter_mut().zip(data[a.column]) {
                    *k = *k * base + a.bucket(*v) as u64;
                }
            }
            order.sort_by_key(|r| keys[*r as usize]);
            for i in 1..rows {
                run_start[i] = keys[order[i] as usize] != keys[order[i - 1] as usize];
            }
        } else {
            let keys: Vec<Vec<u32>> = attrs
                .iter()
                .map(|a| data[a.column].iter().map(|v| a.bucket(*v)).collect())
                .collect();
            let key = |r: u32| keys.iter().map(move |k| k[r as usize]);
            order.sort_by(|a, b| key(*a).cmp(key(*b)));
            for i in 1..rows {
                run_start[i] = key(order[i]).ne(key(order[i - 1]));
            }
        }
        runs.clear();
        let mut len = 0;
        for (i, starts_run) in run_start.iter().enumerate() {
            if i > 0 && *starts_run {
                runs.push(len);
                len = 0;
            }
            len += 1;
        }
        runs.push(len);
    }
    (order, block_starts(&runs, p))
}

fn block_starts(runs: &[usize], p: BlockParams) -> Vec<usize> {
    let max = p.max_rows.max(1);
    let min = p.min_avg_rows.max(1).min(max);
    let mut sizes: Vec<usize> = Vec::new();
    let mut pending = 0;
    for &run in runs {
        if run >= min {
            if pending > 0 {
                sizes.push(pending);
                pending = 0;
            }
            let chunks = run.div_ceil(max);
            let base = run / chunks;
            let extra = run % chunks;
            sizes.extend((0..chunks).map(|c| base + usize::from(c < extra)));
        } else {
            pending += run;
            if pending >= min {
                sizes.push(pending);
                pending = 0;
            }
        }
    }
    if pending > 0 {
        match sizes.last_mut() {
            Some(last) if *last + pending <= max => *last += pending,
            _ => sizes.push(pending),
        }
    }
    let total: usize = sizes.iter().sum();
    let limit = (total / min).max(1);
    while sizes.len() > limit {
        let i = (0..sizes.len() - 1)
            .min_by_key(|i| sizes[*i] + sizes[*i + 1])
            .expect("at least two blocks");
        sizes[i] += sizes.remove(i + 1);
    }
    let mut starts = Vec::with_capacity(sizes.len() + 1);
    let mut at = 0;
    starts.push(0);
    for s in sizes {
        at += s;
        starts.push(at);
    }
    starts
}

/// Clusters `data` and builds zone maps for every column. Returns the
/// permuted columns, the order and the blocks.
pub fn build_clustered(
    data: &[&[i32]],
    attrs: &[BucketAttr],
    p: BlockParams,
) -> Result<(Vec<Vec<i32>>, Vec<u32>, BlockSet)> {
    let (order, starts) = cluster_rows(data, attrs, p);
    let cols: Vec<Vec<i32>> = data
        .iter()
        .map(|c| order.iter().map(|r| c[*r as usize]).collect())
        .collect();
    let refs: Vec<&[i32]> = cols.iter().map(|c| c.as_slice()).collect();
    let tracked: Vec<usize> = (0..cols.len()).collect();
    let blocks = BlockSet::build(&refs, starts, &tracked)?;
    Ok((cols, order, blocks))
}
