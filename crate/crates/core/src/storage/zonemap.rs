use std::ops::Range;

use crate::error::{Error, Result};
use crate::storage::predicate::Zone;

/// Contiguous blocks over a row range with min/max per tracked column.
///
/// Zone maps are kept column-major (`mins[col][block]`) so skipping analysis
/// walks one attribute at a time.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct BlockSet {
    /// Block `b` covers rows `starts[b]..starts[b + 1]`, relative to the owner.
    pub starts: Vec<usize>,
    /// Columns (owner-local indices) with zone maps.
    pub columns: Vec<usize>,
    pub mins: Vec<Vec<i32>>,
    pub maxs: Vec<Vec<i32>>,
}

impl BlockSet {
    /// Builds zone maps over `data` for block boundaries `starts` (including
    /// the final end offset). `tracked` lists the columns of `data` to index.
    pub fn build(data: &[&[i32]], starts: Vec<usize>, tracked: &[usize]) -> Result<Self> {
        let rows = data.first().map_or(0, |c| c.len());
        if starts.first() != Some(&0) || *starts.last().unwrap() != rows {
            return Err(Error::Invariant(format!(
                "block starts must span 0..{rows}"
            )));
        }
        if starts.windows(2).any(|w| w[0] >= w[1]) && rows > 0 {
            return Err(Error::Invariant("blocks must be non-empty".into()));
        }
        let mut mins = Vec::with_capacity(tracked.len());
        let mut maxs = Vec::with_capacity(tracked.len());
        for &c in tracked {
            let col = data.get(c).ok_or_else(|| {
                Error::config(format!("zone map requested for unknown column {c}"))
            })?;
            let (mn, mx): (Vec<i32>, Vec<i32>) = starts
                .windows(2)
                .map(|w| {
                    let s = &col[w[0]..w[1]];
                    let mn = *s.iter().min().expect("non-empty block");
                    let mx = *s.iter().max().expect("non-empty block");
                    (mn, mx)
                })
                .unzip();
            mins.push(mn);
            maxs.push(mx);
        }
        Ok(BlockSet {
            starts,
            columns: tracked.to_vec(),
            mins,
            maxs,
        })
    }

    /// Fixed-size blocks of at most `size` rows.
    pub fn fixed(data: &[&[i32]], size: usize, tracked: &[usize]) -> Result<Self> {
        let rows = data.first().map_or(0, |c| c.len());
        let mut starts: Vec<usize> = (0..rows).step_by(size.max(1)).collect();
        starts.push(rows);
        if rows == 0 {
            starts = vec![0];
        }
        Self::build(data, starts, tracked)
    }

    pub fn len(&self) -> usize {
        self.starts.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rows(&self, block: usize) -> Range<usize> {
        self.starts[block]..self.starts[block + 1]
    }

    pub fn block_rows(&self, block: usize) -> usize {
        self.starts[block + 1] - self.starts[block]
    }

    /// Position of `column` among the tracked columns.
    pub fn slot(&self, column: usize) -> Option<usize> {
        self.columns.iter().position(|c| *c == column)
    }

    pub fn zone(&self, slot: usize, block: usize) -> Zone {
        Zone {
            min: self.mins[slot][block],
            max: self.maxs[slot][block],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tight_bounds() {
        let x = [3, 9, 4, 5, 5, 5];
        let b = BlockSet::build(&[&x], vec![0, 3, 6], &[0]).unwrap();
        assert_eq!(b.zone(0, 0), Zone { min: 3, max: 9 });
        assert_eq!(b.zone(0, 1), Zone { min: 5, max: 5 });
    }

    #[test]
    fn unknown_column_is_config_error() {
        let x = [1, 2];
        let err = BlockSet::build(&[&x], vec![0, 2], &[3]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    proptest! {
        #[test]
        fn bounds_attained(values in proptest::collection::vec(any::<i32>(), 1..500), size in 1usize..64) {
            let b = BlockSet::fixed(&[&values], size, &[0]).unwrap();
            for blk in 0..b.len() {
                let rows = &values[b.rows(blk)];
                let z = b.zone(0, blk);
                prop_assert!(rows.iter().all(|v| z.min <= *v && *v <= z.max));
                prop_assert!(rows.contains(&z.min) && rows.contains(&z.max));
            }
        }
    }
}
