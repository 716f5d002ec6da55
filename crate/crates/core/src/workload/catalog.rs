use std::collections::{BTreeSet, HashMap};

use crate::workload::query::{Batch, DimSet};

/// A join subexpression rooted at the fact table, tracked per batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Subquery {
    pub id: usize,
    pub batch: usize,
    pub dims: DimSet,
    pub weight: u32,
}

#[derive(Clone, Debug, Default)]
pub struct SubqueryCatalog {
    pub entries: Vec<Subquery>,
    index: HashMap<(usize, DimSet), usize>,
}

impl SubqueryCatalog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, batch: usize, dims: DimSet) -> Option<usize> {
        self.index.get(&(batch, dims)).copied()
    }

    /// Catalog ids of every subquery a query contains.
    pub fn for_joins(&self, batch: usize, joins: DimSet) -> Vec<usize> {
        joins
            .nonempty_subsets()
            .into_iter()
            .filter_map(|s| self.lookup(batch, s))
            .collect()
    }
}

/// Weight = number of participating tables, fact table included.
pub fn table_count_weight(dims: DimSet) -> u32 {
    dims.len() as u32 + 1
}

pub fn enumerate_subqueries(batches: &[Batch]) -> SubqueryCatalog {
    enumerate_subqueries_with(batches, table_count_weight)
}

/// One entry per distinct non-empty join subset per batch. Entries within a
/// batch are ordered by mask so the catalog ignores query order.
pub fn enumerate_subqueries_with(batches: &[Batch], weight: fn(DimSet) -> u32) -> SubqueryCatalog {
    let mut cat = SubqueryCatalog::default();
    for (b, batch) in batches.iter().enumerate() {
        let sets: BTreeSet<DimSet> = batch
            .queries
            .iter()
            .flat_map(|q| q.joins.nonempty_subsets())
            .collect();
        for dims in sets {
            let id = cat.entries.len();
            cat.entries.push(Subquery {
                id,
                batch: b,
                dims,
                weight: weight(dims),
            });
            cat.index.insert((b, dims), id);
        }
    }
    cat
}
