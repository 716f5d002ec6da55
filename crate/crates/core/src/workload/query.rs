use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::storage::{ColumnRef, Schema, TableId, ValueRange};

/// Largest grouping domain accepted; groups use dense accumulators.
pub const MAX_GROUPS: usize = 1 << 16;

/// Set of dimension ids as a bit mask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct DimSet(pub u64);

impl DimSet {
    pub const EMPTY: DimSet = DimSet(0);

    pub fn single(d: usize) -> Self {
        DimSet(1 << d)
    }

    pub fn from_dims(dims: impl IntoIterator<Item = usize>) -> Self {
        dims.into_iter().fold(DimSet::EMPTY, |s, d| s.with(d))
    }

    pub fn with(self, d: usize) -> Self {
        DimSet(self.0 | (1 << d))
    }

    pub fn contains(self, d: usize) -> bool {
        self.0 & (1 << d) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: DimSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let d = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(d)
        })
    }

    /// All non-empty subsets, in increasing mask order.
    pub fn nonempty_subsets(self) -> Vec<DimSet> {
        let mut out = Vec::with_capacity((1usize << self.len()).saturating_sub(1));
        let mut sub = self.0;
        while sub != 0 {
            out.push(DimSet(sub));
            sub = (sub - 1) & self.0;
        }
        out.reverse();
        out
    }

    pub fn display(self, schema: &Schema) -> String {
        let names: Vec<&str> = self
            .iter()
            .map(|d| schema.dimensions[d].name.as_str())
            .collect();
        format!("{{{}}}", names.join(","))
    }
}

impl fmt::Debug for DimSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Predicate {
    pub column: ColumnRef,
    pub range: ValueRange,
}

/// `SELECT SUM(sum) FROM fact ⋈ joins WHERE filters [GROUP BY group_by]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub name: String,
    pub joins: DimSet,
    pub filters: Vec<Predicate>,
    /// Fact column summed.
    pub sum: usize,
    /// Optional fact column grouped on.
    pub group_by: Option<usize>,
}

impl Query {
    pub fn fact_filters(&self) -> impl Iterator<Item = &Predicate> {
        self.filters.iter().filter(|p| p.column.table == TableId::Fact)
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        for d in self.joins.iter() {
            if d >= schema.dimensions.len() {
                return Err(Error::config(format!("query `{}` joins unknown dimension {d}", self.name)));
            }
        }
        for p in &self.filters {
            match p.column.table {
                TableId::Fact => {
                    if p.column.column >= schema.fact.columns.len() {
                        return Err(Error::config(format!("query `{}`: unknown fact column", self.name)));
                    }
                }
                TableId::Dim(d) => {
                    if !self.joins.contains(d) {
                        return Err(Error::config(format!(
                            "query `{}` filters `{}` without joining it",
                            self.name, schema.dimensions[d].name
                        )));
                    }
                    if p.column.column >= schema.dimensions[d].columns.len() {
                        return Err(Error::config(format!("query `{}`: unknown dimension column", self.name)));
                    }
                }
            }
            if p.range.lo >= p.range.hi {
                return Err(Error::config(format!("query `{}` has an empty range", self.name)));
            }
        }
        if self.sum >= schema.fact.columns.len() {
            return Err(Error::config(format!("query `{}`: unknown sum column", self.name)));
        }
        if let Some(g) = self.group_by {
            let c = schema.fact.columns.get(g).ok_or_else(|| {
                Error::config(format!("query `{}`: unknown group column", self.name))
            })?;
            if (c.hi as i64 - c.lo as i64) as usize > MAX_GROUPS {
                return Err(Error::config(format!(
                    "query `{}`: group column `{}` domain exceeds {MAX_GROUPS} values",
                    self.name, c.name
                )));
            }
        }
        Ok(())
    }

    /// Number of result slots (1 without grouping).
    pub fn group_count(&self, schema: &Schema) -> usize {
        match self.group_by {
            Some(g) => {
                let c = &schema.fact.columns[g];
                (c.hi as i64 - c.lo as i64) as usize
            }
            None => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub name: String,
    pub queries: Vec<Query>,
}

impl Batch {
    pub fn new(name: &str, queries: Vec<Query>) -> Self {
        Batch {
            name: name.to_string(),
            queries,
        }
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn validate(&self, schema: &Schema, width: usize) -> Result<()> {
        if self.queries.len() > width {
            return Err(Error::config(format!(
                "batch `{}` has {} queries, more than the query-set width {width}",
                self.name,
                self.queries.len()
            )));
        }
        self.queries.iter().try_for_each(|q| q.validate(schema))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Workload {
    pub schema: Schema,
    pub tuning: Vec<Batch>,
    pub runtime: Vec<Batch>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_of_three() {
        let s = DimSet::from_dims([1, 3, 4]);
        let subs = s.nonempty_subsets();
        assert_eq!(subs.len(), 7);
        assert!(subs.iter().all(|x| x.is_subset(s) && !x.is_empty()));
        assert_eq!(subs[0], DimSet::single(1));
        assert_eq!(*subs.last().unwrap(), s);
        assert!(DimSet::EMPTY.nonempty_subsets().is_empty());
    }

    #[test]
    fn iter_ascending() {
        let s = DimSet::from_dims([5, 0, 2]);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 2, 5]);
        assert_eq!(s.len(), 3);
    }
}
