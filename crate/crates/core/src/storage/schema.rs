use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Maximum number of dimensions; table sets are 64-bit masks.
pub const MAX_DIMENSIONS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TableId {
    Fact,
    Dim(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: TableId,
    pub column: usize,
}

impl ColumnRef {
    pub fn fact(column: usize) -> Self {
        ColumnRef {
            table: TableId::Fact,
            column,
        }
    }

    pub fn dim(dim: usize, column: usize) -> Self {
        ColumnRef {
            table: TableId::Dim(dim),
            column,
        }
    }
}

/// Column with a half-open value domain `[lo, hi)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    pub lo: i32,
    pub hi: i32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDef {
    pub name: String,
    pub rows: usize,
    pub columns: Vec<ColumnDef>,
}

impl TableDef {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignKey {
    /// Fact column holding the key.
    pub column: usize,
    pub dimension: usize,
}

/// Star schema: one fact table, dimensions keyed by the dense range `[0, rows)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub fact: TableDef,
    pub dimensions: Vec<TableDef>,
    pub foreign_keys: Vec<ForeignKey>,
}

impl Schema {
    pub fn new(fact_name: &str, rows: usize) -> Self {
        Schema {
            fact: TableDef {
                name: fact_name.to_string(),
                rows,
                columns: Vec::new(),
            },
            dimensions: Vec::new(),
            foreign_keys: Vec::new(),
        }
    }

    pub fn add_fact_column(&mut self, name: &str, lo: i32, hi: i32) -> Result<usize> {
        check_domain(name, lo, hi)?;
        if self.fact.column_index(name).is_some() {
            return Err(Error::config(format!("duplicate fact column `{name}`")));
        }
        self.fact.columns.push(ColumnDef {
            name: name.to_string(),
            lo,
            hi,
        });
        Ok(self.fact.columns.len() - 1)
    }

    /// Adds a dimension and its foreign-key column on the fact table.
    pub fn add_dimension(&mut self, name: &str, rows: usize, key_column: &str) -> Result<usize> {
        if self.resolve_table(name).is_some() {
            return Err(Error::config(format!("duplicate table `{name}`")));
        }
        if self.dimensions.len() == MAX_DIMENSIONS {
            return Err(Error::config(format!(
                "at most {MAX_DIMENSIONS} dimensions are supported"
            )));
        }
        if rows == 0 || rows > i32::MAX as usize {
            return Err(Error::config(format!(
                "dimension `{name}` row count {rows} out of range"
            )));
        }
        let column = self.add_fact_column(key_column, 0, rows as i32)?;
        self.dimensions.push(TableDef {
            name: name.to_string(),
            rows,
            columns: Vec::new(),
        });
        let dimension = self.dimensions.len() - 1;
        self.foreign_keys.push(ForeignKey { column, dimension });
        Ok(dimension)
    }

    pub fn add_dim_column(&mut self, dim: usize, name: &str, lo: i32, hi: i32) -> Result<usize> {
        check_domain(name, lo, hi)?;
        let table = self
            .dimensions
            .get_mut(dim)
            .ok_or_else(|| Error::config(format!("unknown dimension id {dim}")))?;
        if table.column_index(name).is_some() {
            return Err(Error::config(format!(
                "duplicate column `{}.{name}`",
                table.name
            )));
        }
        table.columns.push(ColumnDef {
            name: name.to_string(),
            lo,
            hi,
        });
        Ok(table.columns.len() - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fact.rows == 0 {
            return Err(Error::config("fact table has zero rows"));
        }
        if self.fact.rows > u32::MAX as usize {
            return Err(Error::config("fact table exceeds 2^32 rows"));
        }
        if self.dimensions.len() > MAX_DIMENSIONS {
            return Err(Error::config("too many dimensions"));
        }
        for c in &self.fact.columns {
            check_domain(&c.name, c.lo, c.hi)?;
        }
        let mut seen = vec![0usize; self.dimensions.len()];
        for fk in &self.foreign_keys {
            let dim = self.dimensions.get(fk.dimension).ok_or_else(|| {
                Error::config(format!("dangling foreign key to dimension {}", fk.dimension))
            })?;
            let col = self.fact.columns.get(fk.column).ok_or_else(|| {
                Error::config(format!("foreign key column {} does not exist", fk.column))
            })?;
            if col.lo != 0 || col.hi as i64 != dim.rows as i64 {
                return Err(Error::config(format!(
                    "foreign key `{}` domain must be [0, {})",
                    col.name, dim.rows
                )));
            }
            seen[fk.dimension] += 1;
        }
        for (d, table) in self.dimensions.iter().enumerate() {
            if table.rows == 0 {
                return Err(Error::config(format!("dimension `{}` has zero rows", table.name)));
            }
            if seen[d] != 1 {
                return Err(Error::config(format!(
                    "dimension `{}` must be referenced by exactly one foreign key",
                    table.name
                )));
            }
            for c in &table.columns {
                check_domain(&c.name, c.lo, c.hi)?;
            }
        }
        Ok(())
    }

    pub fn table(&self, id: TableId) -> &TableDef {
        match id {
            TableId::Fact => &self.fact,
            TableId::Dim(d) => &self.dimensions[d],
        }
    }

    pub fn column(&self, c: ColumnRef) -> &ColumnDef {
        &self.table(c.table).columns[c.column]
    }

    pub fn resolve_table(&self, name: &str) -> Option<TableId> {
        if self.fact.name == name {
            return Some(TableId::Fact);
        }
        self.dimensions
            .iter()
            .position(|d| d.name == name)
            .map(TableId::Dim)
    }

    /// Resolves `table.column`.
    pub fn resolve_column(&self, qualified: &str) -> Result<ColumnRef> {
        let (t, c) = qualified
            .split_once('.')
            .ok_or_else(|| Error::config(format!("expected table.column, got `{qualified}`")))?;
        let table = self
            .resolve_table(t)
            .ok_or_else(|| Error::config(format!("unknown table `{t}`")))?;
        let column = self
            .table(table)
            .column_index(c)
            .ok_or_else(|| Error::config(format!("unknown attribute `{qualified}`")))?;
        Ok(ColumnRef { table, column })
    }

    pub fn column_name(&self, c: ColumnRef) -> String {
        format!("{}.{}", self.table(c.table).name, self.column(c).name)
    }

    /// Fact column holding the key of `dim`.
    pub fn fk_column(&self, dim: usize) -> usize {
        self.foreign_keys
            .iter()
            .find(|fk| fk.dimension == dim)
            .map(|fk| fk.column)
            .expect("validated schema has a key per dimension")
    }

    pub fn is_fk_column(&self, column: usize) -> bool {
        self.foreign_keys.iter().any(|fk| fk.column == column)
    }

    /// Eight-byte digest of the canonical schema text; used in snapshot headers.
    pub fn hash(&self) -> [u8; 8] {
        let digest = Sha256::digest(self.to_string().as_bytes());
        let mut out = [0u8; 8];
        out.copy_from_slice(&digest[..8]);
        out
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "fact {} rows={}", self.fact.name, self.fact.rows)?;
        for c in &self.fact.columns {
            writeln!(f, "  {} {}..{}", c.name, c.lo, c.hi)?;
        }
        for (d, t) in self.dimensions.iter().enumerate() {
            let fk = &self.fact.columns[self.fk_column(d)].name;
            writeln!(f, "dimension {} rows={} key={}", t.name, t.rows, fk)?;
            for c in &t.columns {
                writeln!(f, "  {} {}..{}", c.name, c.lo, c.hi)?;
            }
        }
        Ok(())
    }
}

fn check_domain(name: &str, lo: i32, hi: i32) -> Result<()> {
    if lo >= hi {
        return Err(Error::config(format!(
            "column `{name}` has empty domain [{lo}, {hi})"
        )));
    }
    Ok(())
}
