use crate::error::{Error, Result};
use crate::storage::schema::{ColumnRef, Schema, TableDef, TableId};

/// Column-major table of 32-bit integers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnarTable {
    pub name: String,
    pub column_names: Vec<String>,
    pub columns: Vec<Vec<i32>>,
    pub rows: usize,
}

impl ColumnarTable {
    pub fn new(name: &str, column_names: Vec<String>, columns: Vec<Vec<i32>>) -> Result<Self> {
        if column_names.len() != columns.len() {
            return Err(Error::data(format!(
                "table `{name}`: {} names for {} columns",
                column_names.len(),
                columns.len()
            )));
        }
        let rows = columns.first().map_or(0, Vec::len);
        if let Some((i, _)) = columns.iter().enumerate().find(|(_, c)| c.len() != rows) {
            return Err(Error::data(format!(
                "table `{name}`: column `{}` length differs",
                column_names[i]
            )));
        }
        Ok(ColumnarTable {
            name: name.to_string(),
            column_names,
            columns,
            rows,
        })
    }

    pub fn empty_like(def: &TableDef) -> Self {
        ColumnarTable {
            name: def.name.clone(),
            column_names: def.columns.iter().map(|c| c.name.clone()).collect(),
            columns: vec![Vec::new(); def.columns.len()],
            rows: 0,
        }
    }

    pub fn column(&self, i: usize) -> &[i32] {
        &self.columns[i]
    }

    pub fn column_by_name(&self, name: &str) -> Option<&[i32]> {
        self.column_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    /// Reorders rows so that old row `r` lands at `perm[r]`.
    pub fn permuted(&self, perm: &[u32]) -> Self {
        assert_eq!(perm.len(), self.rows, "permutation length mismatch");
        let columns = self
            .columns
            .iter()
            .map(|col| {
                let mut out = vec![0i32; col.len()];
                for (old, &new) in perm.iter().enumerate() {
                    out[new as usize] = col[old];
                }
                out
            })
            .collect();
        ColumnarTable {
            name: self.name.clone(),
            column_names: self.column_names.clone(),
            columns,
            rows: self.rows,
        }
    }
}

/// A star-schema instance: the fact table plus its dimensions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Database {
    pub schema: Schema,
    pub fact: ColumnarTable,
    pub dims: Vec<ColumnarTable>,
}

impl Database {
    pub fn new(schema: Schema, fact: ColumnarTable, dims: Vec<ColumnarTable>) -> Result<Self> {
        schema.validate()?;
        check_shape(&schema.fact, &fact)?;
        if dims.len() != schema.dimensions.len() {
            return Err(Error::data("dimension table count does not match schema"));
        }
        for (def, t) in schema.dimensions.iter().zip(&dims) {
            check_shape(def, t)?;
        }
        Ok(Database { schema, fact, dims })
    }

    pub fn table(&self, id: TableId) -> &ColumnarTable {
        match id {
            TableId::Fact => &self.fact,
            TableId::Dim(d) => &self.dims[d],
        }
    }

    pub fn column(&self, c: ColumnRef) -> &[i32] {
        self.table(c.table).column(c.column)
    }

    /// Replaces the fact table with a row permutation of itself.
    pub fn with_fact_permuted(&self, perm: &[u32]) -> Database {
        Database {
            schema: self.schema.clone(),
            fact: self.fact.permuted(perm),
            dims: self.dims.clone(),
        }
    }
}

fn check_shape(def: &TableDef, t: &ColumnarTable) -> Result<()> {
    if t.rows != def.rows || t.columns.len() != def.columns.len() {
        return Err(Error::data(format!(
            "table `{}` shape {}x{} does not match schema {}x{}",
            def.name,
            t.rows,
            t.columns.len(),
            def.rows,
            def.columns.len()
        )));
    }
    for (c, col) in def.columns.iter().zip(&t.columns) {
        if let Some(v) = col.iter().find(|v| **v < c.lo || **v >= c.hi) {
            return Err(Error::data(format!(
                "value {v} in `{}.{}` outside domain [{}, {})",
                def.name, c.name, c.lo, c.hi
            )));
        }
    }
    Ok(())
}
