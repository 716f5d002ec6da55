use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::storage::schema::{Schema, TableDef};
use crate::storage::table::{ColumnarTable, Database};

/// Generates every table with uniform column values.
///
/// Each column draws from its own ChaCha8 stream, so adding a column does not
/// perturb the values of the others. Foreign keys are uniform over the
/// referenced dimension's key range, which is how the schema encodes them.
pub fn generate_database(schema: &Schema, seed: u64) -> Result<Database> {
    schema.validate()?;
    let fact = generate_table(&schema.fact, seed, 0);
    let dims = schema
        .dimensions
        .iter()
        .enumerate()
        .map(|(d, def)| generate_table(def, seed, d as u64 + 1))
        .collect();
    Database::new(schema.clone(), fact, dims)
}

fn generate_table(def: &TableDef, seed: u64, table_index: u64) -> ColumnarTable {
    let columns = def
        .columns
        .iter()
        .enumerate()
        .map(|(c, col)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((table_index << 32) | c as u64);
            (0..def.rows)
                .map(|_| rng.random_range(col.lo..col.hi))
                .collect()
        })
        .collect();
    ColumnarTable {
        name: def.name.clone(),
        column_names: def.columns.iter().map(|c| c.name.clone()).collect(),
        columns,
        rows: def.rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(fact_rows: usize) -> Schema {
        let mut s = Schema::new("a", fact_rows);
        s.add_fact_column("f", 0, 100).unwrap();
        s.add_fact_column("x", 0, 1000).unwrap();
        let b = s.add_dimension("b", 100, "fk_b").unwrap();
        s.add_dim_column(b, "attr", 0, 100).unwrap();
        s.add_dimension("c", 100, "fk_c").unwrap();
        s
    }

    #[test]
    fn declared_sizes_and_key_ranges() {
        let db = generate_database(&schema(1000), 7).unwrap();
        assert_eq!(db.fact.rows, 1000);
        assert_eq!(db.dims.len(), 2);
        assert!(db.dims.iter().all(|d| d.rows == 100));
        for fk in &db.schema.foreign_keys {
            assert!(db.fact.column(fk.column).iter().all(|v| (0..100).contains(v)));
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let a = generate_database(&schema(1000), 7).unwrap();
        let b = generate_database(&schema(1000), 7).unwrap();
        assert_eq!(a, b);
        let c = generate_database(&schema(1000), 8).unwrap();
        assert_ne!(a.fact, c.fact);
    }

    #[test]
    fn deciles_select_ten_percent() {
        let db = generate_database(&schema(1_000_000), 11).unwrap();
        let f = db.fact.column(0);
        for k in 0..10 {
            let lo = 10 * k;
            let n = f.iter().filter(|v| (lo..lo + 10).contains(*v)).count();
            let frac = n as f64 / f.len() as f64;
            assert!((frac - 0.10).abs() <= 0.01, "decile {k}: {frac}");
        }
    }
}
