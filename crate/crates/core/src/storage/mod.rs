//! Columnar star-schema storage, generation, layout and zone maps.

pub mod generate;
pub mod layout;
pub mod predicate;
pub mod schema;
pub mod snapshot;
pub mod table;
pub mod zonemap;

pub use generate::generate_database;
pub use layout::{reorganize, Layout, Partition, PartitionTree, SplitPredicate};
pub use predicate::{classify_predicate, Classification, ValueRange, Zone};
pub use schema::{ColumnRef, Schema, TableId};
pub use table::{ColumnarTable, Database};
pub use zonemap::BlockSet;
