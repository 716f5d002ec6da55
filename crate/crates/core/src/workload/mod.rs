//! Queries, batches, subquery catalogs and sampled access tracking.

pub mod access;
pub mod catalog;
pub mod parse;
pub mod query;

pub use access::{record_access_matrix, AccessMatrix};
pub use catalog::{enumerate_subqueries, Subquery, SubqueryCatalog};
pub use parse::{parse_workload, parse_workload_with};
pub use query::{Batch, DimSet, Predicate, Query, Workload};
