//! Materialized join results stored per 1st-level partition.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::partitioner::{build_clustered, BlockParams, BucketAttr};
use crate::storage::snapshot::{Decoder, Encoder};
use crate::storage::{BlockSet, ColumnRef, Database, Partition, Schema, TableId};
use crate::workload::{Batch, DimSet};

pub const VIEW_MAGIC: &[u8; 4] = b"SCVW";

/// Bytes per stored value.
pub const VALUE_BYTES: usize = 4;

/// One partition's slab of a view.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViewPartition {
    pub rows: usize,
    /// One array per view column.
    pub data: Vec<Vec<i32>>,
    /// Partition-local fact row of each view row.
    pub lineage: Vec<u32>,
    /// Zone maps on every view column; slot i is column i.
    pub blocks: BlockSet,
}

impl ViewPartition {
    pub fn bytes(&self) -> usize {
        self.rows * self.data.len() * VALUE_BYTES
    }
}

/// Join of the fact table with `dims`, unfiltered, restricted to the
/// columns its tuning queries read downstream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaterializedView {
    pub subquery: usize,
    pub batch: usize,
    pub dims: DimSet,
    pub columns: Vec<ColumnRef>,
    pub partitions: BTreeMap<usize, ViewPartition>,
}

impl MaterializedView {
    pub fn column_slot(&self, c: ColumnRef) -> Option<usize> {
        self.columns.iter().position(|x| *x == c)
    }

    pub fn bytes(&self) -> usize {
        self.partitions.values().map(ViewPartition::bytes).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ViewStore {
    pub views: Vec<MaterializedView>,
}

impl ViewStore {
    pub fn is_empty(&self) -> bool {
        self.views.iter().all(|v| v.partitions.is_empty())
    }

    pub fn bytes(&self) -> usize {
        self.views.iter().map(MaterializedView::bytes).sum()
    }

    /// Views over exactly `dims` with a slab for `partition`.
    pub fn candidates(&self, dims: DimSet, partition: usize) -> impl Iterator<Item = (usize, &MaterializedView)> {
        self.views
            .iter()
            .enumerate()
            .filter(move |(_, v)| v.dims == dims && v.partitions.contains_key(&partition))
    }

    /// Checks that every slab matches its partition's row count.
    pub fn check_alignment(&self, partitions: &[Partition]) -> Result<()> {
        for (i, v) in self.views.iter().enumerate() {
            for (p, slab) in &v.partitions {
                let part = partitions.get(*p).ok_or_else(|| {
                    Error::exec(format!("view {i} has a slab for unknown partition {p}"))
                })?;
                if slab.rows != part.len() || slab.lineage.len() != slab.rows {
                    return Err(Error::exec(format!(
                        "view {i} and partition {p} are misaligned: {} view rows, {} partition rows",
                        slab.rows,
                        part.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Columns a view over `dims` must carry for the queries of `batch` that
/// contain it: fact filter, sum and group columns, filters on `dims`, and
/// foreign keys of dimensions joined later.
pub fn view_columns(schema: &Schema, batch: &Batch, dims: DimSet) -> Vec<ColumnRef> {
    let mut cols = Vec::new();
    for q in batch.queries.iter().filter(|q| dims.is_subset(q.joins)) {
        cols.extend(required_columns(schema, q, dims));
    }
    cols.sort_unstable();
    cols.dedup();
    cols
}

/// Columns query `q` reads from a view over `dims`.
pub fn required_columns(schema: &Schema, q: &crate::workload::Query, dims: DimSet) -> Vec<ColumnRef> {
    let mut cols = vec![ColumnRef::fact(q.sum)];
    if let Some(g) = q.group_by {
        cols.push(ColumnRef::fact(g));
    }
    for p in &q.filters {
        match p.column.table {
            TableId::Fact => cols.push(p.column),
            TableId::Dim(d) if dims.contains(d) => cols.push(p.column),
            TableId::Dim(_) => {}
        }
    }
    for d in q.joins.iter().filter(|d| !dims.contains(*d)) {
        cols.push(ColumnRef::fact(schema.fk_column(d)));
    }
    cols
}

/// Bucketing attributes over view columns from the predicates of `batch`
/// queries containing `dims`, most frequent attribute first.
pub fn view_bucket_attrs(batch: &Batch, dims: DimSet, columns: &[ColumnRef]) -> Vec<BucketAttr> {
    let mut acc: BTreeMap<usize, (usize, Vec<i64>)> = BTreeMap::new();
    for q in batch.queries.iter().filter(|q| dims.is_subset(q.joins)) {
        for p in &q.filters {
            if let Some(slot) = columns.iter().position(|c| *c == p.column) {
                let e = acc.entry(slot).or_default();
                e.0 += 1;
                e.1.extend([p.range.lo, p.range.hi]);
            }
        }
    }
    let mut v: Vec<(usize, usize, Vec<i64>)> = acc.into_iter().map(|(s, (n, b))| (s, n, b)).collect();
    v.sort_by_key(|(s, n, _)| (std::cmp::Reverse(*n), *s));
    v.into_iter()
        .map(|(s, _, b)| BucketAttr::new(s, b.into_iter().filter(|x| i32::try_from(*x).is_ok()).collect()))
        .collect()
}

/// Computes the join of `partition`'s fact rows with `dims`, keeping
/// `columns`, then clusters the rows into zone-mapped blocks.
pub fn materialize_partition(
    db: &Database,
    partition: &Partition,
    columns: &[ColumnRef],
    attrs: &[BucketAttr],
    p: BlockParams,
) -> Result<ViewPartition> {
    let range = partition.rows.clone();
    let rows = range.len();
    let data: Vec<Vec<i32>> = columns
        .iter()
        .map(|c| match c.table {
            TableId::Fact => db.fact.column(c.column)[range.clone()].to_vec(),
            TableId::Dim(d) => {
                let fk = &db.fact.column(db.schema.fk_column(d))[range.clone()];
                let vals = db.dims[d].column(c.column);
                fk.iter().map(|k| vals[*k as usize]).collect()
            }
        })
        .collect();
    if rows == 0 {
        return Ok(ViewPartition {
            rows: 0,
            data,
            lineage: Vec::new(),
            blocks: BlockSet {
                starts: vec![0],
                columns: (0..columns.len()).collect(),
                mins: vec![Vec::new(); columns.len()],
                maxs: vec![Vec::new(); columns.len()],
            },
        });
    }
    let refs: Vec<&[i32]> = data.iter().map(|c| c.as_slice()).collect();
    let (data, lineage, blocks) = if refs.is_empty() {
        let placeholder = vec![0i32; rows];
        let (order, starts) = crate::partitioner::cluster_rows(&[&placeholder], &[], p);
        let blocks = BlockSet {
            starts,
            columns: Vec::new(),
            mins: Vec::new(),
            maxs: Vec::new(),
        };
        (Vec::new(), order, blocks)
    } else {
        build_clustered(&refs, attrs, p)?
    };
    Ok(ViewPartition {
        rows,
        data,
        lineage,
        blocks,
    })
}

fn encode_column(c: ColumnRef) -> (u32, u32) {
    match c.table {
        TableId::Fact => (0, c.column as u32),
        TableId::Dim(d) => (d as u32 + 1, c.column as u32),
    }
}

fn decode_column(schema: &Schema, table: u32, column: u32) -> Result<ColumnRef> {
    let c = if table == 0 {
        ColumnRef::fact(column as usize)
    } else {
        ColumnRef::dim(table as usize - 1, column as usize)
    };
    let ok = match c.table {
        TableId::Fact => c.column < schema.fact.columns.len(),
        TableId::Dim(d) => d < schema.dimensions.len() && c.column < schema.dimensions[d].columns.len(),
    };
    if !ok {
        return Err(Error::data(format!("view references unknown column {table}.{column}")));
    }
    Ok(c)
}

/// Writes the store: header, then per view its identity, columns and slabs.
/// Zone maps are rebuilt on load.
pub fn write_views<W: Write>(w: W, store: &ViewStore, schema: &Schema) -> Result<W> {
    let mut e = Encoder::new(w);
    e.header(VIEW_MAGIC, schema)?;
    e.u32(store.views.len() as u32)?;
    for v in &store.views {
        e.u32(v.subquery as u32)?;
        e.u32(v.batch as u32)?;
        e.u64(v.dims.0)?;
        e.u32(v.columns.len() as u32)?;
        for c in &v.columns {
            let (t, col) = encode_column(*c);
            e.u32(t)?;
            e.u32(col)?;
        }
        e.u32(v.partitions.len() as u32)?;
        for (p, slab) in &v.partitions {
            e.u32(*p as u32)?;
            e.u64(slab.rows as u64)?;
            e.u32(slab.blocks.len() as u32)?;
            for s in &slab.blocks.starts {
                e.u64(*s as u64)?;
            }
            let lineage: Vec<i32> = slab.lineage.iter().map(|x| *x as i32).collect();
            e.i32s(&lineage)?;
            for col in &slab.data {
                e.i32s(col)?;
            }
        }
    }
    e.finish()
}

pub fn read_views<R: Read>(r: R, schema: &Schema) -> Result<ViewStore> {
    let mut d = Decoder::new(r);
    d.header(VIEW_MAGIC, schema)?;
    let n = d.u32()? as usize;
    let mut views = Vec::with_capacity(n);
    for _ in 0..n {
        let subquery = d.u32()? as usize;
        let batch = d.u32()? as usize;
        let dims = DimSet(d.u64()?);
        let ncols = d.u32()? as usize;
        let mut columns = Vec::with_capacity(ncols);
        for _ in 0..ncols {
            let t = d.u32()?;
            let c = d.u32()?;
            columns.push(decode_column(schema, t, c)?);
        }
        let nparts = d.u32()? as usize;
        let mut partitions = BTreeMap::new();
        for _ in 0..nparts {
            let p = d.u32()? as usize;
            let rows = d.u64()? as usize;
            let nblocks = d.u32()? as usize;
            let mut starts = Vec::with_capacity(nblocks + 1);
            for _ in 0..=nblocks {
                starts.push(d.u64()? as usize);
            }
            let lineage: Vec<u32> = d.i32s(rows)?.into_iter().map(|x| x as u32).collect();
            let mut data = Vec::with_capacity(ncols);
            for _ in 0..ncols {
                data.push(d.i32s(rows)?);
            }
            let refs: Vec<&[i32]> = data.iter().map(|c| c.as_slice()).collect();
            let tracked: Vec<usize> = (0..ncols).collect();
            let blocks = if rows == 0 || ncols == 0 {
                BlockSet {
                    starts,
                    columns: tracked.clone(),
                    mins: vec![Vec::new(); ncols],
                    maxs: vec![Vec::new(); ncols],
                }
            } else {
                BlockSet::build(&refs, starts, &tracked).map_err(|e| Error::data(format!("view slab {p}: {e}")))?
            };
            partitions.insert(
                p,
                ViewPartition {
                    rows,
                    data,
                    lineage,
                    blocks,
                },
            );
        }
        views.push(MaterializedView {
            subquery,
            batch,
            dims,
            columns,
            partitions,
        });
    }
    Ok(ViewStore { views })
}
