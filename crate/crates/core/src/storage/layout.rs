use std::fmt::Write as _;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::storage::schema::{ColumnRef, Schema};
use crate::storage::table::ColumnarTable;
use crate::storage::zonemap::BlockSet;

/// `column < value` goes left, everything else right.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SplitPredicate {
    pub column: usize,
    pub value: i32,
}

/// Binary tree of fact-column cuts; leaves are 1st-level partitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PartitionTree {
    Leaf {
        id: usize,
    },
    Split {
        split: SplitPredicate,
        left: Box<PartitionTree>,
        right: Box<PartitionTree>,
    },
}

/// Conjunction of `[lo, hi)` bounds inherited from ancestor cuts.
pub type Bounds = Vec<(usize, i64, i64)>;

impl PartitionTree {
    pub fn single() -> Self {
        PartitionTree::Leaf { id: 0 }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            PartitionTree::Leaf { .. } => 1,
            PartitionTree::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Numbers leaves left to right starting at zero.
    pub fn renumber(&mut self) {
        fn go(t: &mut PartitionTree, next: &mut usize) {
            match t {
                PartitionTree::Leaf { id } => {
                    *id = *next;
                    *next += 1;
                }
                PartitionTree::Split { left, right, .. } => {
                    go(left, next);
                    go(right, next);
                }
            }
        }
        go(self, &mut 0);
    }

    pub fn route(&self, value_of: impl Fn(usize) -> i32) -> usize {
        let mut t = self;
        loop {
            match t {
                PartitionTree::Leaf { id } => return *id,
                PartitionTree::Split { split, left, right } => {
                    t = if value_of(split.column) < split.value {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// Ancestor-cut bounds per leaf, indexed by leaf id.
    pub fn leaf_bounds(&self) -> Vec<Bounds> {
        fn go(t: &PartitionTree, acc: &mut Bounds, out: &mut Vec<(usize, Bounds)>) {
            match t {
                PartitionTree::Leaf { id } => out.push((*id, acc.clone())),
                PartitionTree::Split { split, left, right } => {
                    acc.push((split.column, i64::MIN, split.value as i64));
                    go(left, acc, out);
                    acc.pop();
                    acc.push((split.column, split.value as i64, i64::MAX));
                    go(right, acc, out);
                    acc.pop();
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out.sort_by_key(|(id, _)| *id);
        out.into_iter().map(|(_, b)| b).collect()
    }

    /// Indented text: `split <table.col> < <v>` lines followed by their two
    /// subtrees, and `leaf <id> rows=<n>` lines.
    pub fn to_text(&self, schema: &Schema, leaf_rows: Option<&[usize]>) -> String {
        fn go(
            t: &PartitionTree,
            depth: usize,
            schema: &Schema,
            rows: Option<&[usize]>,
            out: &mut String,
        ) {
            let pad = "  ".repeat(depth);
            match t {
                PartitionTree::Leaf { id } => {
                    let _ = match rows.and_then(|r| r.get(*id)) {
                        Some(n) => writeln!(out, "{pad}leaf {id} rows={n}"),
                        None => writeln!(out, "{pad}leaf {id}"),
                    };
                }
                PartitionTree::Split { split, left, right } => {
                    let name = schema.column_name(ColumnRef::fact(split.column));
                    let _ = writeln!(out, "{pad}split {name} < {}", split.value);
                    go(left, depth + 1, schema, rows, out);
                    go(right, depth + 1, schema, rows, out);
                }
            }
        }
        let mut out = String::new();
        go(self, 0, schema, leaf_rows, &mut out);
        out
    }

    pub fn from_text(text: &str, schema: &Schema) -> Result<Self> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .collect();
        let mut pos = 0;
        let tree = parse_node(&lines, &mut pos, 0, schema)?;
        if pos != lines.len() {
            return Err(Error::data(format!(
                "partition tree: trailing content at line {}",
                lines[pos].0 + 1
            )));
        }
        Ok(tree)
    }
}

fn parse_node(
    lines: &[(usize, &str)],
    pos: &mut usize,
    depth: usize,
    schema: &Schema,
) -> Result<PartitionTree> {
    let (no, line) = *lines
        .get(*pos)
        .ok_or_else(|| Error::data("partition tree: unexpected end of input"))?;
    let indent = line.len() - line.trim_start().len();
    if indent != depth * 2 {
        return Err(Error::data(format!("partition tree: bad indentation at line {}", no + 1)));
    }
    *pos += 1;
    let toks: Vec<&str> = line.split_whitespace().collect();
    let bad = || Error::data(format!("partition tree: malformed line {}", no + 1));
    match toks.as_slice() {
        ["leaf", id, ..] => Ok(PartitionTree::Leaf {
            id: id.parse().map_err(|_| bad())?,
        }),
        ["split", col, "<", value] => {
            let c = schema.resolve_column(col).map_err(|_| bad())?;
            if c.table != crate::storage::schema::TableId::Fact {
                return Err(bad());
            }
            let value = value.parse().map_err(|_| bad())?;
            let left = parse_node(lines, pos, depth + 1, schema)?;
            let right = parse_node(lines, pos, depth + 1, schema)?;
            Ok(PartitionTree::Split {
                split: SplitPredicate {
                    column: c.column,
                    value,
                },
                left: Box::new(left),
                right: Box::new(right),
            })
        }
        _ => Err(bad()),
    }
}

/// Clusters rows leaf by leaf, keeping the original order inside each leaf.
/// Returns the reorganized table and the map old row id -> new row id.
pub fn reorganize(table: &ColumnarTable, tree: &PartitionTree) -> (ColumnarTable, Vec<u32>) {
    let leaves: Vec<usize> = (0..table.rows)
        .map(|r| tree.route(|c| table.columns[c][r]))
        .collect();
    let mut counts = vec![0usize; tree.leaf_count()];
    for &l in &leaves {
        counts[l] += 1;
    }
    let mut next: Vec<usize> = counts
        .iter()
        .scan(0, |acc, n| {
            let s = *acc;
            *acc += n;
            Some(s)
        })
        .collect();
    let perm: Vec<u32> = leaves
        .iter()
        .map(|&l| {
            let p = next[l];
            next[l] += 1;
            p as u32
        })
        .collect();
    (table.permuted(&perm), perm)
}

/// A 1st-level partition of the reorganized fact table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub id: usize,
    pub rows: Range<usize>,
    pub bounds: Bounds,
    /// Blocks with row ranges relative to `rows.start`; zone maps on all
    /// fact columns.
    pub blocks: BlockSet,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn columns<'a>(&self, fact: &'a ColumnarTable) -> Vec<&'a [i32]> {
        fact.columns.iter().map(|c| &c[self.rows.clone()]).collect()
    }

    /// Rebuilds zone maps over the current block boundaries for `attributes`.
    pub fn build_zone_maps(&mut self, fact: &ColumnarTable, attributes: &[&str]) -> Result<()> {
        let tracked = attributes
            .iter()
            .map(|a| {
                fact.column_names
                    .iter()
                    .position(|n| n == a)
                    .ok_or_else(|| Error::config(format!("unknown attribute `{a}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let data = self.columns(fact);
        self.blocks = BlockSet::build(&data, self.blocks.starts.clone(), &tracked)?;
        Ok(())
    }
}

/// Physical organization of the fact table after tuning.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub tree: PartitionTree,
    pub partitions: Vec<Partition>,
}

impl Layout {
    pub fn total_rows(&self) -> usize {
        self.partitions.iter().map(Partition::len).sum()
    }

    pub fn total_blocks(&self) -> usize {
        self.partitions.iter().map(|p| p.blocks.len()).sum()
    }
}
