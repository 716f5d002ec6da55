//! Vectorized execution of a global plan over one partition.

use crate::error::{Error, Result};
use crate::executor::skip::{BlockSkip, SkipAnalysis};
use crate::globalplan::dimstate::{DimState, PredicateIndex};
use crate::globalplan::plan::{GlobalPlan, NodeKind};
use crate::queryset::{and_into, any, iter_bits};
use crate::storage::{BlockSet, ColumnRef, Schema};
use crate::workload::Batch;

/// Per-query result slots (one slot without grouping).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partials {
    pub values: Vec<Vec<i64>>,
}

impl Partials {
    pub fn new(batch: &Batch, schema: &Schema) -> Self {
        Partials {
            values: batch
                .queries
                .iter()
                .map(|q| vec![0i64; q.group_count(schema)])
                .collect(),
        }
    }

    pub fn merge(&mut self, other: &Partials) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExecCounters {
    pub base_rows: u64,
    pub view_rows: u64,
    pub scanned_blocks: u64,
    pub skipped_blocks: u64,
    /// Row-by-attribute predicate index lookups.
    pub filter_evals: u64,
    pub probe_tuples: u64,
    pub agg_updates: u64,
}

impl ExecCounters {
    pub fn add(&mut self, o: &ExecCounters) {
        self.base_rows += o.base_rows;
        self.view_rows += o.view_rows;
        self.scanned_blocks += o.scanned_blocks;
        self.skipped_blocks += o.skipped_blocks;
        self.filter_evals += o.filter_evals;
        self.probe_tuples += o.probe_tuples;
        self.agg_updates += o.agg_updates;
    }
}

/// Input of one source node: its columns, blocks and block analysis.
pub struct SourceData<'a> {
    pub node: usize,
    pub columns: Vec<(ColumnRef, &'a [i32])>,
    pub blocks: &'a BlockSet,
    pub skip: &'a SkipAnalysis,
    /// View sources apply their runtime filters before feeding successors.
    pub is_view: bool,
}

impl<'a> SourceData<'a> {
    fn column(&self, c: ColumnRef, schema: &Schema) -> Result<&'a [i32]> {
        self.columns
            .iter()
            .find(|(r, _)| *r == c)
            .map(|(_, s)| *s)
            .ok_or_else(|| {
                Error::exec(format!(
                    "source {} lacks column `{}`",
                    self.node,
                    schema.column_name(c)
                ))
            })
    }
}

enum Op<'a> {
    Source,
    Filter {
        values: &'a [i32],
        column: ColumnRef,
        index: &'a PredicateIndex,
    },
    Probe {
        keys: &'a [i32],
        table: &'a [u64],
    },
}

struct Agg<'a> {
    query: usize,
    values: &'a [i32],
    group: Option<(&'a [i32], i64)>,
}

struct Exec<'a> {
    op: Op<'a>,
    mask: Vec<u64>,
    children: Vec<Exec<'a>>,
    aggs: Vec<Agg<'a>>,
    agg_mask: Vec<u64>,
}

struct Vector {
    rows: Vec<u32>,
    /// One query set per row, or a single shared set when `uniform`.
    qs: Vec<u64>,
    uniform: bool,
}

struct Ctx<'a, 'b> {
    words: usize,
    block: &'b BlockSkip,
    out: &'b mut Partials,
    counters: &'b mut ExecCounters,
    _p: std::marker::PhantomData<&'a ()>,
}

fn compile<'a>(
    plan: &GlobalPlan,
    node: usize,
    batch: &Batch,
    schema: &Schema,
    state: &'a DimState,
    src: &SourceData<'a>,
) -> Result<Exec<'a>> {
    let n = &plan.nodes[node];
    let op = match n.kind {
        NodeKind::Scan | NodeKind::ViewScan => Op::Source,
        NodeKind::Filter { column } => {
            let c = ColumnRef::fact(column);
            Op::Filter {
                values: src.column(c, schema)?,
                column: c,
                index: state
                    .index(c)
                    .ok_or_else(|| Error::Invariant(format!("no predicate index for {c:?}")))?,
            }
        }
        NodeKind::Probe { dim } => Op::Probe {
            keys: src.column(ColumnRef::fact(schema.fk_column(dim)), schema)?,
            table: state
                .table(dim)
                .ok_or_else(|| Error::Invariant(format!("dimension {dim} has no state")))?,
        },
        NodeKind::Aggregate { .. } => {
            return Err(Error::Invariant("aggregate compiled as operator".into()))
        }
    };
    let mut children = Vec::new();
    let mut aggs = Vec::new();
    let mut agg_mask = vec![0u64; plan.words];
    for &s in &n.successors {
        match plan.nodes[s].kind {
            NodeKind::Aggregate { query } => {
                let q = &batch.queries[query];
                let group = match q.group_by {
                    Some(g) => Some((
                        src.column(ColumnRef::fact(g), schema)?,
                        schema.fact.columns[g].lo as i64,
                    )),
                    None => None,
                };
                aggs.push(Agg {
                    query,
                    values: src.column(ColumnRef::fact(q.sum), schema)?,
                    group,
                });
                agg_mask[query / 64] |= 1 << (query % 64);
            }
            _ => children.push(compile(plan, s, batch, schema, state, src)?),
        }
    }
    Ok(Exec {
        op,
        mask: n.query_set.words().to_vec(),
        children,
        aggs,
        agg_mask,
    })
}

/// Keeps rows whose query set survives `entry(row)`.
fn apply<'x>(v: &mut Vector, words: usize, entry: impl Fn(usize) -> &'x [u64]) {
    let n = v.rows.len();
    let mut out_qs = Vec::with_capacity(n * words);
    let mut keep = 0;
    for i in 0..n {
        let r = v.rows[i] as usize;
        let e = entry(r);
        let base = if v.uniform { 0 } else { i * words };
        let start = out_qs.len();
        let mut acc = 0u64;
        for w in 0..words {
            let x = v.qs[base + w] & e[w];
            acc |= x;
            out_qs.push(x);
        }
        if acc != 0 {
            v.rows[keep] = v.rows[i];
            keep += 1;
        } else {
            out_qs.truncate(start);
        }
    }
    v.rows.truncate(keep);
    v.qs = out_qs;
    v.uniform = false;
}

fn restrict(v: &Vector, mask: &[u64], words: usize) -> Vector {
    if v.uniform {
        let mut qs = v.qs.clone();
        and_into(&mut qs, mask);
        let rows = if any(&qs) { v.rows.clone() } else { Vec::new() };
        return Vector {
            rows,
            qs,
            uniform: true,
        };
    }
    let mut rows = Vec::with_capacity(v.rows.len());
    let mut qs = Vec::with_capacity(v.qs.len());
    for (i, &r) in v.rows.iter().enumerate() {
        let start = qs.len();
        let mut acc = 0u64;
        for w in 0..words {
            let x = v.qs[i * words + w] & mask[w];
            acc |= x;
            qs.push(x);
        }
        if acc != 0 {
            rows.push(r);
        } else {
            qs.truncate(start);
        }
    }
    Vector {
        rows,
        qs,
        uniform: false,
    }
}

fn aggregate(e: &Exec<'_>, v: &Vector, ctx: &mut Ctx<'_, '_>) {
    if e.aggs.is_empty() {
        return;
    }
    let words = ctx.words;
    let find = |q: usize| e.aggs.iter().find(|a| a.query == q).expect("aggregate registered");
    if v.uniform {
        let mut bits = v.qs.clone();
        and_into(&mut bits, &e.agg_mask);
        let mut cached: Option<(*const i32, i64)> = None;
        for q in iter_bits(&bits) {
            let a = find(q);
            ctx.counters.agg_updates += v.rows.len() as u64;
            match a.group {
                None => {
                    let sum = match cached {
                        Some((p, s)) if p == a.values.as_ptr() => s,
                        _ => {
                            let s: i64 = v.rows.iter().map(|r| a.values[*r as usize] as i64).sum();
                            cached = Some((a.values.as_ptr(), s));
                            s
                        }
                    };
                    ctx.out.values[q][0] += sum;
                }
                Some((g, lo)) => {
                    let slots = &mut ctx.out.values[q];
                    for &r in &v.rows {
                        let r = r as usize;
                        slots[(g[r] as i64 - lo) as usize] += a.values[r] as i64;
                    }
                }
            }
        }
        return;
    }
    for (i, &r) in v.rows.iter().enumerate() {
        let r = r as usize;
        let qs = &v.qs[i * words..(i + 1) * words];
        for w in 0..words {
            let mut m = qs[w] & e.agg_mask[w];
            while m != 0 {
                let q = w * 64 + m.trailing_zeros() as usize;
                m &= m - 1;
                let a = find(q);
                ctx.counters.agg_updates += 1;
                let slot = match a.group {
                    None => 0,
                    Some((g, lo)) => (g[r] as i64 - lo) as usize,
                };
                ctx.out.values[q][slot] += a.values[r] as i64;
            }
        }
    }
}

fn run(e: &Exec<'_>, mut v: Vector, ctx: &mut Ctx<'_, '_>) {
    let words = ctx.words;
    match &e.op {
        Op::Source => {}
        Op::Filter {
            values,
            column,
            index,
        } => {
            if ctx.block.needs(*column) {
                ctx.counters.filter_evals += v.rows.len() as u64;
                apply(&mut v, words, |r| index.lookup(values[r]));
            }
        }
        Op::Probe { keys, table } => {
            ctx.counters.probe_tuples += v.rows.len() as u64;
            apply(&mut v, words, |r| &table[keys[r] as usize * words..(keys[r] as usize + 1) * words]);
        }
    }
    if v.rows.is_empty() {
        return;
    }
    aggregate(e, &v, ctx);
    for child in &e.children {
        let cv = restrict(&v, &child.mask, words);
        if !cv.rows.is_empty() {
            run(child, cv, ctx);
        }
    }
}

/// Executes every source of `plan` over its blocks, adding per-query sums to
/// `out`. Blocks whose surviving queries miss the source's query set are
/// skipped.
pub fn execute_plan(
    plan: &GlobalPlan,
    batch: &Batch,
    schema: &Schema,
    state: &DimState,
    sources: &[SourceData<'_>],
    vector_size: usize,
    out: &mut Partials,
    counters: &mut ExecCounters,
) -> Result<()> {
    let words = plan.words;
    for src in sources {
        let node = &plan.nodes[src.node];
        if !matches!(node.kind, NodeKind::Scan | NodeKind::ViewScan) {
            return Err(Error::Invariant(format!("node {} is not a source", src.node)));
        }
        let root = compile(plan, src.node, batch, schema, state, src)?;
        let mut view_filters: Vec<(ColumnRef, &[i32], &PredicateIndex)> = Vec::new();
        if src.is_view {
            for (c, values) in &src.columns {
                if let Some(idx) = state.index(*c) {
                    view_filters.push((*c, values, idx));
                }
            }
        }
        for (b, bs) in src.skip.blocks.iter().enumerate() {
            let mut qs = bs.qs.words().to_vec();
            if !and_into(&mut qs, node.query_set.words()) {
                counters.skipped_blocks += 1;
                continue;
            }
            counters.scanned_blocks += 1;
            let range = src.blocks.rows(b);
            let mut ctx = Ctx {
                words,
                block: bs,
                out,
                counters,
                _p: std::marker::PhantomData,
            };
            let mut start = range.start;
            while start < range.end {
                let end = (start + vector_size).min(range.end);
                let mut v = Vector {
                    rows: (start as u32..end as u32).collect(),
                    qs: qs.clone(),
                    uniform: true,
                };
                if src.is_view {
                    ctx.counters.view_rows += v.rows.len() as u64;
                    for (c, values, idx) in &view_filters {
                        if bs.needs(*c) && !v.rows.is_empty() {
                            ctx.counters.filter_evals += v.rows.len() as u64;
                            apply(&mut v, words, |r| idx.lookup(values[r]));
                        }
                    }
                } else {
                    ctx.counters.base_rows += v.rows.len() as u64;
                }
                if !v.rows.is_empty() {
                    run(&root, v, &mut ctx);
                }
                start = end;
            }
        }
    }
    Ok(())
}
