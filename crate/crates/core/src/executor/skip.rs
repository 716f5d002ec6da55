use crate::queryset::QuerySet;
use crate::storage::{classify_predicate, BlockSet, Classification, ColumnRef, Partition, TableId};
use crate::workload::Batch;

/// Outcome of zone-map analysis for one block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSkip {
    /// Queries that may have qualifying rows in the block.
    pub qs: QuerySet,
    /// Attributes that still need per-row evaluation, with the number of
    /// ambivalent predicates on each. Sorted by column.
    pub ambivalent: Vec<(ColumnRef, u32)>,
}

impl BlockSkip {
    pub fn is_skipped(&self) -> bool {
        self.qs.is_empty()
    }

    pub fn needs(&self, column: ColumnRef) -> bool {
        self.ambivalent.iter().any(|(c, _)| *c == column)
    }

    pub fn ambivalent_count(&self, column: ColumnRef) -> u32 {
        self.ambivalent
            .iter()
            .find(|(c, _)| *c == column)
            .map_or(0, |(_, n)| *n)
    }

    /// Distinct attributes with runtime filters.
    pub fn runtime_filters(&self) -> usize {
        self.ambivalent.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkipAnalysis {
    pub blocks: Vec<BlockSkip>,
    pub union: QuerySet,
    pub skipped_blocks: usize,
    /// AlwaysTrue (block, query, predicate) triples, i.e. filters elided.
    pub skipped_filters: usize,
}

/// Classifies every predicate of every candidate query on every block.
///
/// `slot_of` maps a column to its zone-map slot; predicates on columns
/// without a slot are left to downstream operators. With `skipping` off every
/// block survives and every evaluable predicate counts as ambivalent.
pub fn analyze_blocks(
    blocks: &BlockSet,
    slot_of: &dyn Fn(ColumnRef) -> Option<usize>,
    batch: &Batch,
    candidates: &QuerySet,
    skipping: bool,
) -> SkipAnalysis {
    let words = candidates.word_count();
    let preds: Vec<(usize, ColumnRef, usize, crate::storage::ValueRange)> = candidates
        .iter()
        .flat_map(|q| {
            batch.queries[q]
                .filters
                .iter()
                .filter_map(move |p| slot_of(p.column).map(|s| (q, p.column, s, p.range)))
        })
        .collect();
    let mut out = SkipAnalysis {
        blocks: Vec::with_capacity(blocks.len()),
        union: QuerySet::empty(words),
        skipped_blocks: 0,
        skipped_filters: 0,
    };
    let mut amb: Vec<(usize, ColumnRef)> = Vec::new();
    for b in 0..blocks.len() {
        let mut qs = candidates.clone();
        amb.clear();
        let mut always_true: Vec<usize> = Vec::new();
        for &(q, col, slot, range) in &preds {
            if !skipping {
                amb.push((q, col));
                continue;
            }
            match classify_predicate(blocks.zone(slot, b), range) {
                Classification::AlwaysFalse => qs.remove(q),
                Classification::AlwaysTrue => always_true.push(q),
                Classification::Ambivalent => amb.push((q, col)),
            }
        }
        let mut ambivalent: Vec<(ColumnRef, u32)> = Vec::new();
        for &(q, col) in &amb {
            if !qs.contains(q) {
                continue;
            }
            match ambivalent.iter_mut().find(|(c, _)| *c == col) {
                Some((_, n)) => *n += 1,
                None => ambivalent.push((col, 1)),
            }
        }
        ambivalent.sort_by_key(|(c, _)| *c);
        if qs.is_empty() {
            out.skipped_blocks += 1;
        } else {
            out.skipped_filters += always_true.iter().filter(|q| qs.contains(**q)).count();
        }
        out.union.union_with(&qs);
        out.blocks.push(BlockSkip { qs, ambivalent });
    }
    out
}

/// Skip analysis over a fact partition. Dimension predicates cannot be
/// judged from fact zone maps and are left to the probes.
pub fn skip_analysis(
    partition: &Partition,
    batch: &Batch,
    candidates: &QuerySet,
    skipping: bool,
) -> SkipAnalysis {
    let blocks = &partition.blocks;
    let slot_of = |c: ColumnRef| match c.table {
        TableId::Fact => blocks.slot(c.column),
        TableId::Dim(_) => None,
    };
    analyze_blocks(blocks, &slot_of, batch, candidates, skipping)
}
