use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::queryset::QuerySet;
use crate::storage::{ColumnRef, Schema, TableId};
use crate::workload::{Batch, DimSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Scan,
    /// Shared filter on a fact column.
    Filter { column: usize },
    Probe { dim: usize },
    Aggregate { query: usize },
    /// Reads the stored join result for the node's table set.
    ViewScan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanNode {
    pub id: usize,
    pub kind: NodeKind,
    pub query_set: QuerySet,
    /// Dimensions joined into this node's output.
    pub dims: DimSet,
    pub successors: Vec<usize>,
    pub cost: f64,
}

/// Shared operator graph for one batch. Nodes are stored in topological
/// order and every node has at most one producer.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalPlan {
    pub nodes: Vec<PlanNode>,
    pub words: usize,
}

impl GlobalPlan {
    pub fn empty(words: usize) -> Self {
        GlobalPlan {
            nodes: Vec::new(),
            words,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn producers(&self) -> Vec<Option<usize>> {
        let mut p = vec![None; self.nodes.len()];
        for n in &self.nodes {
            for &s in &n.successors {
                p[s] = Some(n.id);
            }
        }
        p
    }

    /// Source nodes: Scan and ViewScan.
    pub fn sources(&self) -> impl Iterator<Item = &PlanNode> {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Scan | NodeKind::ViewScan))
    }

    pub fn aggregate_of(&self, query: usize) -> Option<usize> {
        self.nodes
            .iter()
            .position(|n| n.kind == NodeKind::Aggregate { query })
    }

    pub fn is_materializable(&self, v: usize) -> bool {
        matches!(self.nodes[v].kind, NodeKind::Probe { .. })
    }

    pub fn total_cost(&self) -> f64 {
        self.nodes.iter().map(|n| n.cost).sum()
    }

    /// Checks the structural invariants: topological order, single producers,
    /// aggregates as sinks, query sets equal to the union over aggregates.
    pub fn validate(&self) -> Result<()> {
        let mut producer = vec![None; self.nodes.len()];
        for n in &self.nodes {
            for &s in &n.successors {
                if s <= n.id || s >= self.nodes.len() {
                    return Err(Error::Invariant(format!("edge {} -> {s} breaks order", n.id)));
                }
                if producer[s].replace(n.id).is_some() {
                    return Err(Error::Invariant(format!("node {s} has two producers")));
                }
            }
        }
        for n in self.nodes.iter().rev() {
            let is_source = matches!(n.kind, NodeKind::Scan | NodeKind::ViewScan);
            if is_source != producer[n.id].is_none() {
                return Err(Error::Invariant(format!("node {} has a bad producer", n.id)));
            }
            let mut want = QuerySet::empty(self.words);
            match n.kind {
                NodeKind::Aggregate { query } => {
                    if !n.successors.is_empty() {
                        return Err(Error::Invariant("aggregate with successors".into()));
                    }
                    want.insert(query);
                }
                _ => {
                    for &s in &n.successors {
                        want.union_with(&self.nodes[s].query_set);
                    }
                }
            }
            if want != n.query_set {
                return Err(Error::Invariant(format!("node {} query set mismatch", n.id)));
            }
        }
        Ok(())
    }

    fn recompute_query_sets(&mut self) {
        for i in (0..self.nodes.len()).rev() {
            if let NodeKind::Aggregate { query } = self.nodes[i].kind {
                let mut qs = QuerySet::empty(self.words);
                qs.insert(query);
                self.nodes[i].query_set = qs;
                continue;
            }
            let mut qs = QuerySet::empty(self.words);
            for &s in &self.nodes[i].successors {
                qs.union_with(&self.nodes[s].query_set);
            }
            self.nodes[i].query_set = qs;
        }
    }

    /// Keeps the nodes flagged in `kept` and turns every node in `injected`
    /// into a ViewScan feeding its kept successors. `view_cost` prices each
    /// injected node.
    pub fn rewrite(&self, kept: &[bool], injected: &[usize], view_cost: impl Fn(usize) -> f64) -> GlobalPlan {
        let mut map = vec![usize::MAX; self.nodes.len()];
        let mut out = GlobalPlan::empty(self.words);
        for n in &self.nodes {
            let inject = injected.contains(&n.id);
            if !kept[n.id] && !inject {
                continue;
            }
            map[n.id] = out.nodes.len();
            out.nodes.push(PlanNode {
                id: out.nodes.len(),
                kind: if inject { NodeKind::ViewScan } else { n.kind },
                query_set: QuerySet::empty(self.words),
                dims: n.dims,
                successors: Vec::new(),
                cost: if inject { view_cost(n.id) } else { n.cost },
            });
        }
        for n in &self.nodes {
            let m = map[n.id];
            if m == usize::MAX {
                continue;
            }
            out.nodes[m].successors = n
                .successors
                .iter()
                .filter(|s| kept[**s])
                .map(|s| map[*s])
                .collect();
        }
        out.recompute_query_sets();
        out
    }

    /// Line-oriented dump: one node per line in topological order.
    pub fn dump(&self, schema: &Schema) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "plan nodes={}", self.nodes.len());
        for n in &self.nodes {
            let kind = match n.kind {
                NodeKind::Scan => "Scan".to_string(),
                NodeKind::Filter { column } => {
                    format!("Filter({})", schema.column_name(ColumnRef::fact(column)))
                }
                NodeKind::Probe { dim } => format!("Probe({})", schema.dimensions[dim].name),
                NodeKind::Aggregate { query } => format!("Aggregate(q{query})"),
                NodeKind::ViewScan => "ViewScan".to_string(),
            };
            let succ: Vec<String> = n.successors.iter().map(|s| s.to_string()).collect();
            let _ = writeln!(
                out,
                "{} {} tables={} qs={} cost={:.3} succ=[{}]",
                n.id,
                kind,
                n.dims.display(schema),
                n.query_set.to_hex(),
                n.cost,
                succ.join(",")
            );
        }
        out
    }
}

/// Dimension order for the probe trie: most-shared first, then by id.
pub fn join_order(batch: &Batch, queries: &QuerySet) -> Vec<usize> {
    let mut count = [0usize; 64];
    for q in queries.iter() {
        for d in batch.queries[q].joins.iter() {
            count[d] += 1;
        }
    }
    let mut dims: Vec<usize> = (0..64).filter(|d| count[*d] > 0).collect();
    dims.sort_by_key(|d| (std::cmp::Reverse(count[*d]), *d));
    dims
}

/// Builds the work-sharing plan for the queries in `queries`: a scan, one
/// shared filter per referenced fact column, a probe trie that merges common
/// join prefixes, and one aggregate per query.
pub fn build_global_plan(batch: &Batch, queries: &QuerySet) -> GlobalPlan {
    let words = queries.word_count();
    let mut plan = GlobalPlan::empty(words);
    if queries.is_empty() {
        return plan;
    }
    let push = |plan: &mut GlobalPlan, kind: NodeKind, dims: DimSet, parent: Option<usize>| {
        let id = plan.nodes.len();
        plan.nodes.push(PlanNode {
            id,
            kind,
            query_set: QuerySet::empty(words),
            dims,
            successors: Vec::new(),
            cost: 0.0,
        });
        if let Some(p) = parent {
            plan.nodes[p].successors.push(id);
        }
        id
    };
    let scan = push(&mut plan, NodeKind::Scan, DimSet::EMPTY, None);
    let mut filter_cols: Vec<usize> = queries
        .iter()
        .flat_map(|q| {
            batch.queries[q]
                .filters
                .iter()
                .filter(|p| p.column.table == TableId::Fact)
                .map(|p| p.column.column)
        })
        .collect();
    filter_cols.sort_unstable();
    filter_cols.dedup();
    let mut trunk = scan;
    for c in filter_cols {
        trunk = push(&mut plan, NodeKind::Filter { column: c }, DimSet::EMPTY, Some(trunk));
    }
    let order = join_order(batch, queries);
    let rank = |d: usize| order.iter().position(|x| *x == d).unwrap();
    for q in queries.iter() {
        let mut dims: Vec<usize> = batch.queries[q].joins.iter().collect();
        dims.sort_by_key(|d| rank(*d));
        let mut at = trunk;
        let mut set = DimSet::EMPTY;
        for d in dims {
            set = set.with(d);
            let existing = plan.nodes[at]
                .successors
                .iter()
                .copied()
                .find(|s| plan.nodes[*s].kind == NodeKind::Probe { dim: d });
            at = match existing {
                Some(s) => s,
                None => push(&mut plan, NodeKind::Probe { dim: d }, set, Some(at)),
            };
        }
        push(&mut plan, NodeKind::Aggregate { query: q }, set, Some(at));
    }
    plan.recompute_query_sets();
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::ValueRange;
    use crate::workload::{Predicate, Query};

    fn query(joins: &[usize], fact_filter: bool) -> Query {
        Query {
            name: String::new(),
            joins: DimSet::from_dims(joins.iter().copied()),
            filters: if fact_filter {
                vec![Predicate {
                    column: ColumnRef::fact(0),
                    range: ValueRange::new(0, 10),
                }]
            } else {
                vec![]
            },
            sum: 0,
            group_by: None,
        }
    }

    // Dimensions: B=0, C=1, D=2, E=3.
    fn pair(filter: bool) -> Batch {
        Batch::new("fig2", vec![query(&[0, 1, 2], filter), query(&[0, 3], filter)])
    }

    #[test]
    fn running_pair_shares_first_join() {
        let b = pair(true);
        let plan = build_global_plan(&b, &QuerySet::full(1, 2));
        plan.validate().unwrap();
        assert_eq!(plan.len(), 8);
        let kinds: Vec<NodeKind> = plan.nodes.iter().map(|n| n.kind).collect();
        assert_eq!(
            kinds,
            vec![
                NodeKind::Scan,
                NodeKind::Filter { column: 0 },
                NodeKind::Probe { dim: 0 },
                NodeKind::Probe { dim: 1 },
                NodeKind::Probe { dim: 2 },
                NodeKind::Aggregate { query: 0 },
                NodeKind::Probe { dim: 3 },
                NodeKind::Aggregate { query: 1 },
            ]
        );
        assert_eq!(plan.nodes[2].successors, vec![3, 6]);
        assert_eq!(plan.nodes[2].query_set, QuerySet::full(1, 2));
        assert_eq!(plan.nodes[3].query_set, QuerySet::from_bits(1, [0]));
    }

    #[test]
    fn single_query_is_a_chain() {
        let b = Batch::new("one", vec![query(&[2, 0], true)]);
        let plan = build_global_plan(&b, &QuerySet::full(1, 1));
        plan.validate().unwrap();
        for n in &plan.nodes[..plan.len() - 1] {
            assert_eq!(n.successors, vec![n.id + 1]);
        }
        assert_eq!(plan.len(), 5);
    }

    #[test]
    fn identical_queries_share_everything() {
        let one = build_global_plan(&Batch::new("a", vec![query(&[0, 1], true)]), &QuerySet::full(1, 1));
        let two = build_global_plan(
            &Batch::new("b", vec![query(&[0, 1], true), query(&[0, 1], true)]),
            &QuerySet::full(1, 2),
        );
        assert_eq!(two.len(), one.len() + 1);
        let probes = |p: &GlobalPlan| {
            p.nodes
                .iter()
                .filter(|n| matches!(n.kind, NodeKind::Probe { .. } | NodeKind::Filter { .. }))
                .count()
        };
        assert_eq!(probes(&one), probes(&two));
    }

    #[test]
    fn restricted_queries_only() {
        let b = pair(false);
        let plan = build_global_plan(&b, &QuerySet::from_bits(1, [1]));
        plan.validate().unwrap();
        assert_eq!(plan.len(), 4);
        assert!(build_global_plan(&b, &QuerySet::empty(1)).is_empty());
    }

    #[test]
    fn rewrite_injects_view_scans() {
        let b = pair(false);
        let plan = build_global_plan(&b, &QuerySet::full(1, 2));
        // Nodes: 0 Scan, 1 B, 2 C, 3 D, 4 Agg0, 5 E, 6 Agg1. Replace C and E.
        let mut kept = vec![true; plan.len()];
        for v in [0, 1, 2, 5] {
            kept[v] = false;
        }
        let out = plan.rewrite(&kept, &[2, 5], |_| 7.0);
        out.validate().unwrap();
        let kinds: Vec<NodeKind> = out.nodes.iter().map(|n| n.kind).collect();
        assert_eq!(
            kinds,
            vec![
                NodeKind::ViewScan,
                NodeKind::Probe { dim: 2 },
                NodeKind::Aggregate { query: 0 },
                NodeKind::ViewScan,
                NodeKind::Aggregate { query: 1 },
            ]
        );
        assert_eq!(out.nodes[0].cost, 7.0);
    }
}
