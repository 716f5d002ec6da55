#![allow(dead_code)]

use rand::Rng;
use sharecut::globalplan::build_global_plan;
use sharecut::materializer::{Component, CutInstance, WorkloadGraph};
use sharecut::oracle::eliminated;
use sharecut::queryset::{words_for, QuerySet};
use sharecut::workload::{Batch, DimSet, Query};

/// Random workload graph: one or two components, each the global plan of up
/// to three queries over four dimensions, with integer costs and budgets.
/// Total node count is at most `max_nodes`.
pub fn random_graph(rng: &mut impl Rng, max_nodes: usize) -> WorkloadGraph {
    loop {
        let comps = rng.random_range(1..=2);
        let mut components = Vec::new();
        for c in 0..comps {
            let nq = rng.random_range(1..=3);
            let queries: Vec<Query> = (0..nq)
                .map(|i| Query {
                    name: format!("q{i}"),
                    joins: DimSet(rng.random_range(1u64..16)),
                    filters: Vec::new(),
                    sum: 0,
                    group_by: None,
                })
                .collect();
            let batch = Batch::new("g", queries);
            let mut plan = build_global_plan(&batch, &QuerySet::full(words_for(nq), nq));
            let mut subquery = vec![None; plan.len()];
            let mut node_budget = vec![0.0; plan.len()];
            for v in 0..plan.len() {
                plan.nodes[v].cost = rng.random_range(0..20) as f64;
                if plan.is_materializable(v) {
                    subquery[v] = Some(v);
                    node_budget[v] = rng.random_range(1..10) as f64;
                }
            }
            components.push(Component {
                partition: c,
                batch: 0,
                plan,
                subquery,
                node_budget,
            });
        }
        let g = WorkloadGraph { components };
        if g.node_count() <= max_nodes {
            return g;
        }
    }
}

/// R(d(S)) by fixpoint elimination over each component.
pub fn eliminated_cost(graph: &WorkloadGraph, inst: &CutInstance, sel: &[usize]) -> f64 {
    let domain = inst.domain(sel);
    let mut off = 0;
    let mut total = 0.0;
    for c in &graph.components {
        let n = c.plan.len();
        let succ: Vec<Vec<usize>> = c.plan.nodes.iter().map(|x| x.successors.clone()).collect();
        let in_view: Vec<bool> = (0..n).map(|v| domain.binary_search(&(v + off)).is_ok()).collect();
        let elim = eliminated(&succ, &in_view);
        total += (0..n).filter(|v| elim[*v]).map(|v| inst.node_cost[v + off]).sum::<f64>();
        off += n;
    }
    total
}

/// Random subset of `0..n`, each member kept with probability `p`.
pub fn subset(rng: &mut impl Rng, n: usize, p: f64) -> Vec<usize> {
    (0..n).filter(|_| rng.random_bool(p)).collect()
}
