//! Reuse optimization: injecting materialized views into a baseline plan.

use crate::globalplan::GlobalPlan;

/// A plan reduced to what the reuse phase needs. Node ids are topological.
#[derive(Clone, Debug, PartialEq)]
pub struct ReuseProblem {
    pub successors: Vec<Vec<usize>>,
    pub cost: Vec<f64>,
    /// Whether a usable view exists for the node on this partition.
    pub materialized: Vec<bool>,
    /// Cost of reading the node's view instead: c_f × Σ rows × runtime filters.
    pub overhead: Vec<f64>,
}

impl ReuseProblem {
    pub fn from_plan(plan: &GlobalPlan, materialized: Vec<bool>, overhead: Vec<f64>) -> Self {
        ReuseProblem {
            successors: plan.nodes.iter().map(|n| n.successors.clone()).collect(),
            cost: plan.nodes.iter().map(|n| n.cost).collect(),
            materialized,
            overhead,
        }
    }

    pub fn len(&self) -> usize {
        self.cost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cost.is_empty()
    }

    pub fn producers(&self) -> Vec<Option<usize>> {
        let mut p = vec![None; self.len()];
        for (v, succ) in self.successors.iter().enumerate() {
            for &s in succ {
                p[s] = Some(v);
            }
        }
        p
    }

    /// Nodes on the paths from `anchor` down to each node of `cut`.
    pub fn between(&self, cut: &[usize], anchor: usize) -> Vec<usize> {
        let producers = self.producers();
        let mut bc = Vec::new();
        for &v in cut {
            let mut at = v;
            loop {
                bc.push(at);
                if at == anchor {
                    break;
                }
                at = producers[at].expect("anchor is an ancestor of the cut");
            }
        }
        bc.sort_unstable();
        bc.dedup();
        bc
    }

    /// Net benefit of answering `cut` from views with respect to `anchor`:
    /// eliminated cost minus view access overhead.
    pub fn benefit(&self, cut: &[usize], anchor: usize) -> f64 {
        let eliminated: f64 = self.between(cut, anchor).iter().map(|v| self.cost[*v]).sum();
        eliminated - cut.iter().map(|v| self.overhead[*v]).sum::<f64>()
    }

    /// Cost of a plan keeping `kept` nodes and reading views at `injected`.
    pub fn rewritten_cost(&self, kept: &[bool], injected: &[usize]) -> f64 {
        let base: f64 = (0..self.len()).filter(|v| kept[*v]).map(|v| self.cost[v]).sum();
        base + injected.iter().map(|v| self.overhead[*v]).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReuseDecision {
    pub kept: Vec<bool>,
    /// Nodes replaced by view scans, ascending.
    pub injected: Vec<usize>,
    pub cost: f64,
}

struct State<'a> {
    p: &'a ReuseProblem,
    eager: bool,
    kept: Vec<bool>,
    injected: Vec<usize>,
    /// Pending cut per node; `None` means no cut can eliminate the node.
    cut: Vec<Option<Vec<usize>>>,
    /// Benefit of the pending cut with the node as anchor.
    gain: Vec<f64>,
    producers: Vec<Option<usize>>,
}

impl State<'_> {
    fn visit(&mut self, v: usize) {
        let p = self.p;
        let leaf = p.successors[v].is_empty();
        let mut cut: Option<Vec<usize>> = if leaf { None } else { Some(Vec::new()) };
        let mut gain = p.cost[v];
        let mut at_least_one = leaf;
        for &s in &p.successors[v] {
            self.visit(s);
            if self.kept[s] {
                at_least_one = true;
                if let Some(c) = cut.as_mut() {
                    match &self.cut[s] {
                        None => cut = None,
                        Some(sc) => {
                            c.extend_from_slice(sc);
                            gain += self.gain[s];
                        }
                    }
                }
            }
        }
        if !at_least_one {
            // Every successor is served by views.
            self.cut[v] = Some(Vec::new());
            return;
        }
        self.kept[v] = true;
        if p.materialized[v] {
            let single = p.cost[v] - p.overhead[v];
            if cut.is_none() || gain < single {
                cut = Some(vec![v]);
                gain = single;
            }
        }
        match cut {
            Some(c) if !c.is_empty() && (self.eager || gain >= 0.0) => {
                self.rewrite(&c, v);
                self.cut[v] = None;
            }
            other => {
                self.cut[v] = other;
                self.gain[v] = gain;
            }
        }
    }

    fn rewrite(&mut self, cut: &[usize], anchor: usize) {
        for &x in cut {
            let mut at = x;
            loop {
                self.kept[at] = false;
                if at == anchor {
                    break;
                }
                at = self.producers[at].expect("anchor is an ancestor of the cut");
            }
            self.injected.push(x);
        }
    }
}

/// Post-order traversal that merges successor cuts, weighs them against a
/// view on the node itself, and rewrites as soon as a cut does not lose.
///
/// With `eager` set every available cut is injected regardless of benefit.
pub fn reuse_phase(p: &ReuseProblem, eager: bool) -> ReuseDecision {
    let n = p.len();
    let producers = p.producers();
    let mut st = State {
        p,
        eager,
        kept: vec![false; n],
        injected: Vec::new(),
        cut: vec![None; n],
        gain: vec![0.0; n],
        producers: producers.clone(),
    };
    for v in 0..n {
        if producers[v].is_none() {
            st.visit(v);
        }
    }
    let mut injected = st.injected;
    injected.sort_unstable();
    let cost = p.rewritten_cost(&st.kept, &injected);
    ReuseDecision {
        kept: st.kept,
        injected,
        cost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Running pair without fact filters: 0 Scan, 1 B, 2 C, 3 D, 4 Agg0,
    // 5 E, 6 Agg1.
    fn running_pair(cost: f64) -> ReuseProblem {
        ReuseProblem {
            successors: vec![vec![1], vec![2, 5], vec![3], vec![4], vec![], vec![6], vec![]],
            cost: vec![cost; 7],
            materialized: vec![false; 7],
            overhead: vec![0.0; 7],
        }
    }

    #[test]
    fn no_views_keeps_plan() {
        let p = running_pair(1.0);
        let d = reuse_phase(&p, false);
        assert!(d.kept.iter().all(|k| *k));
        assert!(d.injected.is_empty());
        assert_eq!(d.cost, 7.0);
    }

    #[test]
    fn views_on_c_and_e_eliminate_shared_prefix() {
        let mut p = running_pair(1.0);
        p.materialized[2] = true;
        p.materialized[5] = true;
        let d = reuse_phase(&p, false);
        assert_eq!(d.injected, vec![2, 5]);
        let kept: Vec<usize> = (0..7).filter(|v| d.kept[*v]).collect();
        assert_eq!(kept, vec![3, 4, 6]);
    }

    #[test]
    fn benefit_formula() {
        let mut p = running_pair(1.0);
        p.overhead[2] = 0.5 * 2.0 * 100.0;
        assert_eq!(p.benefit(&[2, 5], 0), 4.0 - 100.0);
        p.overhead[2] = 0.0;
        assert_eq!(p.benefit(&[2, 5], 0), 4.0);
        assert_eq!(p.between(&[3], 2), vec![2, 3]);
    }

    #[test]
    fn expensive_views_are_rejected_unless_eager() {
        let mut p = running_pair(1.0);
        p.materialized[2] = true;
        p.overhead[2] = 1e9;
        let d = reuse_phase(&p, false);
        assert!(d.injected.is_empty());
        let eager = reuse_phase(&p, true);
        assert_eq!(eager.injected, vec![2]);
    }

    fn forest(parents: &[Option<usize>]) -> Vec<Vec<usize>> {
        let mut succ = vec![Vec::new(); parents.len() + 1];
        for (i, p) in parents.iter().enumerate() {
            if let Some(p) = p {
                succ[p % (i + 1)].push(i + 1);
            }
        }
        succ
    }

    proptest::proptest! {
        #[test]
        fn matches_exhaustive_rewrite(
            parents in proptest::collection::vec(proptest::option::weighted(0.9, 0usize..64), 0..11),
            costs in proptest::collection::vec(0u32..20, 12),
            mats in proptest::collection::vec(proptest::bool::ANY, 12),
            overheads in proptest::collection::vec(0u32..30, 12),
        ) {
            let successors = forest(&parents);
            let n = successors.len();
            let p = ReuseProblem {
                successors,
                cost: costs[..n].iter().map(|c| *c as f64).collect(),
                materialized: mats[..n].to_vec(),
                overhead: overheads[..n].iter().map(|c| *c as f64).collect(),
            };
            let d = reuse_phase(&p, false);
            let best = crate::oracle::exhaustive_rewrite_cost(&p);
            proptest::prop_assert_eq!(d.cost, best);
            let baseline: f64 = p.cost.iter().sum();
            proptest::prop_assert!(d.cost <= baseline);
        }
    }
}
