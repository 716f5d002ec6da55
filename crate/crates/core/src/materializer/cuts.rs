//! Cut and anchor enumeration over a single plan component.

use std::collections::HashSet;

use crate::globalplan::{GlobalPlan, NodeKind};

/// A cut of one plan: materializable nodes whose views eliminate every node
/// between them and the anchor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cut {
    /// Sorted node ids.
    pub nodes: Vec<usize>,
    /// Topmost anchor: its producer is not itself an anchor of this cut.
    pub anchor: usize,
    /// Nodes between the anchor and the cut, both inclusive. Sorted.
    pub bc: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CutLimits {
    pub max_width: Option<usize>,
    pub max_cuts: Option<usize>,
}

impl CutLimits {
    pub const NONE: CutLimits = CutLimits {
        max_width: None,
        max_cuts: None,
    };
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CutEnumeration {
    pub cuts: Vec<Cut>,
    /// Set when a width or count limit dropped cuts.
    pub truncated: bool,
}

/// Enumerates the cuts of `plan` whose nodes all satisfy `materializable`.
///
/// For every node x, F(x) holds the node sets that separate x from every
/// sink below it: {x} itself when x is materializable, plus one choice from
/// F(s) for each successor s. Each distinct set is reported once with its
/// topmost anchor. Cuts are ordered by width, then anchor, then nodes.
pub fn enumerate_cuts(plan: &GlobalPlan, materializable: &dyn Fn(usize) -> bool, limits: CutLimits) -> CutEnumeration {
    let n = plan.len();
    let width_ok = |w: usize| limits.max_width.is_none_or(|m| w <= m);
    // Per-node frontier lists are capped to keep products bounded; the cap
    // is generous relative to the final count limit.
    let list_cap = limits.max_cuts.map(|m| m.saturating_mul(8).max(64));
    let mut truncated = false;
    let mut f: Vec<Vec<Vec<usize>>> = vec![Vec::new(); n];
    for x in (0..n).rev() {
        let node = &plan.nodes[x];
        let mut sets: Vec<Vec<usize>> = Vec::new();
        if materializable(x) {
            sets.push(vec![x]);
        }
        let is_sink = matches!(node.kind, NodeKind::Aggregate { .. }) || node.successors.is_empty();
        if !is_sink {
            let mut acc: Vec<Vec<usize>> = vec![Vec::new()];
            for &s in &node.successors {
                let mut next = Vec::new();
                'outer: for a in &acc {
                    for b in &f[s] {
                        if !width_ok(a.len() + b.len()) {
                            truncated = true;
                            continue;
                        }
                        if list_cap.is_some_and(|c| next.len() >= c) {
                            truncated = true;
                            break 'outer;
                        }
                        let mut c = a.clone();
                        c.extend_from_slice(b);
                        next.push(c);
                    }
                }
                acc = next;
                if acc.is_empty() {
                    break;
                }
            }
            for mut c in acc {
                c.sort_unstable();
                sets.push(c);
            }
        }
        if let Some(cap) = list_cap {
            if sets.len() > cap {
                sets.sort_by_key(|s| s.len());
                sets.truncate(cap);
                truncated = true;
            }
        }
        f[x] = sets;
    }

    let producers = plan.producers();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut cuts = Vec::new();
    for (x, sets) in f.iter().enumerate() {
        for c in sets {
            if !seen.insert(c.clone()) {
                continue;
            }
            let mut bc: Vec<usize> = Vec::new();
            for &v in c {
                let mut at = v;
                loop {
                    bc.push(at);
                    if at == x {
                        break;
                    }
                    at = producers[at].expect("anchor is an ancestor");
                }
            }
            bc.sort_unstable();
            bc.dedup();
            cuts.push(Cut {
                nodes: c.clone(),
                anchor: x,
                bc,
            });
        }
    }
    cuts.sort_by(|a, b| (a.nodes.len(), a.anchor, &a.nodes).cmp(&(b.nodes.len(), b.anchor, &b.nodes)));
    if let Some(m) = limits.max_cuts {
        if cuts.len() > m {
            cuts.truncate(m);
            truncated = true;
        }
    }
    CutEnumeration { cuts, truncated }
}
