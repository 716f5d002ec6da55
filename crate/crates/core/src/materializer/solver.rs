//! Budgeted cut selection: greedy (Gr) and iterated submodular knapsack
//! (ISK).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::materializer::selection::{Coverage, CutInstance};

/// Slack for floating-point budget comparisons.
const EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Selection {
    /// Cuts picked by the solver, in pick order.
    pub chosen: Vec<usize>,
    /// Enriched selection e(chosen), sorted.
    pub cuts: Vec<usize>,
    pub domain: Vec<usize>,
    pub reduction: f64,
    pub budget: f64,
}

impl Selection {
    pub fn new(inst: &CutInstance, chosen: Vec<usize>) -> Self {
        let cuts = inst.enrichment(&chosen);
        Selection {
            domain: inst.domain(&chosen),
            reduction: inst.reduction(&cuts),
            budget: inst.budget(&chosen),
            chosen,
            cuts,
        }
    }
}

fn fits(used: f64, extra: f64, budget: f64) -> bool {
    used + extra <= budget + EPS * budget.abs().max(1.0)
}

/// Repeatedly adds the feasible cut with the largest marginal reduction
/// (ties to the lowest id) until no feasible cut reduces cost further.
pub fn solve_gr(inst: &CutInstance, budget: f64) -> Selection {
    let n = inst.cuts.len();
    let mut cov = Coverage::new(inst);
    let mut ub: Vec<f64> = (0..n).map(|c| cov.gain(inst, c)).collect();
    let mut taken = vec![false; n];
    let mut chosen = Vec::new();
    loop {
        let mut order: Vec<usize> = (0..n).filter(|c| !taken[*c] && ub[*c] > 0.0).collect();
        order.sort_by(|a, b| ub[*b].total_cmp(&ub[*a]).then(a.cmp(b)));
        let mut best: Option<(f64, usize)> = None;
        for c in order {
            if let Some((g, id)) = best {
                if ub[c] < g || (ub[c] == g && c > id) {
                    break;
                }
            }
            let g = cov.gain(inst, c);
            ub[c] = g;
            if g <= 0.0 || !fits(cov.budget, cov.extra_budget(inst, c), budget) {
                continue;
            }
            if best.is_none_or(|(bg, id)| g > bg || (g == bg && c < id)) {
                best = Some((g, c));
            }
        }
        match best {
            Some((_, c)) => {
                cov.add(inst, c);
                taken[c] = true;
                chosen.push(c);
            }
            None => break,
        }
    }
    Selection::new(inst, chosen)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IskParams {
    pub iterations: usize,
    pub seed_size: usize,
    pub seed_pool: usize,
}

impl Default for IskParams {
    fn default() -> Self {
        IskParams {
            iterations: 10,
            seed_size: 3,
            seed_pool: 16,
        }
    }
}

#[derive(PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Key {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.total_cmp(&o.0).then(o.1.cmp(&self.1))
    }
}

fn ratio(gain: f64, weight: f64) -> f64 {
    if weight <= 0.0 {
        if gain > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        gain / weight
    }
}

/// Greedy completion of `seed` under modular weights: picks the best ratio of
/// marginal reduction to weight among cuts that still fit.
fn extend(inst: &CutInstance, w: &[f64], cap: f64, seed: &[usize]) -> Option<(f64, Vec<usize>)> {
    let mut cov = Coverage::new(inst);
    let mut used = 0.0;
    let mut taken = vec![false; inst.cuts.len()];
    for &c in seed {
        used += w[c];
        cov.add(inst, c);
        taken[c] = true;
    }
    if !fits(used, 0.0, cap) {
        return None;
    }
    let mut chosen = seed.to_vec();
    let mut heap: BinaryHeap<Key> = (0..inst.cuts.len())
        .filter(|c| !taken[*c])
        .map(|c| Key(ratio(cov.gain(inst, c), w[c]), c))
        .filter(|k| k.0 > 0.0)
        .collect();
    while let Some(Key(key, c)) = heap.pop() {
        if !fits(used, w[c], cap) {
            continue;
        }
        let g = cov.gain(inst, c);
        if g <= 0.0 {
            continue;
        }
        let r = ratio(g, w[c]);
        if r < key {
            heap.push(Key(r, c));
            continue;
        }
        used += w[c];
        cov.add(inst, c);
        chosen.push(c);
    }
    Some((cov.reduction, chosen))
}

/// Iterated submodular knapsack. Each round replaces B̄ by its modular upper
/// bound at the previous round's selection X (marginal cost given the rest of
/// X for members, standalone cost otherwise) and solves the resulting
/// knapsack by partial enumeration: every seed of up to `seed_size` cuts
/// from the `seed_pool` best-ratio cuts, plus X itself, greedily completed.
pub fn solve_isk(inst: &CutInstance, budget: f64, p: IskParams) -> Selection {
    let n = inst.cuts.len();
    let single: Vec<f64> = (0..n).map(|c| inst.budget(&[c])).collect();
    let gain0: Vec<f64> = (0..n).map(|c| inst.reduction(&[c])).collect();
    let mut x: Vec<usize> = Vec::new();
    let mut best = Selection::new(inst, Vec::new());
    for _ in 0..p.iterations.max(1) {
        let fx = inst.budget(&x);
        let mut w = single.clone();
        for &c in &x {
            let rest: Vec<usize> = x.iter().copied().filter(|d| *d != c).collect();
            w[c] = fx - inst.budget(&rest);
        }
        let constant = (fx - x.iter().map(|c| w[*c]).sum::<f64>()).max(0.0);
        let cap = budget - constant;
        let mut pool: Vec<usize> = (0..n).filter(|c| gain0[*c] > 0.0).collect();
        pool.sort_by(|a, b| ratio(gain0[*b], w[*b]).total_cmp(&ratio(gain0[*a], w[*a])).then(a.cmp(b)));
        pool.truncate(p.seed_pool);
        pool.sort_unstable();
        let mut seeds: Vec<Vec<usize>> = vec![Vec::new()];
        for k in 1..=p.seed_size.min(pool.len()) {
            combinations(&pool, k, &mut Vec::new(), 0, &mut seeds);
        }
        seeds.push(x.clone());
        let mut round: Option<(f64, Vec<usize>)> = None;
        for s in &seeds {
            if let Some((r, chosen)) = extend(inst, &w, cap, s) {
                if round.as_ref().is_none_or(|(br, _)| r > *br + EPS) {
                    round = Some((r, chosen));
                }
            }
        }
        let Some((_, y)) = round else { break };
        let cand = Selection::new(inst, y.clone());
        if cand.budget <= budget + EPS * budget.abs().max(1.0) && cand.reduction > best.reduction + EPS {
            best = cand;
        }
        let mut ys = y.clone();
        ys.sort_unstable();
        let mut xs = x.clone();
        xs.sort_unstable();
        if ys == xs {
            break;
        }
        x = y;
    }
    best
}

fn combinations(pool: &[usize], k: usize, cur: &mut Vec<usize>, from: usize, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in from..pool.len() {
        cur.push(pool[i]);
        combinations(pool, k, cur, i + 1, out);
        cur.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materializer::selection::CutSpec;

    fn running_pair() -> CutInstance {
        let cut = |domain: &[usize], bc: &[usize]| CutSpec {
            domain: domain.to_vec(),
            bc: bc.to_vec(),
        };
        CutInstance {
            node_cost: vec![1.0; 7],
            elem_budget: vec![0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.0],
            cuts: vec![
                cut(&[1], &[0, 1]),
                cut(&[2], &[2]),
                cut(&[3], &[2, 3]),
                cut(&[5], &[5]),
                cut(&[2, 5], &[0, 1, 2, 5]),
                cut(&[3, 5], &[0, 1, 2, 3, 5]),
            ],
        }
    }

    /// Two disjoint small cuts that together beat one large cut that alone
    /// exhausts the budget.
    pub(crate) fn synergy() -> CutInstance {
        CutInstance {
            node_cost: vec![20.0, 15.0, 15.0],
            elem_budget: vec![12.0, 6.0, 6.0],
            cuts: vec![
                CutSpec { domain: vec![0], bc: vec![0] },
                CutSpec { domain: vec![1], bc: vec![1] },
                CutSpec { domain: vec![2], bc: vec![2] },
            ],
        }
    }

    #[test]
    fn zero_budget_selects_nothing() {
        let inst = running_pair();
        assert!(solve_gr(&inst, 0.0).cuts.is_empty());
        assert!(solve_isk(&inst, 0.0, IskParams::default()).cuts.is_empty());
    }

    #[test]
    fn full_budget_reaches_total() {
        let inst = running_pair();
        let all: Vec<usize> = (0..inst.cuts.len()).collect();
        let total = inst.reduction(&all);
        assert_eq!(solve_gr(&inst, 100.0).reduction, total);
        assert_eq!(solve_isk(&inst, 100.0, IskParams::default()).reduction, total);
    }

    #[test]
    fn isk_beats_gr_on_synergy() {
        let inst = synergy();
        let gr = solve_gr(&inst, 12.0);
        let isk = solve_isk(&inst, 12.0, IskParams::default());
        assert_eq!(gr.reduction, 20.0);
        assert_eq!(isk.reduction, 30.0);
        assert!(isk.budget <= 12.0);
    }

    #[test]
    fn single_cut_agrees() {
        let inst = CutInstance {
            node_cost: vec![3.0],
            elem_budget: vec![2.0],
            cuts: vec![CutSpec { domain: vec![0], bc: vec![0] }],
        };
        for b in [0.0, 1.0, 2.0, 5.0] {
            assert_eq!(solve_gr(&inst, b), solve_isk(&inst, b, IskParams::default()));
        }
    }
}
