//! Cut-selection objective: cost reduction R̄, budget B̄, domain and
//! enrichment over a flat instance.

/// A cut in instance coordinates: the materialized elements and the
/// eliminated nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct CutSpec {
    /// Elements (views) the cut materializes. Sorted.
    pub domain: Vec<usize>,
    /// Eliminated nodes. Sorted.
    pub bc: Vec<usize>,
}

/// Cut-selection instance. Node and element ids are dense; elements are
/// usually the materializable nodes themselves.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CutInstance {
    pub node_cost: Vec<f64>,
    pub elem_budget: Vec<f64>,
    pub cuts: Vec<CutSpec>,
}

impl CutInstance {
    /// R̄(S): cost of the union of BC sets.
    pub fn reduction(&self, sel: &[usize]) -> f64 {
        let mut seen = vec![false; self.node_cost.len()];
        let mut r = 0.0;
        for &c in sel {
            for &v in &self.cuts[c].bc {
                if !std::mem::replace(&mut seen[v], true) {
                    r += self.node_cost[v];
                }
            }
        }
        r
    }

    /// B̄(S): budget of the distinct elements materialized.
    pub fn budget(&self, sel: &[usize]) -> f64 {
        self.domain(sel).iter().map(|e| self.elem_budget[*e]).sum()
    }

    /// d(S), sorted.
    pub fn domain(&self, sel: &[usize]) -> Vec<usize> {
        let mut d: Vec<usize> = sel.iter().flat_map(|c| self.cuts[*c].domain.iter().copied()).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    /// e(S): every cut whose elements all lie in d(S).
    pub fn enrichment(&self, sel: &[usize]) -> Vec<usize> {
        let mut in_d = vec![false; self.elem_budget.len()];
        for e in self.domain(sel) {
            in_d[e] = true;
        }
        (0..self.cuts.len())
            .filter(|c| self.cuts[*c].domain.iter().all(|e| in_d[*e]))
            .collect()
    }
}

/// Incremental coverage state used by the solvers.
#[derive(Clone, Debug)]
pub(crate) struct Coverage {
    covered: Vec<bool>,
    owned: Vec<bool>,
    pub reduction: f64,
    pub budget: f64,
}

impl Coverage {
    pub fn new(inst: &CutInstance) -> Self {
        Coverage {
            covered: vec![false; inst.node_cost.len()],
            owned: vec![false; inst.elem_budget.len()],
            reduction: 0.0,
            budget: 0.0,
        }
    }

    pub fn gain(&self, inst: &CutInstance, c: usize) -> f64 {
        inst.cuts[c]
            .bc
            .iter()
            .filter(|v| !self.covered[**v])
            .map(|v| inst.node_cost[*v])
            .sum()
    }

    pub fn extra_budget(&self, inst: &CutInstance, c: usize) -> f64 {
        inst.cuts[c]
            .domain
            .iter()
            .filter(|e| !self.owned[**e])
            .map(|e| inst.elem_budget[*e])
            .sum()
    }

    pub fn add(&mut self, inst: &CutInstance, c: usize) {
        self.reduction += self.gain(inst, c);
        self.budget += self.extra_budget(inst, c);
        for &v in &inst.cuts[c].bc {
            self.covered[v] = true;
        }
        for &e in &inst.cuts[c].domain {
            self.owned[e] = true;
        }
    }
}
