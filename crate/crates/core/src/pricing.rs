//! Pricing: the most negative reduced-cost column for a given anchor.
//!
//! Local assignments are priced by enumerating every nonempty subset of the
//! anchor's same-part companions. Global poses are priced by dynamic
//! programming on the body graph with the anchor's part removed, which is a
//! forest; every edge touching the anchor's part turns into a unary term.
//! Once global triple rows carry positive duals the objective gains
//! non-decomposable penalties and a best-first branch-and-bound over
//! detection fixings takes over, with the DP as its bound.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::instance::{DetId, Instance, PartId};
use crate::master::{
    reduced_cost_global, reduced_cost_local, Column, DualValues, GlobalPoseColumn, LocalAssignmentColumn, TripleDual,
};

pub const DEFAULT_NODE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricingError {
    #[error("detection {0} does not exist")]
    UnknownAnchor(DetId),
    #[error("detection {0} is not of a major part")]
    NotMajorAnchor(DetId),
    #[error("body graph without part {0} is not a forest")]
    ConditionalGraphNotForest(PartId),
    #[error("pricing branch-and-bound hit its node limit after {0} nodes")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingResult {
    /// `None` only when the anchor admits no column at all.
    pub column: Option<Column>,
    pub reduced_cost: f64,
    pub violated: bool,
}

impl PricingResult {
    fn none() -> Self {
        PricingResult {
            column: None,
            reduced_cost: f64::INFINITY,
            violated: false,
        }
    }

    fn from_column(column: Column, duals: &DualValues, tol: f64) -> Self {
        let reduced_cost = match &column {
            Column::Global(g) => reduced_cost_global(g, duals),
            Column::Local(l) => reduced_cost_local(l, duals),
        };
        PricingResult {
            column: Some(column),
            reduced_cost,
            violated: reduced_cost < -tol,
        }
    }
}

/// Best local assignment anchored at `anchor`. Ties go to the
/// lexicographically smallest companion set.
pub fn price_local(
    inst: &Instance,
    anchor: DetId,
    duals: &DualValues,
    tol: f64,
) -> Result<PricingResult, PricingError> {
    if anchor >= inst.n_detections() {
        return Err(PricingError::UnknownAnchor(anchor));
    }
    let cands: Vec<DetId> = inst
        .detections_of(inst.part_of(anchor))
        .iter()
        .copied()
        .filter(|&d| d != anchor)
        .collect();
    let k = cands.len();
    if k == 0 {
        return Ok(PricingResult::none());
    }
    let unary: Vec<f64> = cands
        .iter()
        .map(|&d| inst.theta(d) + duals.lambda1[d] + duals.lambda2[d] + inst.phi(anchor, d))
        .collect();
    // pair[i] has bit-aligned φ to every higher-indexed candidate
    let pair: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| if j > i { inst.phi(cands[i], cands[j]) } else { 0.0 })
                .collect()
        })
        .collect();
    let triples: Vec<(u32, bool, f64)> = duals
        .lambda5
        .iter()
        .filter(|t| t.value != 0.0)
        .map(|t| {
            let mut mask = 0u32;
            let mut has_anchor = false;
            for d in t.row.dets {
                if d == anchor {
                    has_anchor = true;
                } else if let Ok(i) = cands.binary_search(&d) {
                    mask |= 1 << i;
                }
            }
            (mask, has_anchor, t.value)
        })
        .collect();

    let n_masks = 1usize << k;
    let mut base = vec![0.0f64; n_masks];
    let mut best_mask = 0usize;
    let mut best = f64::INFINITY;
    for mask in 1..n_masks {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        let mut v = base[rest] + unary[low];
        let mut r = rest;
        while r != 0 {
            let j = r.trailing_zeros() as usize;
            v += pair[low][j];
            r &= r - 1;
        }
        base[mask] = v;
        let mut total = v;
        for &(tm, has_anchor, value) in &triples {
            let hits = (tm & mask as u32).count_ones() + has_anchor as u32;
            if hits >= 2 {
                total += value;
            }
        }
        if total < best || (total == best && lex_less(mask, best_mask)) {
            best = total;
            best_mask = mask;
        }
    }
    let locals: Vec<DetId> = (0..k).filter(|&i| best_mask >> i & 1 == 1).map(|i| cands[i]).collect();
    let column = LocalAssignmentColumn::new(inst, anchor, locals).expect("enumerated local assignments are valid");
    Ok(PricingResult::from_column(Column::Local(column), duals, tol))
}

/// Lexicographic order of the sorted index lists encoded by two masks.
fn lex_less(a: usize, b: usize) -> bool {
    let (mut a, mut b) = (a, b);
    loop {
        match (a == 0, b == 0) {
            (true, true) => return false,
            (true, false) => return true,
            (false, true) => return false,
            _ => {}
        }
        let (x, y) = (a.trailing_zeros(), b.trailing_zeros());
        if x != y {
            return x < y;
        }
        a &= a - 1;
        b &= b - 1;
    }
}

/// The body graph with one part removed, rooted per component at its
/// smallest part id.
#[derive(Debug, Clone)]
struct ConditionalForest {
    /// Every remaining part, children before parents.
    post_order: Vec<PartId>,
    children: Vec<Vec<PartId>>,
    roots: Vec<PartId>,
}

impl ConditionalForest {
    fn new(inst: &Instance, removed: PartId) -> Result<Self, PricingError> {
        let g = inst.graph();
        let n = g.n_parts();
        let mut parent = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        let mut children = vec![Vec::new(); n];
        let mut roots = Vec::new();
        let mut bfs = Vec::with_capacity(n);
        seen[removed] = true;
        for root in 0..n {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            roots.push(root);
            let start = bfs.len();
            bfs.push(root);
            let mut head = start;
            while head < bfs.len() {
                let p = bfs[head];
                head += 1;
                for &q in g.neighbors(p) {
                    if q == removed || q == parent[p] {
                        continue;
                    }
                    if seen[q] {
                        return Err(PricingError::ConditionalGraphNotForest(removed));
                    }
                    seen[q] = true;
                    parent[q] = p;
                    children[p].push(q);
                    bfs.push(q);
                }
            }
        }
        bfs.reverse();
        Ok(ConditionalForest {
            post_order: bfs,
            children,
            roots,
        })
    }
}

/// Per-detection branching state inside global pricing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fix {
    Free,
    In,
    Out,
}

/// Shared data for pricing every global pose through one anchor.
struct GlobalProblem<'a> {
    inst: &'a Instance,
    anchor: DetId,
    forest: ConditionalForest,
    /// θ + λ¹ − λ³ + φ(anchor, d), indexed by detection
    node: Vec<f64>,
    /// ω + θ + λ¹ − λ³ of the anchor
    offset: f64,
}

/// `None` is the ABSENT label.
type Label = Option<DetId>;

impl<'a> GlobalProblem<'a> {
    fn new(inst: &'a Instance, anchor: DetId, duals: &DualValues) -> Result<Self, PricingError> {
        if anchor >= inst.n_detections() {
            return Err(PricingError::UnknownAnchor(anchor));
        }
        if !inst.is_major_detection(anchor) {
            return Err(PricingError::NotMajorAnchor(anchor));
        }
        let forest = ConditionalForest::new(inst, inst.part_of(anchor))?;
        let node = (0..inst.n_detections())
            .map(|d| inst.theta(d) + duals.lambda1[d] - duals.lambda3[d] + inst.phi(anchor, d))
            .collect();
        let offset = inst.omega() + inst.theta(anchor) + duals.lambda1[anchor] - duals.lambda3[anchor];
        Ok(GlobalProblem {
            inst,
            anchor,
            forest,
            node,
            offset,
        })
    }

    fn labels(&self, part: PartId, fix: &[Fix]) -> Vec<Label> {
        let dets = self.inst.detections_of(part);
        if let Some(&d) = dets.iter().find(|&&d| fix[d] == Fix::In) {
            return vec![Some(d)];
        }
        std::iter::once(None)
            .chain(dets.iter().filter(|&&d| fix[d] != Fix::Out).map(|&d| Some(d)))
            .collect()
    }

    fn label_cost(&self, l: Label) -> f64 {
        l.map_or(0.0, |d| self.node[d])
    }

    fn edge_cost(&self, a: Label, b: Label) -> f64 {
        match (a, b) {
            (Some(a), Some(b)) => self.inst.phi(a, b),
            _ => 0.0,
        }
    }

    /// Minimum of the decomposable objective under `fix`, with its argmin as
    /// a sorted pose. Ties prefer ABSENT, then the smallest detection id,
    /// since labels are listed in that order and only strict improvements
    /// replace the current choice.
    fn solve(&self, fix: &[Fix]) -> (f64, Vec<DetId>) {
        let n_parts = self.inst.graph().n_parts();
        let mut labels: Vec<Vec<Label>> = vec![Vec::new(); n_parts];
        let mut table: Vec<Vec<f64>> = vec![Vec::new(); n_parts];
        // choice[c][i] = best label index of child c under parent label i
        let mut choice: Vec<Vec<usize>> = vec![Vec::new(); n_parts];
        for &p in &self.forest.post_order {
            labels[p] = self.labels(p, fix);
            let mut t: Vec<f64> = labels[p].iter().map(|&l| self.label_cost(l)).collect();
            for &c in &self.forest.children[p] {
                let mut ch = Vec::with_capacity(t.len());
                for (i, &pl) in labels[p].iter().enumerate() {
                    let (mut bj, mut bv) = (0, f64::INFINITY);
                    for (j, &cl) in labels[c].iter().enumerate() {
                        let v = self.edge_cost(pl, cl) + table[c][j];
                        if v < bv {
                            bv = v;
                            bj = j;
                        }
                    }
                    t[i] += bv;
                    ch.push(bj);
                }
                choice[c] = ch;
            }
            table[p] = t;
        }

        let mut total = self.offset;
        let mut pose = vec![self.anchor];
        let mut stack: Vec<(PartId, usize)> = Vec::new();
        for &r in &self.forest.roots {
            let (mut bi, mut bv) = (0, f64::INFINITY);
            for (i, &v) in table[r].iter().enumerate() {
                if v < bv {
                    bv = v;
                    bi = i;
                }
            }
            total += bv;
            stack.push((r, bi));
        }
        while let Some((p, i)) = stack.pop() {
            if let Some(d) = labels[p][i] {
                pose.push(d);
            }
            for &c in &self.forest.children[p] {
                stack.push((c, choice[c][i]));
            }
        }
        pose.sort_unstable();
        (total, pose)
    }

    fn result(&self, pose: Vec<DetId>, duals: &DualValues, tol: f64) -> PricingResult {
        let column = GlobalPoseColumn::new(self.inst, pose).expect("DP poses are valid");
        PricingResult::from_column(Column::Global(column), duals, tol)
    }

    fn initial_fix(&self) -> Vec<Fix> {
        let mut fix = vec![Fix::Free; self.inst.n_detections()];
        for &d in self.inst.detections_of(self.inst.part_of(self.anchor)) {
            fix[d] = Fix::Out;
        }
        fix[self.anchor] = Fix::In;
        fix
    }
}

/// Best global pose through a major-part anchor, ignoring triple duals.
pub fn price_global_dp(
    inst: &Instance,
    anchor: DetId,
    duals: &DualValues,
    tol: f64,
) -> Result<PricingResult, PricingError> {
    let problem = GlobalProblem::new(inst, anchor, duals)?;
    let (_, pose) = problem.solve(&problem.initial_fix());
    Ok(problem.result(pose, duals, tol))
}

struct BnbNode {
    bound: f64,
    seq: usize,
    fix: Vec<Fix>,
    pose: Vec<DetId>,
}

impl PartialEq for BnbNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for BnbNode {}

impl PartialOrd for BnbNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BnbNode {
    // reversed: BinaryHeap pops the smallest bound, oldest first
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.seq.cmp(&self.seq))
    }
}

/// Best global pose through `anchor` including the penalties of active
/// global triple rows.
pub fn price_global_bnb(
    inst: &Instance,
    anchor: DetId,
    duals: &DualValues,
    tol: f64,
    node_cap: usize,
) -> Result<PricingResult, PricingError> {
    let problem = GlobalProblem::new(inst, anchor, duals)?;
    let mut active: Vec<&TripleDual> = duals.lambda4.iter().filter(|t| t.value > 0.0).collect();
    // branching preference: largest dual, then smallest detections
    active.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.row.dets.cmp(&b.row.dets)));

    let penalty = |pose: &[DetId]| -> f64 {
        active
            .iter()
            .filter(|t| t.row.hits(|d| pose.binary_search(&d).is_ok()))
            .map(|t| t.value)
            .sum()
    };
    let forced = |fix: &[Fix]| -> f64 {
        active
            .iter()
            .filter(|t| t.row.hits(|d| fix[d] == Fix::In))
            .map(|t| t.value)
            .sum()
    };

    let root_fix = problem.initial_fix();
    let (dp, pose) = problem.solve(&root_fix);
    let mut incumbent = (dp + penalty(&pose), pose.clone());
    let mut heap = BinaryHeap::new();
    heap.push(BnbNode {
        bound: dp + forced(&root_fix),
        seq: 0,
        fix: root_fix,
        pose,
    });
    let mut seq = 1;
    let mut explored = 0;
    while let Some(node) = heap.pop() {
        if node.bound >= incumbent.0 {
            break;
        }
        explored += 1;
        if explored > node_cap {
            return Err(PricingError::IterationLimit(node_cap));
        }
        // first unresolved triple hit by the node's argmin, in branching order
        let branch = active.iter().find_map(|t| {
            let hit = t.row.hits(|d| node.pose.binary_search(&d).is_ok());
            let fixed = t.row.hits(|d| node.fix[d] == Fix::In);
            if hit && !fixed {
                t.row
                    .dets
                    .iter()
                    .copied()
                    .find(|&d| node.fix[d] == Fix::Free && node.pose.binary_search(&d).is_ok())
            } else {
                None
            }
        });
        let Some(d) = branch else {
            // argmin pays exactly the forced penalties, so it is optimal here
            continue;
        };
        for state in [Fix::Out, Fix::In] {
            let mut fix = node.fix.clone();
            fix[d] = state;
            let (dp, pose) = problem.solve(&fix);
            let value = dp + penalty(&pose);
            if value < incumbent.0 {
                incumbent = (value, pose.clone());
            }
            let bound = dp + forced(&fix);
            if bound < incumbent.0 {
                heap.push(BnbNode { bound, seq, fix, pose });
                seq += 1;
            }
        }
    }
    Ok(problem.result(incumbent.1, duals, tol))
}

/// Dispatches to the DP or, when any global triple dual is positive, to
/// branch-and-bound.
pub fn price_global(
    inst: &Instance,
    anchor: DetId,
    duals: &DualValues,
    tol: f64,
    node_cap: usize,
) -> Result<PricingResult, PricingError> {
    if duals.has_active_global_triples() {
        price_global_bnb(inst, anchor, duals, tol, node_cap)
    } else {
        price_global_dp(inst, anchor, duals, tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::e1;
    use crate::instance::{Detection, PartGraph};
    use crate::master::{TripleFlavor, TripleRow};

    const TOL: f64 = 1e-8;

    fn global_dets(r: &PricingResult) -> Vec<DetId> {
        match &r.column {
            Some(Column::Global(g)) => g.detections.clone(),
            other => panic!("expected a global column, got {other:?}"),
        }
    }

    #[test]
    fn local_pricing_on_e1() {
        let inst = e1();
        let duals = DualValues::zeros(3);
        let r = price_local(&inst, 1, &duals, TOL).unwrap();
        assert_eq!(r.reduced_cost, -3.5);
        assert!(r.violated);
        let r = price_local(&inst, 2, &duals, TOL).unwrap();
        assert_eq!(r.reduced_cost, -4.5);
        match r.column {
            Some(Column::Local(l)) => assert_eq!((l.anchor, l.locals), (2, vec![1])),
            other => panic!("{other:?}"),
        }
        let mut duals = DualValues::zeros(3);
        duals.lambda1[2] = 10.0;
        let r = price_local(&inst, 1, &duals, TOL).unwrap();
        assert_eq!(r.reduced_cost, 6.5);
        assert!(!r.violated);
        // the neck has no same-part companions
        assert_eq!(price_local(&inst, 0, &duals, TOL).unwrap().column, None);
    }

    #[test]
    fn local_ties_pick_smallest_set() {
        let g = PartGraph::new(&["neck"], &["neck"], &[] as &[(&str, &str)]).unwrap();
        let dets = (0..4)
            .map(|id| Detection {
                id,
                part: 0,
                position: None,
                theta: if id == 0 { 0.0 } else { -1.0 },
            })
            .collect();
        let inst = Instance::new(g, dets, vec![(1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)], 1.0).unwrap();
        let r = price_local(&inst, 0, &DualValues::zeros(4), TOL).unwrap();
        // singles and pairs all cost −1, the full set 0
        match r.column {
            Some(Column::Local(l)) => assert_eq!(l.locals, vec![1]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn global_dp_on_e1() {
        let inst = e1();
        let r = price_global_dp(&inst, 0, &DualValues::zeros(3), TOL).unwrap();
        assert_eq!(global_dets(&r), vec![0, 1]);
        assert_eq!(r.reduced_cost, -13.0);
        let mut duals = DualValues::zeros(3);
        duals.lambda3[1] = 10.0;
        let r = price_global_dp(&inst, 0, &duals, TOL).unwrap();
        assert_eq!(global_dets(&r), vec![0, 1]);
        assert_eq!(r.reduced_cost, -23.0);
        assert_eq!(
            price_global_dp(&inst, 1, &duals, TOL),
            Err(PricingError::NotMajorAnchor(1))
        );
    }

    #[test]
    fn lone_positive_detection_is_not_violated() {
        let g = PartGraph::new(&["neck"], &["neck"], &[] as &[(&str, &str)]).unwrap();
        let det = Detection {
            id: 0,
            part: 0,
            position: None,
            theta: 5.0,
        };
        let inst = Instance::new(g, vec![det], vec![], 3.0).unwrap();
        let r = price_global_dp(&inst, 0, &DualValues::zeros(1), TOL).unwrap();
        assert_eq!(global_dets(&r), vec![0]);
        assert_eq!(r.reduced_cost, 8.0);
        assert!(!r.violated);
    }

    #[test]
    fn dp_prefers_absent_on_ties() {
        let inst = e1();
        let mut duals = DualValues::zeros(3);
        // head labels now cost 0 (d1) and +2 (d2): ABSENT ties with d1
        duals.lambda1[1] = 6.0;
        duals.lambda1[2] = 6.0;
        let r = price_global_dp(&inst, 0, &duals, TOL).unwrap();
        assert_eq!(global_dets(&r), vec![0]);
    }

    fn with_triple(value: f64) -> DualValues {
        let mut duals = DualValues::zeros(3);
        duals.lambda4.push(TripleDual {
            row: TripleRow::new([0, 1, 2], TripleFlavor::Global),
            value,
        });
        duals
    }

    #[test]
    fn bnb_on_e1() {
        let inst = e1();
        let r = price_global_bnb(&inst, 0, &with_triple(100.0), TOL, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(global_dets(&r), vec![0]);
        assert_eq!(r.reduced_cost, -7.0);
        let r = price_global_bnb(&inst, 0, &with_triple(1.0), TOL, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(global_dets(&r), vec![0, 1]);
        assert_eq!(r.reduced_cost, -12.0);
        let zero = with_triple(0.0);
        assert_eq!(
            price_global_bnb(&inst, 0, &zero, TOL, DEFAULT_NODE_CAP).unwrap(),
            price_global_dp(&inst, 0, &zero, TOL).unwrap()
        );
        assert_eq!(
            price_global(&inst, 0, &with_triple(100.0), TOL, DEFAULT_NODE_CAP)
                .unwrap()
                .reduced_cost,
            -7.0
        );
    }

    #[test]
    fn conditional_forest_orders_children_first() {
        let inst = e1();
        let f = ConditionalForest::new(&inst, 0).unwrap();
        assert_eq!(f.roots, vec![1]);
        let g = PartGraph::body14();
        let neck = g.part_id("neck").unwrap();
        let dets = vec![Detection {
            id: 0,
            part: neck,
            position: None,
            theta: -1.0,
        }];
        let inst = Instance::new(g, dets, vec![], 1.0).unwrap();
        let f = ConditionalForest::new(&inst, neck).unwrap();
        assert_eq!(f.post_order.len(), 13);
        let pos = |p: PartId| f.post_order.iter().position(|&q| q == p).unwrap();
        for p in 0..14 {
            for &c in &f.children[p] {
                assert!(pos(c) < pos(p));
            }
        }
    }

    #[test]
    fn lex_order_of_masks() {
        assert!(lex_less(0b001, 0b010));
        assert!(lex_less(0b011, 0b101));
        assert!(lex_less(0b001, 0b011));
        assert!(!lex_less(0b011, 0b011));
    }
}
