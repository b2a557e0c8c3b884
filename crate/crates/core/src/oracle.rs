//! Exhaustive reference implementations for tiny instances.
//!
//! Nothing here calls into the pricing or solver modules, and costs are
//! recomputed from the instance directly, so the results can be used to
//! check them.

use thiserror::Error;

use crate::instance::{DetId, Instance};
use crate::lp::DenseLp;
use crate::master::{Column, DualValues, GlobalPoseColumn, LocalAssignmentColumn};
use crate::pricing::PricingResult;
use crate::solution::Solution;

/// Largest instance whose full column universe is enumerated.
pub const ENUMERATE_LIMIT: usize = 14;
/// Largest instance `brute_force_solve` accepts.
pub const SOLVE_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{n} detections exceed the oracle limit of {limit}")]
    TooLarge { n: usize, limit: usize },
}

fn guard(inst: &Instance, limit: usize) -> Result<(), OracleError> {
    let n = inst.n_detections();
    if n > limit {
        Err(OracleError::TooLarge { n, limit })
    } else {
        Ok(())
    }
}

fn pose_cost(inst: &Instance, dets: &[DetId]) -> f64 {
    let mut c = inst.omega();
    for (i, &a) in dets.iter().enumerate() {
        c += inst.theta(a);
        for &b in &dets[i + 1..] {
            c += inst.pairwise().get(a, b).unwrap_or(0.0);
        }
    }
    c
}

fn local_cost(inst: &Instance, anchor: DetId, locals: &[DetId]) -> f64 {
    let mut members = vec![anchor];
    members.extend_from_slice(locals);
    let mut c: f64 = locals.iter().map(|&d| inst.theta(d)).sum();
    for (i, &a) in members.iter().enumerate() {
        for &b in &members[i + 1..] {
            c += inst.pairwise().get(a, b).unwrap_or(0.0);
        }
    }
    c
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColumnUniverse {
    pub globals: Vec<GlobalPoseColumn>,
    pub locals: Vec<LocalAssignmentColumn>,
}

/// Every valid global pose and nonempty local assignment, with costs.
pub fn enumerate_all_columns(inst: &Instance) -> Result<ColumnUniverse, OracleError> {
    guard(inst, ENUMERATE_LIMIT)?;
    let g = inst.graph();
    let by_part: Vec<Vec<DetId>> = (0..g.n_parts())
        .map(|p| (0..inst.n_detections()).filter(|&d| inst.part_of(d) == p).collect())
        .collect();

    let mut globals = Vec::new();
    let mut choice: Vec<Option<DetId>> = vec![None; g.n_parts()];
    loop {
        let dets: Vec<DetId> = {
            let mut v: Vec<DetId> = choice.iter().flatten().copied().collect();
            v.sort_unstable();
            v
        };
        if dets.iter().any(|&d| g.is_major(inst.part_of(d))) {
            let cost = pose_cost(inst, &dets);
            globals.push(GlobalPoseColumn { detections: dets, cost });
        }
        // odometer over (absent, each detection) per part
        let mut p = 0;
        loop {
            if p == choice.len() {
                globals.sort_by(|a, b| a.detections.cmp(&b.detections));
                return Ok(ColumnUniverse {
                    globals,
                    locals: enumerate_locals(inst, &by_part),
                });
            }
            let next = match choice[p] {
                None => by_part[p].first().copied(),
                Some(d) => by_part[p]
                    .iter()
                    .position(|&x| x == d)
                    .and_then(|i| by_part[p].get(i + 1).copied()),
            };
            choice[p] = next;
            if next.is_some() {
                break;
            }
            p += 1;
        }
    }
}

fn enumerate_locals(inst: &Instance, by_part: &[Vec<DetId>]) -> Vec<LocalAssignmentColumn> {
    let mut out = Vec::new();
    for anchor in 0..inst.n_detections() {
        let others: Vec<DetId> = by_part[inst.part_of(anchor)]
            .iter()
            .copied()
            .filter(|&d| d != anchor)
            .collect();
        for mask in 1u32..(1 << others.len()) {
            let locals: Vec<DetId> = (0..others.len())
                .filter(|&i| mask & (1 << i) != 0)
                .map(|i| others[i])
                .collect();
            let cost = local_cost(inst, anchor, &locals);
            out.push(LocalAssignmentColumn { anchor, locals, cost });
        }
    }
    out.sort_by(|a, b| (a.anchor, &a.locals).cmp(&(b.anchor, &b.locals)));
    out
}

/// The master LP over a full column universe, assembled constraint by
/// constraint from the set-packing definition. Rows: cover, local
/// occupancy, anchor support for every detection, then `extra_rows`.
pub fn full_lp(inst: &Instance, universe: &ColumnUniverse, extra_rows: &[(Vec<f64>, f64)]) -> DenseLp {
    let n = inst.n_detections();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for d in 0..n {
        let mut r: Vec<f64> = universe
            .globals
            .iter()
            .map(|g| f64::from(g.detections.contains(&d)))
            .collect();
        r.extend(universe.locals.iter().map(|l| f64::from(l.locals.contains(&d))));
        rows.push(r);
        rhs.push(1.0);
    }
    for d in 0..n {
        let mut r = vec![0.0; universe.globals.len()];
        r.extend(
            universe
                .locals
                .iter()
                .map(|l| f64::from(l.anchor == d || l.locals.contains(&d))),
        );
        rows.push(r);
        rhs.push(1.0);
    }
    for d in 0..n {
        let mut r: Vec<f64> = universe
            .globals
            .iter()
            .map(|g| -f64::from(g.detections.contains(&d)))
            .collect();
        r.extend(universe.locals.iter().map(|l| f64::from(l.anchor == d)));
        rows.push(r);
        rhs.push(0.0);
    }
    for (r, b) in extra_rows {
        rows.push(r.clone());
        rhs.push(*b);
    }
    let c: Vec<f64> = universe
        .globals
        .iter()
        .map(|g| g.cost)
        .chain(universe.locals.iter().map(|l| l.cost))
        .collect();
    DenseLp::from_parts(rows, rhs, c).expect("full LP is well formed")
}

/// Visits every valid selection of globals and locals, in a fixed order.
/// Receives the chosen global and local indices and their total cost.
type Visit<'a> = dyn FnMut(&[usize], &[usize], f64) + 'a;

fn for_each_selection(u: &ColumnUniverse, visit: &mut Visit) {
    let gmask: Vec<u64> = u.globals.iter().map(|g| bits(&g.detections)).collect();
    let lbody: Vec<u64> = u.locals.iter().map(|l| bits(&l.locals)).collect();
    let lall: Vec<u64> = u.locals.iter().map(|l| bits(&l.locals) | 1 << l.anchor).collect();

    struct Ctx<'a> {
        u: &'a ColumnUniverse,
        gmask: &'a [u64],
        lbody: &'a [u64],
        lall: &'a [u64],
        gs: Vec<usize>,
        ls: Vec<usize>,
    }

    fn locals(cx: &mut Ctx, i: usize, covered: u64, used: u64, cost: f64, visit: &mut Visit) {
        if i == cx.u.locals.len() {
            visit(&cx.gs, &cx.ls, cost);
            return;
        }
        locals(cx, i + 1, covered, used, cost, visit);
        let l = &cx.u.locals[i];
        if covered & (1 << l.anchor) != 0 && cx.lbody[i] & covered == 0 && cx.lall[i] & used == 0 {
            cx.ls.push(i);
            locals(cx, i + 1, covered, used | cx.lall[i], cost + l.cost, visit);
            cx.ls.pop();
        }
    }

    fn globals(cx: &mut Ctx, i: usize, covered: u64, cost: f64, visit: &mut Visit) {
        if i == cx.u.globals.len() {
            locals(cx, 0, covered, 0, cost, visit);
            return;
        }
        globals(cx, i + 1, covered, cost, visit);
        if cx.gmask[i] & covered == 0 {
            cx.gs.push(i);
            globals(cx, i + 1, covered | cx.gmask[i], cost + cx.u.globals[i].cost, visit);
            cx.gs.pop();
        }
    }

    let mut cx = Ctx {
        u,
        gmask: &gmask,
        lbody: &lbody,
        lall: &lall,
        gs: Vec::new(),
        ls: Vec::new(),
    };
    globals(&mut cx, 0, 0, 0.0, visit);
}

fn bits(ids: &[DetId]) -> u64 {
    ids.iter().fold(0, |m, &d| m | 1 << d)
}

fn selection_to_solution(inst: &Instance, u: &ColumnUniverse, gs: &[usize], ls: &[usize]) -> Solution {
    Solution::from_columns(
        inst,
        gs.iter().map(|&i| u.globals[i].clone()).collect(),
        ls.iter().map(|&i| u.locals[i].clone()).collect(),
    )
}

/// Exact optimum by exhaustive search over all valid selections. Among
/// equal-cost selections the first one visited wins.
pub fn brute_force_solve(inst: &Instance) -> Result<Solution, OracleError> {
    guard(inst, SOLVE_LIMIT)?;
    let u = enumerate_all_columns(inst)?;
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    for_each_selection(&u, &mut |gs, ls, cost| {
        if best.as_ref().is_none_or(|b| cost < b.0) {
            best = Some((cost, gs.to_vec(), ls.to_vec()));
        }
    });
    let (_, gs, ls) = best.expect("the empty selection is always valid");
    Ok(selection_to_solution(inst, &u, &gs, &ls))
}

/// Optimal value and every selection within `tol` of it.
pub fn brute_force_optima(inst: &Instance, tol: f64) -> Result<(f64, Vec<Solution>), OracleError> {
    guard(inst, SOLVE_LIMIT)?;
    let u = enumerate_all_columns(inst)?;
    let mut all: Vec<(f64, Vec<usize>, Vec<usize>)> = Vec::new();
    let mut best = f64::INFINITY;
    for_each_selection(&u, &mut |gs, ls, cost| {
        if cost <= best + tol {
            best = best.min(cost);
            all.push((cost, gs.to_vec(), ls.to_vec()));
        }
    });
    let optima = all
        .into_iter()
        .filter(|(c, _, _)| *c <= best + tol)
        .map(|(_, gs, ls)| selection_to_solution(inst, &u, &gs, &ls))
        .collect();
    Ok((best, optima))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceKind {
    Local,
    Global,
}

/// Exhaustive pricing: the column through `anchor` of the given kind with
/// smallest reduced cost, triple penalties included.
pub fn brute_force_price(
    inst: &Instance,
    anchor: DetId,
    duals: &DualValues,
    kind: PriceKind,
    tol: f64,
) -> Result<PricingResult, OracleError> {
    let u = enumerate_all_columns(inst)?;
    let mut best: Option<(f64, Column)> = None;
    let mut consider = |rc: f64, col: Column| {
        if best.as_ref().is_none_or(|b| rc < b.0) {
            best = Some((rc, col));
        }
    };
    match kind {
        PriceKind::Global => {
            for g in u.globals.into_iter().filter(|g| g.detections.contains(&anchor)) {
                let mut rc = g.cost;
                for &d in &g.detections {
                    rc += duals.lambda1[d] - duals.lambda3[d];
                }
                for t in &duals.lambda4 {
                    if t.row.dets.iter().filter(|d| g.detections.contains(d)).count() >= 2 {
                        rc += t.value;
                    }
                }
                consider(rc, Column::Global(g));
            }
        }
        PriceKind::Local => {
            for l in u.locals.into_iter().filter(|l| l.anchor == anchor) {
                let mut rc = l.cost + duals.lambda2[anchor] + duals.lambda3[anchor];
                for &d in &l.locals {
                    rc += duals.lambda1[d] + duals.lambda2[d];
                }
                for t in &duals.lambda5 {
                    let hits = t
                        .row
                        .dets
                        .iter()
                        .filter(|&&d| d == anchor || l.locals.contains(&d))
                        .count();
                    if hits >= 2 {
                        rc += t.value;
                    }
                }
                consider(rc, Column::Local(l));
            }
        }
    }
    Ok(match best {
        Some((rc, col)) => PricingResult {
            column: Some(col),
            reduced_cost: rc,
            violated: rc < -tol,
        },
        None => PricingResult {
            column: None,
            reduced_cost: f64::INFINITY,
            violated: false,
        },
    })
}

/// Checks a solution against the validity conditions and recomputes its
/// objective and false positives. Returns every problem found.
pub fn validate_solution(inst: &Instance, sol: &Solution, tol: f64) -> Result<(), Vec<String>> {
    let n = inst.n_detections();
    let g = inst.graph();
    let mut problems = Vec::new();
    let mut global_owner: Vec<Option<usize>> = vec![None; n];
    let mut local_role = vec![0usize; n];
    let mut is_local = vec![false; n];
    let mut objective = 0.0;

    for (k, p) in sol.poses.iter().enumerate() {
        let dets = &p.global.detections;
        if dets.iter().any(|&d| d >= n) {
            problems.push(format!("pose {k} names an unknown detection"));
            continue;
        }
        let mut parts: Vec<_> = dets.iter().map(|&d| inst.part_of(d)).collect();
        parts.sort_unstable();
        if parts.windows(2).any(|w| w[0] == w[1]) {
            problems.push(format!("pose {k} has two detections of one part"));
        }
        if !dets.iter().any(|&d| g.is_major(inst.part_of(d))) {
            problems.push(format!("pose {k} has no major-part detection"));
        }
        for &d in dets {
            if let Some(other) = global_owner[d] {
                problems.push(format!("detection {d} is in poses {other} and {k}"));
            }
            global_owner[d] = Some(k);
        }
        objective += pose_cost(inst, dets);
    }

    for (k, p) in sol.poses.iter().enumerate() {
        for l in &p.locals {
            let a = l.anchor;
            if a >= n || l.locals.iter().any(|&d| d >= n) {
                problems.push(format!("local assignment at {a} names an unknown detection"));
                continue;
            }
            if l.locals.is_empty() {
                problems.push(format!("local assignment at {a} is empty"));
            }
            if l.locals.iter().any(|&d| inst.part_of(d) != inst.part_of(a) || d == a) {
                problems.push(format!("local assignment at {a} mixes parts or repeats its anchor"));
            }
            if global_owner[a] != Some(k) {
                problems.push(format!(
                    "local assignment at {a} is attached to a pose not containing it"
                ));
            }
            for d in std::iter::once(a).chain(l.locals.iter().copied()) {
                local_role[d] += 1;
                if local_role[d] == 2 {
                    problems.push(format!("detection {d} is in two local assignments"));
                }
            }
            for &d in &l.locals {
                if global_owner[d].is_some() {
                    problems.push(format!("detection {d} is both global and local"));
                }
                is_local[d] = true;
            }
            objective += local_cost(inst, a, &l.locals);
        }
    }

    let fp: Vec<DetId> = (0..n).filter(|&d| global_owner[d].is_none() && !is_local[d]).collect();
    if fp != sol.false_positives {
        problems.push(format!("false positives {:?}, expected {fp:?}", sol.false_positives));
    }
    if (objective - sol.objective).abs() > tol * (1.0 + objective.abs()) {
        problems.push(format!("objective {} but columns sum to {objective}", sol.objective));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems)
    }
}
