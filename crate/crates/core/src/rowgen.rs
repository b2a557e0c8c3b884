//! Separation of order-three odd-set rows.
//!
//! A row over detections `{a, b, c}` says that the columns containing at
//! least two of them have total weight at most one. Two columns that both
//! hit such a triple share a detection, so a violated triple can only be hit
//! by fractional columns. Candidates are therefore drawn from the support of
//! fractional columns unless full enumeration is requested.

use std::collections::BTreeSet;

use crate::instance::{DetId, Instance};
use crate::master::{ColumnPool, TripleFlavor, TripleRow};

pub const DEFAULT_TOP_K: usize = 20;
/// Below this a weight counts as zero; above `1 - FRACTIONAL_EPS`, as one.
pub const FRACTIONAL_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeparationOptions {
    /// Rows kept per part (local) or overall (global).
    pub top_k: usize,
    /// Consider every detection as a candidate, not just fractional support.
    pub full: bool,
}

impl Default for SeparationOptions {
    fn default() -> Self {
        SeparationOptions {
            top_k: DEFAULT_TOP_K,
            full: false,
        }
    }
}

pub fn is_fractional(v: f64) -> bool {
    v > FRACTIONAL_EPS && v < 1.0 - FRACTIONAL_EPS
}

/// `Σ [|row ∩ column| ≥ 2] · weight` over the columns of the row's flavor.
pub fn violation(row: &TripleRow, pool: &ColumnPool, gamma: &[f64], psi: &[f64]) -> f64 {
    match row.flavor {
        TripleFlavor::Global => pool
            .globals
            .iter()
            .zip(gamma)
            .filter(|(g, _)| row.hits(|d| g.contains(d)))
            .map(|(_, &w)| w)
            .sum(),
        TripleFlavor::Local => pool
            .locals
            .iter()
            .zip(psi)
            .filter(|(l, _)| row.hits(|d| l.touches(d)))
            .map(|(_, &w)| w)
            .sum(),
    }
}

/// Keeps rows violated by more than `tol`, most violated first (ties by
/// detection ids), at most `k` of them.
fn select(mut found: Vec<(f64, TripleRow)>, k: usize) -> Vec<TripleRow> {
    found.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.dets.cmp(&b.1.dets)));
    found.into_iter().take(k).map(|(_, r)| r).collect()
}

/// Weighted member lists of the columns that can contribute, sorted.
fn weighted_sets<'a>(sets: impl Iterator<Item = (Vec<DetId>, f64)> + 'a, tol: f64) -> Vec<(Vec<DetId>, f64)> {
    sets.filter(|(_, w)| *w > tol).collect()
}

fn triple_weight(dets: [DetId; 3], sets: &[(Vec<DetId>, f64)]) -> f64 {
    sets.iter()
        .filter(|(s, _)| dets.iter().filter(|d| s.binary_search(d).is_ok()).count() >= 2)
        .map(|(_, w)| w)
        .sum()
}

/// Violated same-part triples over local assignments, per part.
pub fn separate_triples_local(
    inst: &Instance,
    pool: &ColumnPool,
    psi: &[f64],
    tol: f64,
    opts: SeparationOptions,
) -> Vec<TripleRow> {
    let mut out = Vec::new();
    for part in 0..inst.graph().n_parts() {
        let sets = weighted_sets(
            pool.locals
                .iter()
                .zip(psi)
                .filter(|(l, &w)| inst.part_of(l.anchor) == part && (opts.full || is_fractional(w)))
                .map(|(l, &w)| {
                    let mut m: Vec<DetId> = l.members().collect();
                    m.sort_unstable();
                    (m, w)
                }),
            tol,
        );
        let cands: Vec<DetId> = if opts.full {
            inst.detections_of(part).to_vec()
        } else {
            sets.iter()
                .flat_map(|(s, _)| s.iter().copied())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        };
        let mut found = Vec::new();
        for (i, &a) in cands.iter().enumerate() {
            for (j, &b) in cands.iter().enumerate().skip(i + 1) {
                for &c in &cands[j + 1..] {
                    let w = triple_weight([a, b, c], &sets);
                    if w > 1.0 + tol {
                        found.push((w, TripleRow::new([a, b, c], TripleFlavor::Local)));
                    }
                }
            }
        }
        out.extend(select(found, opts.top_k));
    }
    out
}

/// Violated triples over three distinct parts, against global poses.
pub fn separate_triples_global(
    inst: &Instance,
    pool: &ColumnPool,
    gamma: &[f64],
    tol: f64,
    opts: SeparationOptions,
) -> Vec<TripleRow> {
    let sets = weighted_sets(
        pool.globals
            .iter()
            .zip(gamma)
            .filter(|(_, &w)| opts.full || is_fractional(w))
            .map(|(g, &w)| (g.detections.clone(), w)),
        tol,
    );
    let cands: Vec<DetId> = if opts.full {
        (0..inst.n_detections()).collect()
    } else {
        sets.iter()
            .flat_map(|(s, _)| s.iter().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    };
    let mut found = Vec::new();
    for (i, &a) in cands.iter().enumerate() {
        for (j, &b) in cands.iter().enumerate().skip(i + 1) {
            if inst.part_of(a) == inst.part_of(b) {
                continue;
            }
            for &c in &cands[j + 1..] {
                if inst.part_of(c) == inst.part_of(a) || inst.part_of(c) == inst.part_of(b) {
                    continue;
                }
                let w = triple_weight([a, b, c], &sets);
                if w > 1.0 + tol {
                    found.push((w, TripleRow::new([a, b, c], TripleFlavor::Global)));
                }
            }
        }
    }
    select(found, opts.top_k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Detection, PartGraph};
    use crate::master::{Column, GlobalPoseColumn, LocalAssignmentColumn};

    const TOL: f64 = 1e-9;

    /// Four detections of one part, plus a neck.
    fn one_part() -> Instance {
        let g = PartGraph::new(&["neck", "hand"], &["neck"], &[("neck", "hand")]).unwrap();
        let dets = (0..5)
            .map(|id| Detection {
                id,
                part: usize::from(id > 0),
                position: None,
                theta: -1.0,
            })
            .collect();
        Instance::new(g, dets, vec![], 1.0).unwrap()
    }

    fn local_pool(inst: &Instance, cols: &[(DetId, &[DetId])]) -> ColumnPool {
        let mut pool = ColumnPool::new();
        for &(a, l) in cols {
            let c = LocalAssignmentColumn::new(inst, a, l.to_vec()).unwrap();
            pool.add(inst, Column::Local(c)).unwrap();
        }
        pool
    }

    #[test]
    fn local_example() {
        let inst = one_part();
        // a=1, b=2, c=3, e=4
        let pool = local_pool(&inst, &[(1, &[2, 3]), (2, &[3, 4])]);
        let rows = separate_triples_local(&inst, &pool, &[0.6, 0.6], TOL, SeparationOptions::default());
        assert!(rows.contains(&TripleRow::new([2, 3, 4], TripleFlavor::Local)));
        for r in &rows {
            assert!(violation(r, &pool, &[], &[0.6, 0.6]) > 1.0 + TOL);
            assert!(r.is_well_formed(&inst));
        }
        assert!(separate_triples_local(&inst, &pool, &[1.0, 0.0], TOL, SeparationOptions::default()).is_empty());
        let single = local_pool(&inst, &[(1, &[2, 3])]);
        let full = SeparationOptions {
            full: true,
            ..Default::default()
        };
        assert!(separate_triples_local(&inst, &single, &[1.0], TOL, full).is_empty());
    }

    /// Parts neck, head, shoulder with detections n1=0, h1=1, s1=2, n2=3.
    fn three_parts() -> Instance {
        let g = PartGraph::new(
            &["neck", "head", "shoulder"],
            &["neck", "head"],
            &[("neck", "head"), ("neck", "shoulder"), ("head", "shoulder")],
        )
        .unwrap();
        let dets = [0, 1, 2, 0]
            .iter()
            .enumerate()
            .map(|(id, &part)| Detection {
                id,
                part,
                position: None,
                theta: -1.0,
            })
            .collect();
        Instance::new(g, dets, vec![], 1.0).unwrap()
    }

    #[test]
    fn global_example() {
        let inst = three_parts();
        let mut pool = ColumnPool::new();
        for q in [vec![0, 1], vec![0, 2], vec![1, 2, 3]] {
            pool.add(&inst, Column::Global(GlobalPoseColumn::new(&inst, q).unwrap()))
                .unwrap();
        }
        let rows = separate_triples_global(&inst, &pool, &[0.5; 3], TOL, SeparationOptions::default());
        assert_eq!(rows, vec![TripleRow::new([0, 1, 2], TripleFlavor::Global)]);
        assert_eq!(violation(&rows[0], &pool, &[0.5; 3], &[]), 1.5);
        assert!(separate_triples_global(&inst, &pool, &[1.0, 0.0, 0.0], TOL, SeparationOptions::default()).is_empty());
        assert!(separate_triples_global(&inst, &pool, &[0.7, 0.0, 0.0], TOL, SeparationOptions::default()).is_empty());
        let full = SeparationOptions {
            full: true,
            ..Default::default()
        };
        assert_eq!(separate_triples_global(&inst, &pool, &[0.5; 3], TOL, full), rows);
    }

    #[test]
    fn top_k_caps_output() {
        let inst = three_parts();
        let mut pool = ColumnPool::new();
        for q in [vec![0, 1], vec![0, 2], vec![1, 2, 3]] {
            pool.add(&inst, Column::Global(GlobalPoseColumn::new(&inst, q).unwrap()))
                .unwrap();
        }
        let opts = SeparationOptions { top_k: 0, full: false };
        assert!(separate_triples_global(&inst, &pool, &[0.5; 3], TOL, opts).is_empty());
    }
}
