//! Column and row pools of the restricted master problem, column costs,
//! reduced costs, and assembly of the master LP.
//!
//! Row layout of the master LP, for `n` detections:
//!
//! | rows            | constraint                                   | rhs |
//! |-----------------|----------------------------------------------|-----|
//! | `0..n`          | global poses + local bodies covering `d`     | 1   |
//! | `n..2n`         | local assignments touching `d` (any role)    | 1   |
//! | `2n..3n`        | locals anchored at `d` − global poses with `d` | 0 |
//! | then            | one per global triple row                    | 1   |
//! | then            | one per local triple row                     | 1   |
//!
//! Columns are the pool's global poses followed by its local assignments.

use std::collections::HashSet;
use std::io::{self, Write};

use thiserror::Error;

use crate::instance::{DetId, Instance};
use crate::lp::DenseLp;

const COST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MasterError {
    #[error("invalid global pose: {0}")]
    InvalidPose(String),
    #[error("invalid local assignment: {0}")]
    InvalidLocalAssignment(String),
    #[error("cached cost {cached} differs from recomputed {recomputed}")]
    CostMismatch { cached: f64, recomputed: f64 },
}

/// A global pose: at most one detection per part, at least one of a major
/// part. Detections are kept sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPoseColumn {
    pub detections: Vec<DetId>,
    pub cost: f64,
}

/// One global (anchor) detection plus the same-part detections grouped
/// with it. `locals` is sorted and never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalAssignmentColumn {
    pub anchor: DetId,
    pub locals: Vec<DetId>,
    pub cost: f64,
}

impl GlobalPoseColumn {
    /// Validates the detection set and caches its cost.
    pub fn new(inst: &Instance, mut detections: Vec<DetId>) -> Result<Self, MasterError> {
        detections.sort_unstable();
        let cost = compute_gamma(inst, &detections)?;
        Ok(GlobalPoseColumn { detections, cost })
    }

    pub fn contains(&self, d: DetId) -> bool {
        self.detections.binary_search(&d).is_ok()
    }
}

impl LocalAssignmentColumn {
    pub fn new(inst: &Instance, anchor: DetId, mut locals: Vec<DetId>) -> Result<Self, MasterError> {
        locals.sort_unstable();
        let cost = compute_psi(inst, anchor, &locals)?;
        Ok(LocalAssignmentColumn { anchor, locals, cost })
    }

    /// Anchor and locals together.
    pub fn members(&self) -> impl Iterator<Item = DetId> + '_ {
        std::iter::once(self.anchor).chain(self.locals.iter().copied())
    }

    pub fn touches(&self, d: DetId) -> bool {
        d == self.anchor || self.locals.binary_search(&d).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Global(GlobalPoseColumn),
    Local(LocalAssignmentColumn),
}

impl Column {
    pub fn cost(&self) -> f64 {
        match self {
            Column::Global(g) => g.cost,
            Column::Local(l) => l.cost,
        }
    }
}

fn check_ids(inst: &Instance, ids: &[DetId]) -> Result<(), String> {
    if let Some(&d) = ids.iter().find(|&&d| d >= inst.n_detections()) {
        return Err(format!("unknown detection {d}"));
    }
    if ids.windows(2).any(|w| w[0] >= w[1]) {
        return Err("detections must be distinct and sorted".into());
    }
    Ok(())
}

fn pair_sum(inst: &Instance, ids: impl Iterator<Item = DetId> + Clone) -> f64 {
    let mut total = 0.0;
    let mut rest = ids.clone();
    for a in ids {
        rest.next();
        for b in rest.clone() {
            total += inst.phi(a, b);
        }
    }
    total
}

/// `ω + Σθ + Σφ` over a sorted pose, pairs counted once.
pub fn compute_gamma(inst: &Instance, detections: &[DetId]) -> Result<f64, MasterError> {
    check_ids(inst, detections).map_err(MasterError::InvalidPose)?;
    let mut seen_parts = HashSet::new();
    for &d in detections {
        if !seen_parts.insert(inst.part_of(d)) {
            return Err(MasterError::InvalidPose(format!(
                "two detections of part `{}`",
                inst.graph().part_name(inst.part_of(d))
            )));
        }
    }
    if !detections.iter().any(|&d| inst.is_major_detection(d)) {
        return Err(MasterError::InvalidPose("no detection of a major part".into()));
    }
    let unary: f64 = detections.iter().map(|&d| inst.theta(d)).sum();
    Ok(inst.omega() + unary + pair_sum(inst, detections.iter().copied()))
}

/// `Σθ` over the locals plus `Σφ` over pairs within locals and anchor. The
/// anchor's own `θ` belongs to the global pose containing it.
pub fn compute_psi(inst: &Instance, anchor: DetId, locals: &[DetId]) -> Result<f64, MasterError> {
    let invalid = MasterError::InvalidLocalAssignment;
    if anchor >= inst.n_detections() {
        return Err(invalid(format!("unknown anchor {anchor}")));
    }
    check_ids(inst, locals).map_err(invalid)?;
    if locals.is_empty() {
        return Err(invalid("no local detections".into()));
    }
    if locals.binary_search(&anchor).is_ok() {
        return Err(invalid("anchor listed among its locals".into()));
    }
    if let Some(&d) = locals.iter().find(|&&d| inst.part_of(d) != inst.part_of(anchor)) {
        return Err(invalid(format!(
            "detection {d} has a different part than anchor {anchor}"
        )));
    }
    let unary: f64 = locals.iter().map(|&d| inst.theta(d)).sum();
    let members = std::iter::once(anchor).chain(locals.iter().copied());
    Ok(unary + pair_sum(inst, members))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TripleFlavor {
    Global,
    Local,
}

/// Odd-set row over three detections: at most one selected column of the
/// row's flavor may contain two or more of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TripleRow {
    pub dets: [DetId; 3],
    pub flavor: TripleFlavor,
}

impl TripleRow {
    /// Sorts the detections. Panics if they are not distinct.
    pub fn new(mut dets: [DetId; 3], flavor: TripleFlavor) -> Self {
        dets.sort_unstable();
        assert!(
            dets[0] < dets[1] && dets[1] < dets[2],
            "triple needs three distinct detections"
        );
        TripleRow { dets, flavor }
    }

    /// Whether the flavor's part structure holds: three distinct parts for
    /// global rows, one shared part for local rows.
    pub fn is_well_formed(&self, inst: &Instance) -> bool {
        let p = self.dets.map(|d| inst.part_of(d));
        match self.flavor {
            TripleFlavor::Global => p[0] != p[1] && p[0] != p[2] && p[1] != p[2],
            TripleFlavor::Local => p[0] == p[1] && p[1] == p[2],
        }
    }

    /// `[|row ∩ members| ≥ 2]`
    pub fn hits(&self, mut contains: impl FnMut(DetId) -> bool) -> bool {
        self.dets.iter().filter(|&&d| contains(d)).count() >= 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripleDual {
    pub row: TripleRow,
    pub value: f64,
}

/// Dual multipliers of the master: three per detection and one per triple
/// row.
#[derive(Debug, Clone, PartialEq)]
pub struct DualValues {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub lambda3: Vec<f64>,
    pub lambda4: Vec<TripleDual>,
    pub lambda5: Vec<TripleDual>,
}

impl DualValues {
    pub fn zeros(n: usize) -> Self {
        DualValues {
            lambda1: vec![0.0; n],
            lambda2: vec![0.0; n],
            lambda3: vec![0.0; n],
            lambda4: Vec::new(),
            lambda5: Vec::new(),
        }
    }

    /// `-Σλ¹ - Σλ² - Σλ⁴ - Σλ⁵`
    pub fn objective(&self) -> f64 {
        -self.lambda1.iter().sum::<f64>()
            - self.lambda2.iter().sum::<f64>()
            - self.lambda4.iter().map(|t| t.value).sum::<f64>()
            - self.lambda5.iter().map(|t| t.value).sum::<f64>()
    }

    pub fn has_active_global_triples(&self) -> bool {
        self.lambda4.iter().any(|t| t.value > 0.0)
    }

    pub fn min_value(&self) -> f64 {
        self.lambda1
            .iter()
            .chain(&self.lambda2)
            .chain(&self.lambda3)
            .copied()
            .chain(self.lambda4.iter().chain(&self.lambda5).map(|t| t.value))
            .fold(0.0, f64::min)
    }
}

/// `Γ + Σ_{d∈q}(λ¹ − λ³) + Σ λ⁴` over global rows hit by the pose.
pub fn reduced_cost_global(col: &GlobalPoseColumn, duals: &DualValues) -> f64 {
    let mut rc = col.cost;
    for &d in &col.detections {
        rc += duals.lambda1[d] - duals.lambda3[d];
    }
    for t in &duals.lambda4 {
        if t.row.hits(|d| col.contains(d)) {
            rc += t.value;
        }
    }
    rc
}

/// `Ψ + λ²_a + λ³_a + Σ_{locals}(λ¹ + λ²) + Σ λ⁵` over local rows hit.
pub fn reduced_cost_local(col: &LocalAssignmentColumn, duals: &DualValues) -> f64 {
    let a = col.anchor;
    let mut rc = col.cost + duals.lambda2[a] + duals.lambda3[a];
    for &d in &col.locals {
        rc += duals.lambda1[d] + duals.lambda2[d];
    }
    for t in &duals.lambda5 {
        if t.row.hits(|d| col.touches(d)) {
            rc += t.value;
        }
    }
    rc
}

pub fn reduced_cost(col: &Column, duals: &DualValues) -> f64 {
    match col {
        Column::Global(g) => reduced_cost_global(g, duals),
        Column::Local(l) => reduced_cost_local(l, duals),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddOutcome {
    Added,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Signature {
    Global(Vec<DetId>),
    Local(DetId, Vec<DetId>),
}

/// Generated columns, deduplicated by detection signature.
#[derive(Debug, Clone, Default)]
pub struct ColumnPool {
    pub globals: Vec<GlobalPoseColumn>,
    pub locals: Vec<LocalAssignmentColumn>,
    seen: HashSet<Signature>,
}

impl ColumnPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.globals.len() + self.locals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Adds a column unless one with the same signature exists. The cached
    /// cost must match a recomputation from `inst`.
    pub fn add(&mut self, inst: &Instance, column: Column) -> Result<AddOutcome, MasterError> {
        let (sig, recomputed) = match &column {
            Column::Global(g) => (
                Signature::Global(g.detections.clone()),
                compute_gamma(inst, &g.detections)?,
            ),
            Column::Local(l) => (
                Signature::Local(l.anchor, l.locals.clone()),
                compute_psi(inst, l.anchor, &l.locals)?,
            ),
        };
        let cached = column.cost();
        if (cached - recomputed).abs() > COST_TOL * (1.0 + recomputed.abs()) {
            return Err(MasterError::CostMismatch { cached, recomputed });
        }
        if !self.seen.insert(sig) {
            return Ok(AddOutcome::Duplicate);
        }
        match column {
            Column::Global(g) => self.globals.push(g),
            Column::Local(l) => self.locals.push(l),
        }
        Ok(AddOutcome::Added)
    }
}

/// Triple rows added so far, deduplicated by detections and flavor.
#[derive(Debug, Clone, Default)]
pub struct RowPool {
    pub global: Vec<TripleRow>,
    pub local: Vec<TripleRow>,
    seen: HashSet<TripleRow>,
}

impl RowPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.global.len() + self.local.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, row: &TripleRow) -> bool {
        self.seen.contains(row)
    }

    /// Returns false if the row was already present.
    pub fn add(&mut self, row: TripleRow) -> bool {
        if !self.seen.insert(row) {
            return false;
        }
        match row.flavor {
            TripleFlavor::Global => self.global.push(row),
            TripleFlavor::Local => self.local.push(row),
        }
        true
    }
}

/// Index arithmetic for the master LP's rows and columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MasterLayout {
    pub n_detections: usize,
    pub n_global_rows: usize,
    pub n_local_rows: usize,
    pub n_globals: usize,
    pub n_locals: usize,
}

impl MasterLayout {
    pub fn cover_row(&self, d: DetId) -> usize {
        d
    }

    pub fn local_row(&self, d: DetId) -> usize {
        self.n_detections + d
    }

    pub fn anchor_row(&self, d: DetId) -> usize {
        2 * self.n_detections + d
    }

    pub fn global_triple_row(&self, k: usize) -> usize {
        3 * self.n_detections + k
    }

    pub fn local_triple_row(&self, k: usize) -> usize {
        3 * self.n_detections + self.n_global_rows + k
    }

    pub fn n_rows(&self) -> usize {
        3 * self.n_detections + self.n_global_rows + self.n_local_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_globals + self.n_locals
    }

    pub fn local_col(&self, k: usize) -> usize {
        self.n_globals + k
    }

    /// Splits an LP dual vector into multiplier families.
    pub fn unpack_duals(&self, y: &[f64], rows: &RowPool) -> DualValues {
        let n = self.n_detections;
        DualValues {
            lambda1: y[..n].to_vec(),
            lambda2: y[n..2 * n].to_vec(),
            lambda3: y[2 * n..3 * n].to_vec(),
            lambda4: rows
                .global
                .iter()
                .enumerate()
                .map(|(k, &row)| TripleDual {
                    row,
                    value: y[self.global_triple_row(k)],
                })
                .collect(),
            lambda5: rows
                .local
                .iter()
                .enumerate()
                .map(|(k, &row)| TripleDual {
                    row,
                    value: y[self.local_triple_row(k)],
                })
                .collect(),
        }
    }

    /// Splits an LP primal vector into global and local weights.
    pub fn split_primal<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        x.split_at(self.n_globals)
    }
}

#[derive(Debug, Clone)]
pub struct MasterLp {
    pub lp: DenseLp,
    pub layout: MasterLayout,
}

pub fn build_restricted_lp(inst: &Instance, pool: &ColumnPool, rows: &RowPool) -> MasterLp {
    let layout = MasterLayout {
        n_detections: inst.n_detections(),
        n_global_rows: rows.global.len(),
        n_local_rows: rows.local.len(),
        n_globals: pool.globals.len(),
        n_locals: pool.locals.len(),
    };
    let mut lp = DenseLp::zeros(layout.n_rows(), layout.n_cols());
    for i in 0..2 * layout.n_detections {
        lp.b_mut()[i] = 1.0;
    }
    for i in 3 * layout.n_detections..layout.n_rows() {
        lp.b_mut()[i] = 1.0;
    }

    for (j, g) in pool.globals.iter().enumerate() {
        lp.c_mut()[j] = g.cost;
        for &d in &g.detections {
            lp.set_a(layout.cover_row(d), j, 1.0);
            lp.set_a(layout.anchor_row(d), j, -1.0);
        }
        for (k, row) in rows.global.iter().enumerate() {
            if row.hits(|d| g.contains(d)) {
                lp.set_a(layout.global_triple_row(k), j, 1.0);
            }
        }
    }
    for (k, l) in pool.locals.iter().enumerate() {
        let j = layout.local_col(k);
        lp.c_mut()[j] = l.cost;
        for &d in &l.locals {
            lp.set_a(layout.cover_row(d), j, 1.0);
            lp.set_a(layout.local_row(d), j, 1.0);
        }
        lp.set_a(layout.local_row(l.anchor), j, 1.0);
        lp.set_a(layout.anchor_row(l.anchor), j, 1.0);
        for (t, row) in rows.local.iter().enumerate() {
            if row.hits(|d| l.touches(d)) {
                lp.set_a(layout.local_triple_row(t), j, 1.0);
            }
        }
    }
    MasterLp { lp, layout }
}

/// Writes the master as CSV: one header row naming the columns, a cost row,
/// then one row per constraint ending in its right-hand side.
pub fn write_master_csv(w: &mut dyn Write, inst: &Instance, pool: &ColumnPool, rows: &RowPool) -> io::Result<()> {
    let master = build_restricted_lp(inst, pool, rows);
    let layout = master.layout;
    let lp = &master.lp;
    let mut header = vec!["row".to_string()];
    for g in &pool.globals {
        header.push(format!("G[{}]", join_ids(&g.detections)));
    }
    for l in &pool.locals {
        header.push(format!("L[{};{}]", l.anchor, join_ids(&l.locals)));
    }
    header.push("rhs".into());
    writeln!(w, "{}", header.join(","))?;
    let costs: Vec<String> = lp.c().iter().map(|c| c.to_string()).collect();
    writeln!(w, "cost,{},", costs.join(","))?;
    for i in 0..layout.n_rows() {
        let n = layout.n_detections;
        let name = if i < n {
            format!("cover_{i}")
        } else if i < 2 * n {
            format!("local_{}", i - n)
        } else if i < 3 * n {
            format!("anchor_{}", i - 2 * n)
        } else if i < 3 * n + layout.n_global_rows {
            let r = rows.global[i - 3 * n];
            format!("gtriple_{}", join_ids(&r.dets))
        } else {
            let r = rows.local[i - 3 * n - layout.n_global_rows];
            format!("ltriple_{}", join_ids(&r.dets))
        };
        let vals: Vec<String> = lp.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{name},{},{}", vals.join(","), lp.b()[i])?;
    }
    Ok(())
}

fn join_ids(ids: &[DetId]) -> String {
    ids.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ")
}
