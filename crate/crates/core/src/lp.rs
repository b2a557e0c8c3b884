//! Dense tableau simplex for `min cᵀx  s.t.  Ax ≤ b, x ≥ 0`.
//!
//! [`solve_lp`] starts from the all-slack basis and therefore needs `b ≥ 0`,
//! which the restricted master always satisfies. [`solve_lp_general`] adds a
//! phase one for rows with negative right-hand side; branch-and-bound over
//! columns needs it once a local assignment is fixed to one.
//!
//! Pricing is Dantzig's rule, switching to Bland's rule after a streak of
//! degenerate pivots. Each phase runs on a slightly raised right-hand side
//! to break ties; the basic solution is then recomputed for the true `b`
//! and any small infeasibility this exposes is repaired by dual simplex
//! pivots. Dual values `y ≥ 0` satisfy `c + Aᵀy ≥ 0` and are read
//! off the reduced costs of the slack columns at the final basis, so the dual
//! objective is `-bᵀy`.

use std::io::Write;

use thiserror::Error;

/// Default pivot tolerance.
pub const PIVOT_EPS: f64 = 1e-9;
/// Default tolerance for feasibility and duality reporting.
pub const REPORT_EPS: f64 = 1e-7;
/// Smallest tableau entry accepted as a pivot.
const PIVOT_FLOOR: f64 = 1e-7;
/// Scale of the right-hand-side shift applied while pivoting.
const PERTURBATION: f64 = 1e-7;
/// Basic values below `-CLEANUP_EPS` after restoring trigger dual pivots.
const CLEANUP_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLp {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl DenseLp {
    /// All-zero problem with `rows` constraints and `cols` variables.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseLp {
            rows,
            cols,
            a: vec![0.0; rows * cols],
            b: vec![0.0; rows],
            c: vec![0.0; cols],
        }
    }

    pub fn from_parts(a: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>) -> Result<Self, LpError> {
        let rows = b.len();
        let cols = c.len();
        if a.len() != rows || a.iter().any(|r| r.len() != cols) {
            return Err(LpError::Dimension);
        }
        Ok(DenseLp {
            rows,
            cols,
            a: a.into_iter().flatten().collect(),
            b,
            c,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.cols + j]
    }

    pub fn set_a(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.cols..(i + 1) * self.cols]
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn b_mut(&mut self) -> &mut [f64] {
        &mut self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn c_mut(&mut self) -> &mut [f64] {
        &mut self.c
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// `A x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, x)| a * x).sum())
            .collect()
    }

    /// `c + Aᵀ y`
    pub fn reduced_costs(&self, y: &[f64]) -> Vec<f64> {
        let mut d = self.c.clone();
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                for (dj, aij) in d.iter_mut().zip(self.row(i)) {
                    *dj += aij * yi;
                }
            }
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
    pub pivots: usize,
}

impl LpSolution {
    /// Dual objective `-bᵀy`.
    pub fn dual_objective(&self, lp: &DenseLp) -> f64 {
        -lp.b.iter().zip(&self.y).map(|(b, y)| b * y).sum::<f64>()
    }

    pub fn check(&self, lp: &DenseLp) -> DualityCheck {
        let ax = lp.apply(&self.x);
        let d = lp.reduced_costs(&self.y);
        let mut primal: f64 = 0.0;
        let mut dual: f64 = 0.0;
        let mut cs: f64 = 0.0;
        for ((&b, &a), &y) in lp.b.iter().zip(&ax).zip(&self.y) {
            let slack = b - a;
            primal = primal.max(-slack);
            dual = dual.max(-y);
            cs = cs.max((y * slack).abs());
        }
        for (&x, &dj) in self.x.iter().zip(&d) {
            primal = primal.max(-x);
            dual = dual.max(-dj);
            cs = cs.max((x * dj).abs());
        }
        DualityCheck {
            gap: (lp.objective_at(&self.x) - self.dual_objective(lp)).abs(),
            complementary_slackness: cs,
            primal_infeasibility: primal,
            dual_infeasibility: dual,
        }
    }
}

/// Optimality certificate residuals; all zero for an exact optimum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DualityCheck {
    pub gap: f64,
    pub complementary_slackness: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
}

impl DualityCheck {
    pub fn holds(&self, eps: f64, objective: f64) -> bool {
        self.gap <= eps * (1.0 + objective.abs())
            && self.complementary_slackness <= eps
            && self.primal_infeasibility <= eps
            && self.dual_infeasibility <= eps
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("row {row} has negative right-hand side {value}")]
    NegativeRhs { row: usize, value: f64 },
    #[error("non-finite coefficient in LP data")]
    NonFinite,
    #[error("matrix dimensions do not match")]
    Dimension,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub pivot_eps: f64,
    pub feas_eps: f64,
    pub max_pivots: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            pivot_eps: PIVOT_EPS,
            feas_eps: REPORT_EPS,
            max_pivots: 200_000,
            bland_after: 50,
        }
    }
}

/// Solves an LP whose right-hand side is nonnegative.
pub fn solve_lp(lp: &DenseLp, eps: f64) -> Result<LpSolution, LpError> {
    let opts = SimplexOptions {
        pivot_eps: eps,
        ..SimplexOptions::default()
    };
    solve_lp_with(lp, &opts, None)
}

/// [`solve_lp`] with explicit options and an optional pivot-by-pivot log.
pub fn solve_lp_with<'a>(
    lp: &'a DenseLp,
    opts: &SimplexOptions,
    trace: Option<&'a mut dyn Write>,
) -> Result<LpSolution, LpError> {
    check_finite(lp)?;
    if let Some((row, &value)) = lp.b.iter().enumerate().find(|(_, &b)| b < 0.0) {
        return Err(LpError::NegativeRhs { row, value });
    }
    Ok(Tableau::new(lp, opts, trace).run())
}

/// Two-phase solve accepting any sign of `b`. Reports
/// [`LpStatus::Infeasible`] when no `x ≥ 0` satisfies `Ax ≤ b`.
pub fn solve_lp_general(lp: &DenseLp, opts: &SimplexOptions) -> Result<LpSolution, LpError> {
    check_finite(lp)?;
    Ok(Tableau::new(lp, opts, None).run())
}

fn check_finite(lp: &DenseLp) -> Result<(), LpError> {
    if lp.a.len() != lp.rows * lp.cols {
        return Err(LpError::Dimension);
    }
    if lp.a.iter().chain(&lp.b).chain(&lp.c).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LpError::NonFinite)
    }
}

enum Step {
    Optimal,
    Unbounded,
    Limit,
}

/// Columns: `n` structural, then `m` slacks, then one artificial per row
/// whose right-hand side was negative.
struct Tableau<'a> {
    lp: &'a DenseLp,
    opts: SimplexOptions,
    m: usize,
    n: usize,
    width: usize,
    t: Vec<f64>,
    rhs: Vec<f64>,
    d: Vec<f64>,
    obj: f64,
    basis: Vec<usize>,
    blocked: Vec<bool>,
    artificial_rows: Vec<usize>,
    /// Row signs applied so that every starting right-hand side is ≥ 0.
    sign: Vec<f64>,
    /// Starting right-hand side before perturbation.
    rhs0: Vec<f64>,
    pivots: usize,
    degenerate_streak: usize,
    scratch: Vec<(usize, f64)>,
    trace: Option<&'a mut dyn Write>,
}

impl<'a> Tableau<'a> {
    fn new(lp: &'a DenseLp, opts: &SimplexOptions, trace: Option<&'a mut dyn Write>) -> Self {
        let (m, n) = (lp.rows, lp.cols);
        let artificial_rows: Vec<usize> = (0..m).filter(|&i| lp.b[i] < 0.0).collect();
        let width = n + m + artificial_rows.len();
        let mut t = vec![0.0; m * width];
        let mut rhs = vec![0.0; m];
        let mut basis = vec![0; m];
        let signs: Vec<f64> = lp.b.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
        for i in 0..m {
            let sign = signs[i];
            let row = &mut t[i * width..(i + 1) * width];
            for (dst, &src) in row[..n].iter_mut().zip(lp.row(i)) {
                *dst = sign * src;
            }
            row[n + i] = sign;
            rhs[i] = sign * lp.b[i];
            basis[i] = n + i;
        }
        for (k, &i) in artificial_rows.iter().enumerate() {
            t[i * width + n + m + k] = 1.0;
            basis[i] = n + m + k;
        }
        let rhs0 = rhs.clone();
        Tableau {
            lp,
            opts: *opts,
            m,
            n,
            width,
            t,
            rhs,
            d: vec![0.0; width],
            obj: 0.0,
            basis,
            blocked: vec![false; width],
            artificial_rows,
            sign: signs,
            rhs0,
            pivots: 0,
            degenerate_streak: 0,
            scratch: Vec::new(),
            trace,
        }
    }

    fn run(mut self) -> LpSolution {
        if !self.artificial_rows.is_empty() {
            if let Err(status) = self.phase_one() {
                return self.finish(status);
            }
        }
        self.perturb();
        self.load_objective();
        let step = self.iterate();
        self.restore();
        let status = match step {
            Step::Optimal => match self.dual_cleanup() {
                Ok(()) => LpStatus::Optimal,
                Err(status) => status,
            },
            Step::Unbounded => LpStatus::Unbounded,
            Step::Limit => LpStatus::IterationLimit,
        };
        self.finish(status)
    }

    fn phase_one(&mut self) -> Result<(), LpStatus> {
        let art_start = self.n + self.m;
        self.perturb();
        self.d.iter_mut().for_each(|v| *v = 0.0);
        self.obj = 0.0;
        for &i in &self.artificial_rows {
            let row = &self.t[i * self.width..(i + 1) * self.width];
            for (dj, &tij) in self.d[..art_start].iter_mut().zip(row) {
                *dj -= tij;
            }
            self.obj += self.rhs[i];
        }
        self.trace_line("phase one");
        match self.iterate() {
            Step::Optimal => {}
            Step::Unbounded => unreachable!("phase one is bounded below by zero"),
            Step::Limit => return Err(LpStatus::IterationLimit),
        }
        self.restore();
        self.dual_cleanup()?;
        let residual: f64 = (0..self.m)
            .filter(|&r| self.basis[r] >= art_start)
            .map(|r| self.rhs[r])
            .sum();
        if residual > self.opts.feas_eps {
            return Err(LpStatus::Infeasible);
        }
        // pivot remaining zero-level artificials out where possible
        for r in 0..self.m {
            if self.basis[r] < art_start {
                continue;
            }
            let row = &self.t[r * self.width..r * self.width + art_start];
            if let Some(q) = (0..art_start).find(|&j| row[j].abs() > PIVOT_FLOOR) {
                self.pivot(r, q);
            }
        }
        for j in art_start..self.width {
            self.blocked[j] = true;
        }
        self.degenerate_streak = 0;
        Ok(())
    }

    fn load_objective(&mut self) {
        let cost = |j: usize| if j < self.n { self.lp.c[j] } else { 0.0 };
        let mut d: Vec<f64> = (0..self.width).map(cost).collect();
        let mut obj = 0.0;
        for r in 0..self.m {
            let cb = cost(self.basis[r]);
            if cb != 0.0 {
                let row = &self.t[r * self.width..(r + 1) * self.width];
                for (dj, &trj) in d.iter_mut().zip(row) {
                    *dj -= cb * trj;
                }
                obj += cb * self.rhs[r];
            }
        }
        self.d = d;
        self.obj = obj;
        self.trace_line("phase two");
    }

    fn iterate(&mut self) -> Step {
        loop {
            let bland = self.degenerate_streak >= self.opts.bland_after;
            let Some(q) = self.entering(bland) else {
                return Step::Optimal;
            };
            let Some(r) = self.leaving(q, bland) else {
                return Step::Unbounded;
            };
            if self.pivots >= self.opts.max_pivots {
                return Step::Limit;
            }
            // Bland's rule stays on once engaged: leaving it mid-stall can cycle
            if self.rhs[r] <= self.opts.pivot_eps {
                self.degenerate_streak += 1;
            } else if !bland {
                self.degenerate_streak = 0;
            }
            self.pivot(r, q);
        }
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let tol = self.opts.pivot_eps;
        let candidates = (0..self.width).filter(|&j| !self.blocked[j] && self.d[j] < -tol);
        if bland {
            candidates.into_iter().next()
        } else {
            let mut best: Option<usize> = None;
            for j in candidates {
                if best.is_none_or(|b| self.d[j] < self.d[b]) {
                    best = Some(j);
                }
            }
            best
        }
    }

    /// Minimum-ratio row; ties go to the largest pivot element (Dantzig) or
    /// the smallest basic index (Bland). Entries below `PIVOT_FLOOR` are
    /// never pivoted on: they are roundoff, and in degenerate rows they would
    /// win the ratio test.
    fn leaving(&self, q: usize, bland: bool) -> Option<usize> {
        let w = self.width;
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.m {
            let a = self.t[r * w + q];
            if a <= PIVOT_FLOOR {
                continue;
            }
            let ratio = self.rhs[r].max(0.0) / a;
            let better = match best {
                None => true,
                Some((b, br)) => {
                    if ratio < br - 1e-12 {
                        true
                    } else if ratio <= br + 1e-12 {
                        if bland {
                            self.basis[r] < self.basis[b]
                        } else {
                            let ba = self.t[b * w + q];
                            a > ba || (a == ba && self.basis[r] < self.basis[b])
                        }
                    } else {
                        false
                    }
                }
            };
            if better {
                best = Some((r, ratio));
            }
        }
        best.map(|(r, _)| r)
    }

    /// Shifts every right-hand side up by a small, row-dependent amount so
    /// that ties in the ratio test become unlikely.
    fn perturb(&mut self) {
        for (r, v) in self.rhs.iter_mut().enumerate() {
            let u = (r as f64 * 0.618_033_988_749_895).fract();
            *v += PERTURBATION * (1.0 + u);
        }
    }

    /// Recomputes the basic solution for the unperturbed right-hand side as
    /// `B⁻¹b`, reading `B⁻¹` off the slack columns.
    fn restore(&mut self) {
        let (w, n) = (self.width, self.n);
        for r in 0..self.m {
            let row = &self.t[r * w..(r + 1) * w];
            let v: f64 = (0..self.m).map(|i| self.sign[i] * row[n + i] * self.rhs0[i]).sum();
            self.rhs[r] = if v.abs() < 1e-12 { 0.0 } else { v };
        }
    }

    /// Dual simplex pivots until the restored basic solution is feasible.
    /// The reduced costs stay nonnegative throughout.
    fn dual_cleanup(&mut self) -> Result<(), LpStatus> {
        let w = self.width;
        loop {
            let Some(r) = (0..self.m)
                .filter(|&r| self.rhs[r] < -CLEANUP_EPS)
                .min_by(|&a, &b| self.rhs[a].total_cmp(&self.rhs[b]))
            else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for j in 0..w {
                let a = self.t[r * w + j];
                if self.blocked[j] || a >= -PIVOT_FLOOR {
                    continue;
                }
                let ratio = self.d[j].max(0.0) / -a;
                if best.is_none_or(|(_, br)| ratio < br) {
                    best = Some((j, ratio));
                }
            }
            let Some((q, _)) = best else {
                return Err(LpStatus::Infeasible);
            };
            if self.pivots >= self.opts.max_pivots {
                return Err(LpStatus::IterationLimit);
            }
            self.pivot(r, q);
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.width;
        let inv = 1.0 / self.t[r * w + q];
        self.scratch.clear();
        for j in 0..w {
            let v = self.t[r * w + j];
            if v != 0.0 {
                let nv = if j == q { 1.0 } else { v * inv };
                self.t[r * w + j] = nv;
                self.scratch.push((j, nv));
            }
        }
        self.rhs[r] *= inv;
        let pivot_rhs = self.rhs[r];
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * w..(i + 1) * w];
            for &(j, v) in &self.scratch {
                let nv = row[j] - f * v;
                row[j] = if nv.abs() < 1e-13 { 0.0 } else { nv };
            }
            row[q] = 0.0;
            let nr = self.rhs[i] - f * pivot_rhs;
            self.rhs[i] = if nr.abs() < 1e-12 { 0.0 } else { nr };
        }
        let dq = self.d[q];
        if dq != 0.0 {
            for &(j, v) in &self.scratch {
                self.d[j] -= dq * v;
            }
            self.d[q] = 0.0;
            self.obj += dq * pivot_rhs;
        }
        self.basis[r] = q;
        self.pivots += 1;
        if self.trace.is_some() {
            self.trace_pivot(r, q);
        }
    }

    fn trace_line(&mut self, msg: &str) {
        if let Some(w) = self.trace.as_mut() {
            let _ = writeln!(w, "-- {msg}");
        }
    }

    fn trace_pivot(&mut self, r: usize, q: usize) {
        let (m, w) = (self.m, self.width);
        let Some(out) = self.trace.as_mut() else {
            return;
        };
        let _ = writeln!(out, "pivot {} enter {} row {} obj {:.9}", self.pivots, q, r, self.obj);
        let fmt_row = |vals: &[f64]| vals.iter().map(|v| format!("{v:9.4}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "  d   | {}", fmt_row(&self.d));
        for i in 0..m {
            let _ = writeln!(
                out,
                "  x{:<3}| {} | {:9.4}",
                self.basis[i],
                fmt_row(&self.t[i * w..(i + 1) * w]),
                self.rhs[i]
            );
        }
    }

    fn finish(self, status: LpStatus) -> LpSolution {
        let mut x = vec![0.0; self.n];
        for r in 0..self.m {
            if self.basis[r] < self.n {
                x[self.basis[r]] = self.rhs[r];
            }
        }
        let y: Vec<f64> = (0..self.m).map(|i| self.d[self.n + i]).collect();
        LpSolution {
            objective: self.lp.objective_at(&x),
            x,
            y,
            status,
            pivots: self.pivots,
        }
    }
}
