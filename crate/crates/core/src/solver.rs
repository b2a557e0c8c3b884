//! Column generation, column and row generation, and the final integer
//! program over the generated columns.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{DetId, Instance};
use crate::lp::{solve_lp, solve_lp_general, DenseLp, LpError, LpSolution, LpStatus, SimplexOptions, PIVOT_EPS};
use crate::master::{build_restricted_lp, AddOutcome, ColumnPool, DualValues, RowPool};
use crate::pricing::{price_global, price_local, PricingError, PricingResult, DEFAULT_NODE_CAP};
use crate::rowgen::{is_fractional, separate_triples_global, separate_triples_local, SeparationOptions, DEFAULT_TOP_K};
use crate::solution::Solution;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// A column enters when its reduced cost is below `-tolerance`.
    pub tolerance: f64,
    pub enable_triples: bool,
    pub ilp_node_cap: usize,
    pub pricing_node_cap: usize,
    pub threads: usize,
    pub top_k: usize,
    pub full_separation: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 200,
            tolerance: 1e-8,
            enable_triples: true,
            ilp_node_cap: 100_000,
            pricing_node_cap: DEFAULT_NODE_CAP,
            threads: 1,
            top_k: DEFAULT_TOP_K,
            full_separation: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("restricted master LP ended with status {0:?}")]
    MasterStatus(LpStatus),
    #[error("branch-and-bound node LP ended with status {0:?}")]
    NodeStatus(LpStatus),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub lp_objective: f64,
    pub ilp_objective: f64,
    pub n_columns_global: usize,
    pub n_columns_local: usize,
    pub n_triple_rows: usize,
    pub n_iterations: usize,
    pub lp_integral: bool,
    pub bnb_nodes: usize,
    /// Column generation stopped because no column or row was violated.
    pub lp_converged: bool,
    /// The integer program over the pool was solved to optimality.
    pub ilp_certified: bool,
    pub iteration_cap_reached: bool,
    pub node_cap_reached: bool,
    pub pricing_cap_reached: bool,
    pub lp_solves: usize,
    /// Largest duality gap over all master solves.
    pub max_duality_gap: f64,
    /// Largest complementary-slackness residual over all master solves.
    pub max_slackness: f64,
    /// Seconds; left out of solution files so reruns compare equal.
    #[serde(skip)]
    pub wall_time: f64,
}

impl SolveReport {
    pub fn n_columns(&self) -> usize {
        self.n_columns_global + self.n_columns_local
    }

    pub fn caps_reached(&self) -> bool {
        self.iteration_cap_reached || self.node_cap_reached || self.pricing_cap_reached
    }

    fn record_lp(&mut self, lp: &DenseLp, sol: &LpSolution) {
        let check = sol.check(lp);
        self.lp_solves += 1;
        self.max_duality_gap = self.max_duality_gap.max(check.gap);
        self.max_slackness = self.max_slackness.max(check.complementary_slackness);
    }
}

/// State of a generation run: the pools plus the last master solution.
#[derive(Debug, Clone)]
pub struct Generation {
    pub pool: ColumnPool,
    pub rows: RowPool,
    pub duals: DualValues,
    pub lp_objective: f64,
    /// Master primal over `pool`, globals first.
    pub x: Vec<f64>,
    pub report: SolveReport,
}

impl Generation {
    pub fn new(inst: &Instance) -> Self {
        Generation {
            pool: ColumnPool::new(),
            rows: RowPool::new(),
            duals: DualValues::zeros(inst.n_detections()),
            lp_objective: 0.0,
            x: Vec::new(),
            report: SolveReport::default(),
        }
    }

    pub fn is_fractional(&self) -> bool {
        self.x.iter().any(|&v| is_fractional(v))
    }

    pub fn gamma(&self) -> &[f64] {
        &self.x[..self.pool.globals.len()]
    }

    pub fn psi(&self) -> &[f64] {
        &self.x[self.pool.globals.len()..]
    }
}

#[derive(Clone, Copy)]
enum Task {
    Local(DetId),
    Global(DetId),
}

fn run_task(
    inst: &Instance,
    task: Task,
    duals: &DualValues,
    cfg: &SolverConfig,
) -> Result<PricingResult, PricingError> {
    match task {
        Task::Local(d) => price_local(inst, d, duals, cfg.tolerance),
        Task::Global(d) => price_global(inst, d, duals, cfg.tolerance, cfg.pricing_node_cap),
    }
}

/// Every pricing problem, in the fixed order locals-then-globals by
/// detection id, optionally spread over threads.
fn price_all(inst: &Instance, duals: &DualValues, cfg: &SolverConfig) -> Vec<Result<PricingResult, PricingError>> {
    let n = inst.n_detections();
    let tasks: Vec<Task> = (0..n)
        .map(Task::Local)
        .chain((0..n).filter(|&d| inst.is_major_detection(d)).map(Task::Global))
        .collect();
    let threads = cfg.threads.max(1).min(tasks.len().max(1));
    if threads == 1 {
        return tasks.iter().map(|&t| run_task(inst, t, duals, cfg)).collect();
    }
    let chunk = tasks.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = tasks
            .chunks(chunk)
            .map(|ts| s.spawn(move || ts.iter().map(|&t| run_task(inst, t, duals, cfg)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("pricing thread panicked"))
            .collect()
    })
}

fn solve_master(inst: &Instance, state: &mut Generation) -> Result<(), SolverError> {
    let master = build_restricted_lp(inst, &state.pool, &state.rows);
    let sol = solve_lp(&master.lp, PIVOT_EPS)?;
    if sol.status != LpStatus::Optimal {
        return Err(SolverError::MasterStatus(sol.status));
    }
    state.report.record_lp(&master.lp, &sol);
    state.duals = master.layout.unpack_duals(&sol.y, &state.rows);
    state.lp_objective = sol.objective;
    state.x = sol.x;
    Ok(())
}

/// Shared loop of both generation algorithms. With `rows` set, odd-set
/// rows are separated whenever the master solution is fractional.
fn generate(inst: &Instance, cfg: &SolverConfig, state: &mut Generation, rows: bool) -> Result<(), SolverError> {
    let sep = SeparationOptions {
        top_k: cfg.top_k,
        full: cfg.full_separation,
    };
    state.report.lp_converged = false;
    loop {
        if state.report.n_iterations >= cfg.max_iterations {
            state.report.iteration_cap_reached = true;
            log::warn!(
                "column generation stopped at the iteration cap of {}",
                cfg.max_iterations
            );
            return Ok(());
        }
        state.report.n_iterations += 1;
        solve_master(inst, state)?;

        let mut added = 0;
        for result in price_all(inst, &state.duals, cfg) {
            let r = match result {
                Ok(r) => r,
                Err(PricingError::IterationLimit(n)) => {
                    log::warn!("global pricing gave up after {n} nodes");
                    state.report.pricing_cap_reached = true;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            if let (true, Some(col)) = (r.violated, r.column) {
                let outcome = state.pool.add(inst, col).expect("priced columns carry exact costs");
                added += usize::from(outcome == AddOutcome::Added);
            }
        }

        let mut cuts = 0;
        if rows && state.is_fractional() {
            let tol = cfg.tolerance;
            let mut found = separate_triples_global(inst, &state.pool, state.gamma(), tol, sep);
            found.extend(separate_triples_local(inst, &state.pool, state.psi(), tol, sep));
            for row in found {
                cuts += usize::from(state.rows.add(row));
            }
        }
        log::debug!(
            "iteration {}: lp {:.6}, +{added} columns, +{cuts} rows",
            state.report.n_iterations,
            state.lp_objective
        );
        if added == 0 && cuts == 0 {
            state.report.lp_converged = true;
            return Ok(());
        }
    }
}

fn finish_counts(state: &mut Generation) {
    state.report.lp_objective = state.lp_objective;
    state.report.n_columns_global = state.pool.globals.len();
    state.report.n_columns_local = state.pool.locals.len();
    state.report.n_triple_rows = state.rows.len();
    state.report.lp_integral = !state.is_fractional();
}

/// Column generation without odd-set rows.
pub fn run_column_generation(inst: &Instance, cfg: &SolverConfig) -> Result<Generation, SolverError> {
    let mut state = Generation::new(inst);
    generate(inst, cfg, &mut state, false)?;
    finish_counts(&mut state);
    Ok(state)
}

/// Column and row generation from scratch.
pub fn run_column_row_generation(inst: &Instance, cfg: &SolverConfig) -> Result<Generation, SolverError> {
    let mut state = Generation::new(inst);
    generate(inst, cfg, &mut state, true)?;
    finish_counts(&mut state);
    Ok(state)
}

/// Continues a finished run with row separation switched on.
pub fn continue_with_rows(inst: &Instance, cfg: &SolverConfig, state: &mut Generation) -> Result<(), SolverError> {
    generate(inst, cfg, state, true)?;
    finish_counts(state);
    Ok(())
}

fn selected(x: &[f64]) -> impl Iterator<Item = usize> + '_ {
    x.iter().enumerate().filter(|(_, &v)| v > 0.5).map(|(j, _)| j)
}

fn extract(inst: &Instance, pool: &ColumnPool, x: &[f64]) -> Solution {
    let ng = pool.globals.len();
    let mut globals = Vec::new();
    let mut locals = Vec::new();
    for j in selected(x) {
        if j < ng {
            globals.push(pool.globals[j].clone());
        } else {
            locals.push(pool.locals[j - ng].clone());
        }
    }
    Solution::from_columns(inst, globals, locals)
}

/// Outcome of the integer program over a fixed pool.
#[derive(Debug, Clone)]
pub struct IlpOutcome {
    pub solution: Solution,
    pub nodes: usize,
    pub certified: bool,
}

/// Depth-first branch-and-bound on column indicators. Fixing a column to
/// one moves it into the right-hand side, which can go negative, so node
/// LPs use the two-phase solver.
pub fn solve_ilp_over_columns(
    inst: &Instance,
    pool: &ColumnPool,
    rows: &RowPool,
    lp_x: &[f64],
    node_cap: usize,
) -> Result<IlpOutcome, SolverError> {
    if !lp_x.iter().any(|&v| is_fractional(v)) {
        return Ok(IlpOutcome {
            solution: extract(inst, pool, lp_x),
            nodes: 0,
            certified: true,
        });
    }
    let root = build_restricted_lp(inst, pool, rows).lp;
    let n = root.cols();
    let opts = SimplexOptions::default();
    let mut best_x: Vec<f64> = vec![0.0; n];
    let mut best = 0.0;
    // each entry is a list of (column, value) fixings
    let mut stack: Vec<Vec<(usize, bool)>> = vec![Vec::new()];
    let mut nodes = 0;
    while let Some(fixed) = stack.pop() {
        if nodes >= node_cap {
            log::warn!("integer program stopped at the node cap of {node_cap}");
            return Ok(IlpOutcome {
                solution: extract(inst, pool, &best_x),
                nodes,
                certified: false,
            });
        }
        nodes += 1;
        let (sub, free, offset) = restrict(&root, &fixed);
        let sol = solve_lp_general(&sub, &opts)?;
        if sol.status == LpStatus::Infeasible {
            continue;
        }
        if sol.status != LpStatus::Optimal {
            return Err(SolverError::NodeStatus(sol.status));
        }
        let bound = sol.objective + offset;
        if bound >= best - 1e-9 {
            continue;
        }
        let mut x = vec![0.0; n];
        for &(j, v) in &fixed {
            x[j] = f64::from(u8::from(v));
        }
        for (k, &j) in free.iter().enumerate() {
            x[j] = sol.x[k];
        }
        // most fractional, smallest index on ties
        let branch = free
            .iter()
            .map(|&j| (j, (x[j] - 0.5).abs()))
            .filter(|&(j, _)| is_fractional(x[j]))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        match branch {
            None => {
                best = bound;
                best_x = x.iter().map(|v| v.round()).collect();
            }
            Some((j, _)) => {
                let mut zero = fixed.clone();
                zero.push((j, false));
                let mut one = fixed;
                one.push((j, true));
                stack.push(zero);
                stack.push(one);
            }
        }
    }
    Ok(IlpOutcome {
        solution: extract(inst, pool, &best_x),
        nodes,
        certified: true,
    })
}

/// The LP with fixed columns removed: returns it, the surviving column
/// indices, and the cost of columns fixed to one.
fn restrict(lp: &DenseLp, fixed: &[(usize, bool)]) -> (DenseLp, Vec<usize>, f64) {
    let mut state = vec![None; lp.cols()];
    for &(j, v) in fixed {
        state[j] = Some(v);
    }
    let free: Vec<usize> = (0..lp.cols()).filter(|&j| state[j].is_none()).collect();
    let mut b = lp.b().to_vec();
    let mut offset = 0.0;
    for (j, s) in state.iter().enumerate() {
        if *s == Some(true) {
            offset += lp.c()[j];
            for (i, bi) in b.iter_mut().enumerate() {
                *bi -= lp.a(i, j);
            }
        }
    }
    let mut sub = DenseLp::zeros(lp.rows(), free.len());
    for i in 0..lp.rows() {
        for (k, &j) in free.iter().enumerate() {
            let v = lp.a(i, j);
            if v != 0.0 {
                sub.set_a(i, k, v);
            }
        }
    }
    sub.b_mut().copy_from_slice(&b);
    for (k, &j) in free.iter().enumerate() {
        sub.c_mut()[k] = lp.c()[j];
    }
    (sub, free, offset)
}

/// Full pipeline: column generation, row generation if the relaxation is
/// fractional and rows are enabled, then the integer program over the pool.
pub fn solve(inst: &Instance, cfg: &SolverConfig) -> Result<(Solution, SolveReport), SolverError> {
    let clock = Stopwatch::start();
    let mut state = run_column_generation(inst, cfg)?;
    if cfg.enable_triples && state.is_fractional() && !state.report.iteration_cap_reached {
        log::debug!("relaxation is fractional; separating odd-set rows");
        continue_with_rows(inst, cfg, &mut state)?;
    }
    let ilp = solve_ilp_over_columns(inst, &state.pool, &state.rows, &state.x, cfg.ilp_node_cap)?;
    let mut report = state.report;
    report.bnb_nodes = ilp.nodes;
    report.ilp_certified = ilp.certified;
    report.node_cap_reached = !ilp.certified;
    report.ilp_objective = ilp.solution.objective;
    report.wall_time = clock.elapsed();
    Ok((ilp.solution, report))
}

/// Wall-clock timer that reads zero where no clock is available.
#[derive(Debug, Clone, Copy)]
pub struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    pub fn start() -> Self {
        Stopwatch {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    pub fn elapsed(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}
