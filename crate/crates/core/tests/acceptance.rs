//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::time::Instant;

use posecg::instance::{generate_synthetic, generate_with, Detection, Instance, PartGraph, SyntheticConfig};
use posecg::lp::{solve_lp, PIVOT_EPS};
use posecg::master::{DualValues, TripleFlavor};
use posecg::oracle::{
    brute_force_optima, brute_force_price, brute_force_solve, enumerate_all_columns, full_lp, validate_solution,
    PriceKind,
};
use posecg::pricing::{price_global_bnb, price_global_dp, price_local, DEFAULT_NODE_CAP};
use posecg::solution::SolutionFile;
use posecg::solver::{run_column_generation, run_column_row_generation, solve, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const OBJ_TOL: f64 = 1e-6;
const PRICE_TOL: f64 = 1e-9;
const DUALITY_TOL: f64 = 1e-7;

struct Outcome {
    pass: bool,
    detail: String,
}

/// Largest duality gap and slackness residual seen over master solves.
#[derive(Default)]
struct LpStats {
    solves: usize,
    gap: f64,
    slackness: f64,
}

impl LpStats {
    fn add(&mut self, solves: usize, gap: f64, slackness: f64) {
        self.solves += solves;
        self.gap = self.gap.max(gap);
        self.slackness = self.slackness.max(slackness);
    }
}

fn a1_instance(seed: u64) -> Instance {
    generate_with(&SyntheticConfig::small(seed, 8))
}

/// A1 sweep; returns the outcome and every solution file for A7.
fn a1(stats: &mut LpStats) -> (Outcome, Vec<String>) {
    let cfg = SolverConfig::default();
    let mut files = Vec::new();
    let mut mismatches = Vec::new();
    let mut invalid = 0;
    let mut fractional = 0;
    let mut max_diff: f64 = 0.0;
    for seed in 0..200 {
        let inst = a1_instance(seed);
        let (sol, report) = solve(&inst, &cfg).expect("solve");
        stats.add(report.lp_solves, report.max_duality_gap, report.max_slackness);
        fractional += usize::from(!report.lp_integral);
        let oracle = brute_force_solve(&inst).expect("oracle");
        let diff = (sol.objective - oracle.objective).abs();
        max_diff = max_diff.max(diff);
        if diff > OBJ_TOL || report.ilp_objective < report.lp_objective - OBJ_TOL {
            mismatches.push(seed);
        }
        if validate_solution(&inst, &sol, 1e-9).is_err() {
            invalid += 1;
        }
        files.push(SolutionFile::from_solution(&inst, &sol, Some(report)).to_json_pretty());
    }
    let pass = mismatches.is_empty() && invalid == 0;
    let detail = format!(
        "200 instances, {} objective mismatches {:?}, {invalid} invalid, max |diff| {max_diff:.1e}, {fractional} fractional relaxations",
        mismatches.len(),
        &mismatches[..mismatches.len().min(5)]
    );
    (Outcome { pass, detail }, files)
}

fn a2(stats: &mut LpStats) -> Outcome {
    let cfg = SolverConfig::default();
    let mut bad = Vec::new();
    let mut max_diff: f64 = 0.0;
    let mut seed = 1000;
    let mut done = 0;
    while done < 100 {
        let inst = generate_with(&SyntheticConfig::small(seed, 10));
        seed += 1;
        let g = run_column_generation(&inst, &cfg).expect("column generation");
        stats.add(g.report.lp_solves, g.report.max_duality_gap, g.report.max_slackness);
        let universe = enumerate_all_columns(&inst).expect("universe");
        let lp = full_lp(&inst, &universe, &[]);
        let full = solve_lp(&lp, PIVOT_EPS).expect("oracle LP");
        let check = full.check(&lp);
        stats.add(1, check.gap, check.complementary_slackness);
        let diff = (g.lp_objective - full.objective).abs();
        max_diff = max_diff.max(diff);
        if diff > OBJ_TOL || !g.report.lp_converged {
            bad.push(seed - 1);
        }
        done += 1;
    }
    Outcome {
        pass: bad.is_empty(),
        detail: format!(
            "100 instances, {} mismatches {:?}, max |diff| {max_diff:.1e}",
            bad.len(),
            &bad[..bad.len().min(5)]
        ),
    }
}

fn a3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checks = [0usize; 3];
    let mut failures = [0usize; 3];
    let mut max_diff: f64 = 0.0;
    let mut record = |k: usize, a: f64, b: f64| {
        checks[k] += 1;
        let diff = if a == b { 0.0 } else { (a - b).abs() };
        max_diff = max_diff.max(diff);
        if diff > PRICE_TOL {
            failures[k] += 1;
        }
    };
    for _ in 0..1000 {
        let inst = common::random_instance(&mut rng, 12);
        let duals = common::random_duals(&mut rng, &inst);
        let plain = DualValues {
            lambda4: Vec::new(),
            ..duals.clone()
        };
        for d in 0..inst.n_detections() {
            let ours = price_local(&inst, d, &duals, 1e-8).unwrap();
            let brute = brute_force_price(&inst, d, &duals, PriceKind::Local, 1e-8).unwrap();
            record(0, ours.reduced_cost, brute.reduced_cost);
            if !inst.is_major_detection(d) {
                continue;
            }
            let ours = price_global_dp(&inst, d, &plain, 1e-8).unwrap();
            let brute = brute_force_price(&inst, d, &plain, PriceKind::Global, 1e-8).unwrap();
            record(1, ours.reduced_cost, brute.reduced_cost);
            let ours = price_global_bnb(&inst, d, &duals, 1e-8, DEFAULT_NODE_CAP).unwrap();
            let brute = brute_force_price(&inst, d, &duals, PriceKind::Global, 1e-8).unwrap();
            record(2, ours.reduced_cost, brute.reduced_cost);
        }
    }
    Outcome {
        pass: failures.iter().all(|&f| f == 0),
        detail: format!(
            "1000 draws; local {}/{}, global DP {}/{}, global B&B {}/{} agree; max |diff| {max_diff:.1e}",
            checks[0] - failures[0],
            checks[0],
            checks[1] - failures[1],
            checks[1],
            checks[2] - failures[2],
            checks[2]
        ),
    }
}

fn a4(stats: &LpStats) -> Outcome {
    Outcome {
        pass: stats.gap <= DUALITY_TOL && stats.slackness <= DUALITY_TOL,
        detail: format!(
            "{} LP solves, max duality gap {:.1e}, max complementary slackness {:.1e}",
            stats.solves, stats.gap, stats.slackness
        ),
    }
}

/// Three detections of three mutually adjacent parts. Every pair pose costs
/// −4 and the full pose −5, so the relaxation prefers ½ on each pair pose.
fn odd_cycle() -> Instance {
    let g = PartGraph::new(
        &["neck", "head", "shoulder"],
        &["neck", "head"],
        &[("neck", "head"), ("neck", "shoulder"), ("head", "shoulder")],
    )
    .unwrap();
    let dets = (0..3)
        .map(|id| Detection {
            id,
            part: id,
            position: None,
            theta: -9.0,
        })
        .collect();
    Instance::new(g, dets, vec![(0, 1, 4.0), (0, 2, 4.0), (1, 2, 4.0)], 10.0).unwrap()
}

fn a5() -> Outcome {
    let inst = odd_cycle();
    let universe = enumerate_all_columns(&inst).unwrap();
    let oracle_lp = solve_lp(&full_lp(&inst, &universe, &[]), PIVOT_EPS).unwrap();
    let oracle_ilp = brute_force_solve(&inst).unwrap().objective;
    let cfg = SolverConfig::default();
    let plain = run_column_generation(&inst, &cfg).unwrap();
    let rows = run_column_row_generation(&inst, &cfg).unwrap();
    let n_global = rows.rows.global.len();
    let pass = oracle_lp.objective < oracle_ilp - 0.5
        && plain.is_fractional()
        && n_global >= 1
        && rows.rows.global.iter().all(|r| r.flavor == TripleFlavor::Global)
        && !rows.is_fractional()
        && (rows.lp_objective - oracle_ilp).abs() <= 1e-9;
    Outcome {
        pass,
        detail: format!(
            "oracle LP {} vs ILP {oracle_ilp}; without rows LP {} (fractional {}); with rows LP {} (integral {}), {n_global} global rows",
            oracle_lp.objective,
            plain.lp_objective,
            plain.is_fractional(),
            rows.lp_objective,
            !rows.is_fractional()
        ),
    }
}

fn a6() -> (Outcome, Outcome) {
    let mut cfg = SyntheticConfig::new(2024, 7, 0.3, 0.1);
    cfg.max_total = Some(150);
    let inst = generate_with(&cfg);
    let start = Instant::now();
    let (_, report) = solve(&inst, &SolverConfig::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let scale = Outcome {
        pass: inst.n_detections() == 150 && secs < 10.0 && report.n_columns() <= 1000 && report.ilp_certified,
        detail: format!(
            "{} detections: {:.2} s, {} columns ({} global + {} local), {} iterations",
            inst.n_detections(),
            secs,
            report.n_columns(),
            report.n_columns_global,
            report.n_columns_local,
            report.n_iterations
        ),
    };

    let no_rows = SolverConfig {
        enable_triples: false,
        ..SolverConfig::default()
    };
    let mut integral = 0;
    let mut total_dets = 0;
    for seed in 0..500u64 {
        let inst = generate_synthetic(seed, 1 + (seed % 4) as usize, 0.3, 0.1);
        total_dets += inst.n_detections();
        let g = run_column_generation(&inst, &no_rows).unwrap();
        integral += usize::from(!g.is_fractional());
    }
    let rate = integral as f64 / 500.0;
    let sweep = Outcome {
        pass: rate >= 0.8,
        detail: format!(
            "{integral}/500 integral relaxations without rows ({:.1}%), mean {} detections",
            100.0 * rate,
            total_dets / 500
        ),
    };
    (scale, sweep)
}

fn a7(first: &[String]) -> Outcome {
    let mut stats = LpStats::default();
    let (_, second) = a1(&mut stats);
    let same = first.len() == second.len() && first.iter().zip(&second).all(|(a, b)| a == b);
    let differing = first.iter().zip(&second).filter(|(a, b)| a != b).count();
    Outcome {
        pass: same,
        detail: format!("{} solution files compared, {differing} differ", first.len()),
    }
}

fn a8() -> Outcome {
    let cfg = SolverConfig::default();
    let mut failures = Vec::new();
    for seed in 0..50u64 {
        let inst = generate_with(&SyntheticConfig::small(5000 + seed, 6));
        let (base_obj, base_set) = brute_force_optima(&inst, 1e-9).unwrap();
        let mut base_sigs: Vec<_> = base_set.iter().map(|s| s.signature()).collect();
        base_sigs.sort();
        let solved = solve(&inst, &cfg).unwrap().0.objective;
        for s in [0.5, 3.0] {
            let scaled = inst.scaled(s);
            let (obj, set) = brute_force_optima(&scaled, 1e-9).unwrap();
            let mut sigs: Vec<_> = set.iter().map(|s| s.signature()).collect();
            sigs.sort();
            let solved_scaled = solve(&scaled, &cfg).unwrap().0.objective;
            if (obj - s * base_obj).abs() > 1e-9 * (1.0 + obj.abs())
                || sigs != base_sigs
                || (solved_scaled - s * solved).abs() > OBJ_TOL
            {
                failures.push(format!("seed {seed} scale {s}"));
            }
        }
        let mut last = usize::MAX;
        for omega in [0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
            let (_, set) = brute_force_optima(&inst.with_omega(omega), 1e-9).unwrap();
            let fewest = set.iter().map(|s| s.n_poses()).min().unwrap();
            if fewest > last {
                failures.push(format!("seed {seed} omega {omega}"));
            }
            last = fewest;
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "50 instances, scale factors 0.5 and 3, 8 omega values; {} violations {:?}",
            failures.len(),
            &failures[..failures.len().min(3)]
        ),
    }
}

fn report(id: &str, name: &str, outcome: &Outcome, secs: f64) -> bool {
    println!(
        "{id} {} {name}: {} [{secs:.2} s]",
        if outcome.pass { "PASS" } else { "FAIL" },
        outcome.detail
    );
    outcome.pass
}

fn main() {
    let mut ok = true;
    let mut stats = LpStats::default();

    let t = Instant::now();
    let (out, files) = a1(&mut stats);
    ok &= report("A1", "oracle ILP equivalence", &out, t.elapsed().as_secs_f64());

    let t = Instant::now();
    let out = a2(&mut stats);
    ok &= report("A2", "column generation LP exactness", &out, t.elapsed().as_secs_f64());

    let t = Instant::now();
    let out = a3();
    ok &= report("A3", "pricing oracle equivalence", &out, t.elapsed().as_secs_f64());

    ok &= report("A4", "LP duality", &a4(&stats), 0.0);

    let t = Instant::now();
    let out = a5();
    ok &= report("A5", "odd-set row tightening", &out, t.elapsed().as_secs_f64());

    let t = Instant::now();
    let (scale, sweep) = a6();
    let secs = t.elapsed().as_secs_f64();
    ok &= report("A6", "150-detection scale", &scale, secs);
    ok &= report("A6", "integral relaxation rate", &sweep, secs);

    let t = Instant::now();
    let out = a7(&files);
    ok &= report("A7", "determinism", &out, t.elapsed().as_secs_f64());

    let t = Instant::now();
    let out = a8();
    ok &= report("A8", "scaling and omega properties", &out, t.elapsed().as_secs_f64());

    if !ok {
        std::process::exit(1);
    }
}
