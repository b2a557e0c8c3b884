//! Cross-checks the simplex against exhaustive vertex enumeration on small
//! random LPs.

use nalgebra::{DMatrix, DVector};
use posecg::lp::{solve_lp, DenseLp, LpStatus, PIVOT_EPS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Minimum of `cᵀx` over every basic feasible point of
/// `{Ax ≤ b, 1ᵀx ≤ cap, x ≥ 0}`.
fn vertex_minimum(a: &[Vec<f64>], b: &[f64], c: &[f64], cap: f64) -> f64 {
    let n = c.len();
    let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
    rows.push((vec![1.0; n], cap));
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        rows.push((e, 0.0));
    }
    let mut best = f64::INFINITY;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let m = DMatrix::from_fn(n, n, |i, j| rows[pick[i]].0[j]);
        let rhs = DVector::from_fn(n, |i, _| rows[pick[i]].1);
        if let Some(x) = m.lu().solve(&rhs) {
            let feasible = rows
                .iter()
                .all(|(r, bi)| r.iter().zip(x.iter()).map(|(a, x)| a * x).sum::<f64>() <= bi + 1e-9);
            if feasible && x.iter().all(|v| v.is_finite()) {
                let val: f64 = c.iter().zip(x.iter()).map(|(c, x)| c * x).sum();
                best = best.min(val);
            }
        }
        // next combination
        let total = rows.len();
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < total - n + i {
                pick[i] += 1;
                for k in i + 1..n {
                    pick[k] = pick[k - 1] + 1;
                }
                break;
            }
        }
    }
}

#[test]
fn random_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 500 {
        let m = rng.random_range(1..=12);
        let n = rng.random_range(1..=12);
        if binomial(m + 1 + n, n) > 10_000 {
            continue;
        }
        let a: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                (0..n)
                    .map(|_| (rng.random_range(-1.0..2.0f64) * 4.0).round() / 4.0)
                    .collect()
            })
            .collect();
        let b: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..3.0f64)).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..1.0f64)).collect();
        let cap = 5.0;

        let mut rows = a.clone();
        rows.push(vec![1.0; n]);
        let mut rhs = b.clone();
        rhs.push(cap);
        let lp = DenseLp::from_parts(rows, rhs, c.clone()).unwrap();
        let sol = solve_lp(&lp, PIVOT_EPS).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let oracle = vertex_minimum(&a, &b, &c, cap);
        assert!(
            (sol.objective - oracle).abs() <= 1e-6,
            "case {checked}: simplex {} vs oracle {oracle} (m={m}, n={n})",
            sol.objective
        );
        let cert = sol.check(&lp);
        assert!(cert.holds(1e-7, sol.objective), "case {checked}: {cert:?}");
        checked += 1;
    }
}

#[test]
fn degenerate_assignment_polytope_terminates() {
    // Highly degenerate: 0/1 set-packing rows with many ties in cost.
    let n = 12;
    let mut rows = Vec::new();
    for i in 0..8 {
        rows.push(
            (0..n)
                .map(|j| if (i + j) % 3 == 0 || (i * j) % 5 == 1 { 1.0 } else { 0.0 })
                .collect(),
        );
    }
    let lp = DenseLp::from_parts(rows, vec![1.0; 8], vec![-1.0; n]).unwrap();
    let sol = solve_lp(&lp, PIVOT_EPS).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!(sol.check(&lp).holds(1e-9, sol.objective));
}
