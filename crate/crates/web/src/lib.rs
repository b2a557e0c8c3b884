//! Browser bindings: generate a synthetic scene, solve it, draw the result.
//! Instances and solutions cross the boundary as JSON strings.

use posecg::instance::{generate_synthetic, parse_instance, Instance, InstanceFile};
use posecg::solution::SolutionFile;
use posecg::solver::{solve, SolverConfig};
use posecg::svg::render_svg;
use wasm_bindgen::prelude::*;

fn load(instance_json: &str) -> Result<Instance, String> {
    parse_instance(instance_json, false)
        .map(|(inst, _)| inst)
        .map_err(|e| e.to_string())
}

/// Synthetic body14 scene as instance JSON.
pub fn generate_scene(seed: u64, people: usize, dup_rate: f64, fp_rate: f64) -> String {
    InstanceFile::from_instance(&generate_synthetic(seed, people, dup_rate, fp_rate)).to_json_pretty()
}

/// Solves with the given pose cost; a negative `omega` keeps the instance's.
pub fn solve_scene(instance_json: &str, omega: f64, triples: bool) -> Result<String, String> {
    let mut inst = load(instance_json)?;
    if omega >= 0.0 {
        inst = inst.with_omega(omega);
    }
    let cfg = SolverConfig {
        enable_triples: triples,
        ..SolverConfig::default()
    };
    let (sol, report) = solve(&inst, &cfg).map_err(|e| e.to_string())?;
    Ok(SolutionFile::from_solution(&inst, &sol, Some(report)).to_json_pretty())
}

pub fn render_scene(instance_json: &str, solution_json: &str) -> Result<String, String> {
    let inst = load(instance_json)?;
    let sol = SolutionFile::parse(solution_json)
        .and_then(|f| f.to_solution(&inst))
        .map_err(|e| e.to_string())?;
    render_svg(&inst, &sol).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn generate(seed: u32, people: u32, dup_rate: f64, fp_rate: f64) -> String {
    generate_scene(u64::from(seed), people as usize, dup_rate, fp_rate)
}

#[wasm_bindgen]
pub fn solve_instance(instance_json: &str, omega: f64, triples: bool) -> Result<String, JsError> {
    solve_scene(instance_json, omega, triples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn render(instance_json: &str, solution_json: &str) -> Result<String, JsError> {
    render_scene(instance_json, solution_json).map_err(|e| JsError::new(&e))
}
