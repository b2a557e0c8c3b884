//! Random instances and duals shared by the integration tests.
#![allow(dead_code)]

use posecg::instance::{Detection, Instance, PartGraph};
use posecg::master::{DualValues, TripleDual, TripleFlavor, TripleRow};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

pub fn graphs() -> Vec<PartGraph> {
    vec![
        PartGraph::new(&["neck", "head"], &["neck"], &[("neck", "head")]).unwrap(),
        PartGraph::upper4(),
        PartGraph::new(
            &["neck", "head", "shoulder"],
            &["neck", "head"],
            &[("neck", "head"), ("neck", "shoulder"), ("head", "shoulder")],
        )
        .unwrap(),
        PartGraph::body14(),
    ]
}

/// Dense random costs on a random graph: every legal pair gets a
/// pairwise term with probability 0.7.
pub fn random_instance(rng: &mut impl Rng, max_detections: usize) -> Instance {
    let graph = graphs().choose(rng).unwrap().clone();
    let n = rng.random_range(1..=max_detections);
    let majors: Vec<usize> = graph.major_parts().collect();
    let dets: Vec<Detection> = (0..n)
        .map(|id| {
            let part = if id == 0 || rng.random_bool(0.2) {
                *majors.choose(rng).unwrap()
            } else {
                rng.random_range(0..graph.n_parts())
            };
            Detection {
                id,
                part,
                position: None,
                theta: rng.random_range(-10.0..5.0),
            }
        })
        .collect();
    let mut pairs = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let (pa, pb) = (dets[a].part, dets[b].part);
            if (pa == pb || graph.has_edge(pa, pb)) && rng.random_bool(0.7) {
                pairs.push((a, b, rng.random_range(-4.0..4.0)));
            }
        }
    }
    let omega = rng.random_range(0.0..10.0);
    Instance::new(graph, dets, pairs, omega).unwrap()
}

fn maybe(rng: &mut impl Rng) -> f64 {
    if rng.random_bool(0.5) {
        rng.random_range(0.0..8.0)
    } else {
        0.0
    }
}

/// Nonnegative duals with a few global and local triple rows.
pub fn random_duals(rng: &mut impl Rng, inst: &Instance) -> DualValues {
    let n = inst.n_detections();
    let mut duals = DualValues::zeros(n);
    for d in 0..n {
        duals.lambda1[d] = maybe(rng);
        duals.lambda2[d] = maybe(rng);
        duals.lambda3[d] = maybe(rng);
    }
    for _ in 0..rng.random_range(0..=3) {
        if let Some(row) = random_triple(rng, inst, TripleFlavor::Global) {
            duals.lambda4.push(TripleDual {
                row,
                value: rng.random_range(0.0..6.0),
            });
        }
    }
    for _ in 0..rng.random_range(0..=2) {
        if let Some(row) = random_triple(rng, inst, TripleFlavor::Local) {
            duals.lambda5.push(TripleDual {
                row,
                value: rng.random_range(0.0..6.0),
            });
        }
    }
    duals
}

fn random_triple(rng: &mut impl Rng, inst: &Instance, flavor: TripleFlavor) -> Option<TripleRow> {
    let n = inst.n_detections();
    if n < 3 {
        return None;
    }
    for _ in 0..20 {
        let mut ids: Vec<usize> = (0..n).collect();
        ids.partial_shuffle(rng, 3);
        let row = TripleRow::new([ids[0], ids[1], ids[2]], flavor);
        if row.is_well_formed(inst) {
            return Some(row);
        }
    }
    None
}
