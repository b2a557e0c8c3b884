//! Deterministic synthetic scenes: skeleton templates with positional noise,
//! duplicate detections per visible part, and uniformly scattered false
//! positives. Unary costs are negative for detections near a true joint and
//! positive for false positives; pairwise costs come from same-part proximity
//! and from how well a pair matches the template limb offset.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};

use super::{Detection, Instance, PartGraph, PartId, MAX_DETECTIONS_PER_PART};

pub const CANVAS_WIDTH: f64 = 640.0;
pub const CANVAS_HEIGHT: f64 = 480.0;

const PERSON_SCALE: f64 = 1.5;
const MAX_EXTRA_DUPLICATES: u64 = 3;
const JOINT_NOISE: f64 = 2.5;
const DUPLICATE_NOISE: f64 = 5.0;
// same-part proximity: phi = clamp((dist - NEAR) / SPREAD, -3, 6)
const NEAR: f64 = 15.0;
const SPREAD: f64 = 5.0;
// limb consistency: phi = clamp(deviation / LIMB_SIGMA - 2, -2, 6)
const LIMB_SIGMA: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_people: usize,
    /// Per-trial probability of an extra duplicate (up to three per part).
    pub dup_rate: f64,
    /// Per-trial probability of a false positive (two trials per part).
    pub fp_rate: f64,
    /// Probability that a minor part is visible. Major parts always are.
    pub visibility: f64,
    pub graph: PartGraph,
    pub omega: f64,
    /// Drop detections beyond this count (after shuffling).
    pub max_total: Option<usize>,
}

impl SyntheticConfig {
    pub fn new(seed: u64, n_people: usize, dup_rate: f64, fp_rate: f64) -> Self {
        SyntheticConfig {
            seed,
            n_people,
            dup_rate,
            fp_rate,
            visibility: 0.9,
            graph: PartGraph::body14(),
            omega: super::DEFAULT_OMEGA,
            max_total: None,
        }
    }

    /// Upper-body scenes capped at `max_total` detections, for brute-force
    /// cross-checks.
    pub fn small(seed: u64, max_total: usize) -> Self {
        SyntheticConfig {
            n_people: 1 + (seed % 2) as usize,
            dup_rate: 0.3,
            fp_rate: 0.15,
            visibility: 0.85,
            graph: PartGraph::upper4(),
            omega: 8.0,
            max_total: Some(max_total),
            ..Self::new(seed, 0, 0.0, 0.0)
        }
    }
}

/// Body14 scene with default visibility and `omega = 30`.
pub fn generate_synthetic(seed: u64, n_people: usize, dup_rate: f64, fp_rate: f64) -> Instance {
    generate_with(&SyntheticConfig::new(seed, n_people, dup_rate, fp_rate))
}

struct Raw {
    part: PartId,
    pos: (f64, f64),
    theta: f64,
}

pub fn generate_with(cfg: &SyntheticConfig) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let graph = &cfg.graph;
    let n_parts = graph.n_parts();
    let dup_rate = clamp01(cfg.dup_rate);
    let fp_rate = clamp01(cfg.fp_rate);
    let visibility = clamp01(cfg.visibility);
    let template: Vec<(f64, f64)> = (0..n_parts).map(|p| template_offset(graph, p)).collect();

    let joint_noise = Normal::new(0.0, JOINT_NOISE).unwrap();
    let dup_noise = Normal::new(0.0, DUPLICATE_NOISE).unwrap();
    let dups = Binomial::new(MAX_EXTRA_DUPLICATES, dup_rate).unwrap();

    let mut raw: Vec<Raw> = Vec::new();
    let mut per_part = vec![0usize; n_parts];
    let mut centers: Vec<(f64, f64)> = Vec::new();
    for _ in 0..cfg.n_people.min(64) {
        let center = place_person(&mut rng, &centers);
        centers.push(center);
        let scale = PERSON_SCALE * rng.random_range(0.9..1.1);
        for p in 0..n_parts {
            if !graph.is_major(p) && !rng.random_bool(visibility) {
                continue;
            }
            let joint = (center.0 + scale * template[p].0, center.1 + scale * template[p].1);
            let count = 1 + dups.sample(&mut rng) as usize;
            for k in 0..count {
                if per_part[p] >= MAX_DETECTIONS_PER_PART {
                    break;
                }
                let (noise, theta) = if k == 0 {
                    (&joint_noise, -rng.random_range(4.0..10.0))
                } else {
                    (&dup_noise, -rng.random_range(1.0..5.0))
                };
                let pos = (joint.0 + noise.sample(&mut rng), joint.1 + noise.sample(&mut rng));
                raw.push(Raw { part: p, pos, theta });
                per_part[p] += 1;
            }
        }
    }

    let fps = Binomial::new(2 * n_parts as u64, fp_rate).unwrap().sample(&mut rng);
    for _ in 0..fps {
        let p = rng.random_range(0..n_parts.max(1));
        if n_parts == 0 || per_part[p] >= MAX_DETECTIONS_PER_PART {
            continue;
        }
        let pos = (
            rng.random_range(0.0..CANVAS_WIDTH),
            rng.random_range(0.0..CANVAS_HEIGHT),
        );
        raw.push(Raw {
            part: p,
            pos,
            theta: rng.random_range(1.0..6.0),
        });
        per_part[p] += 1;
    }

    raw.shuffle(&mut rng);
    if let Some(cap) = cfg.max_total {
        raw.truncate(cap);
    }

    let detections: Vec<Detection> = raw
        .iter()
        .enumerate()
        .map(|(id, r)| Detection {
            id,
            part: r.part,
            position: Some((round3(r.pos.0), round3(r.pos.1))),
            theta: round3(r.theta),
        })
        .collect();

    let mut pairwise = Vec::new();
    for (i, a) in detections.iter().enumerate() {
        for b in &detections[i + 1..] {
            let (pa, pb) = (a.position.unwrap(), b.position.unwrap());
            let phi = if a.part == b.part {
                let dist = (pa.0 - pb.0).hypot(pa.1 - pb.1);
                ((dist - NEAR) / SPREAD).clamp(-3.0, 6.0)
            } else if graph.has_edge(a.part, b.part) {
                let expect = (
                    PERSON_SCALE * (template[b.part].0 - template[a.part].0),
                    PERSON_SCALE * (template[b.part].1 - template[a.part].1),
                );
                let dev = (pb.0 - pa.0 - expect.0).hypot(pb.1 - pa.1 - expect.1);
                (dev / LIMB_SIGMA - 2.0).clamp(-2.0, 6.0)
            } else {
                continue;
            };
            pairwise.push((a.id, b.id, round3(phi)));
        }
    }

    Instance::new(graph.clone(), detections, pairwise, cfg.omega).expect("generator output is valid")
}

fn place_person(rng: &mut ChaCha8Rng, others: &[(f64, f64)]) -> (f64, f64) {
    let mut best = (CANVAS_WIDTH / 2.0, CANVAS_HEIGHT / 2.0);
    let mut best_gap = f64::NEG_INFINITY;
    for _ in 0..20 {
        let c = (
            rng.random_range(80.0..CANVAS_WIDTH - 80.0),
            rng.random_range(120.0..CANVAS_HEIGHT - 120.0),
        );
        let gap = others
            .iter()
            .map(|o| (o.0 - c.0).hypot(o.1 - c.1))
            .fold(f64::INFINITY, f64::min);
        if gap >= 90.0 {
            return c;
        }
        if gap > best_gap {
            best_gap = gap;
            best = c;
        }
    }
    best
}

/// Joint offset from the person's center, in unscaled template units.
fn template_offset(graph: &PartGraph, p: PartId) -> (f64, f64) {
    match graph.part_name(p) {
        "head" => (0.0, -45.0),
        "neck" => (0.0, -30.0),
        "r_shoulder" => (-12.0, -28.0),
        "l_shoulder" => (12.0, -28.0),
        "r_elbow" => (-17.0, -10.0),
        "l_elbow" => (17.0, -10.0),
        "r_wrist" => (-19.0, 6.0),
        "l_wrist" => (19.0, 6.0),
        "r_hip" => (-8.0, 5.0),
        "l_hip" => (8.0, 5.0),
        "r_knee" => (-9.0, 28.0),
        "l_knee" => (9.0, 28.0),
        "r_ankle" => (-10.0, 50.0),
        "l_ankle" => (10.0, 50.0),
        _ => {
            let angle = std::f64::consts::TAU * p as f64 / graph.n_parts().max(1) as f64;
            (30.0 * angle.cos(), 30.0 * angle.sin())
        }
    }
}

fn clamp01(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, 1.0)
    }
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}
