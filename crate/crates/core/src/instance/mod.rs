//! Problem data: detections with unary costs, sparse pairwise costs, the
//! body-part graph and the pose-instancing cost.
//!
//! Pairwise costs live on unordered detection pairs and each one is counted
//! once in any cost sum. Instances are immutable once validated.

mod file;
mod graph;
mod synthetic;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use file::{parse_instance, DetectionRecord, InstanceFile, InstanceParseError, PairRecord};
pub use graph::{PartGraph, BODY14_PARTS};
pub use synthetic::{generate_synthetic, generate_with, SyntheticConfig};

pub type DetId = usize;
pub type PartId = usize;

/// Largest number of detections allowed for a single part. Local pricing
/// enumerates every subset of a part's detections.
pub const MAX_DETECTIONS_PER_PART: usize = 15;

/// Pose-instancing cost used when an instance file leaves it out.
pub const DEFAULT_OMEGA: f64 = 30.0;

/// Placeholder part for detections whose part name did not resolve.
pub(crate) const UNRESOLVED_PART: PartId = PartId::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub id: DetId,
    pub part: PartId,
    pub position: Option<(f64, f64)>,
    pub theta: f64,
}

/// Sparse symmetric pairwise costs keyed by `(low, high)` detection ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairwiseCosts {
    entries: BTreeMap<(DetId, DetId), f64>,
}

impl PairwiseCosts {
    pub fn get(&self, a: DetId, b: DetId) -> Option<f64> {
        self.entries.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((DetId, DetId), f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("unknown part `{0}`")]
    UnknownPart(String),
    #[error("part `{0}` is listed more than once")]
    DuplicatePart(String),
    #[error("no major part declared")]
    NoMajorPart,
    #[error("edge from part `{0}` to itself")]
    SelfLoopEdge(String),
    #[error("duplicate edge `{0}`-`{1}`")]
    DuplicateEdge(String, String),
    #[error("removing major part `{0}` leaves a graph with a cycle")]
    ConditionalGraphNotForest(String),
    #[error("detection id {0} appears more than once")]
    DuplicateDetectionId(u64),
    #[error("detection ids must be 0..{expected} without gaps; found {id}")]
    DetectionIdOutOfRange { id: u64, expected: usize },
    #[error("part `{part}` has {count} detections (limit {limit})")]
    TooManyDetections { part: String, count: usize, limit: usize },
    #[error("pairwise entry references unknown detection {0}")]
    UnknownDetection(u64),
    #[error("pairwise entry on the diagonal ({0},{0})")]
    DiagonalPairwise(u64),
    #[error("pairwise entry ({d1},{d2}) links parts `{part1}` and `{part2}` which share no edge")]
    IllegalPairwisePartPair {
        d1: u64,
        d2: u64,
        part1: String,
        part2: String,
    },
    #[error("pairwise entry ({0},{1}) given more than once")]
    DuplicatePairwise(u64, u64),
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

/// Every rule an instance violated, in discovery order.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<ValidationError>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} validation error(s)", self.errors.len())?;
        for e in &self.errors {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    graph: PartGraph,
    detections: Vec<Detection>,
    pairwise: PairwiseCosts,
    omega: f64,
    by_part: Vec<Vec<DetId>>,
    neighbors: Vec<Vec<(DetId, f64)>>,
}

impl Instance {
    /// Checks every structural rule and assembles the instance.
    ///
    /// Detections may be given in any order but their ids must cover
    /// `0..n` exactly. Pairwise entries must join two detections of the same
    /// part or of parts adjacent in `graph`.
    pub fn new(
        graph: PartGraph,
        detections: Vec<Detection>,
        pairwise: impl IntoIterator<Item = (DetId, DetId, f64)>,
        omega: f64,
    ) -> Result<Self, ValidationReport> {
        Self::build(graph, detections, pairwise, omega, Vec::new())
    }

    /// As [`Instance::new`], folding in errors already found by the caller.
    pub(crate) fn build(
        graph: PartGraph,
        detections: Vec<Detection>,
        pairwise: impl IntoIterator<Item = (DetId, DetId, f64)>,
        omega: f64,
        mut errors: Vec<ValidationError>,
    ) -> Result<Self, ValidationReport> {
        check_detections(&graph, &detections, &mut errors);
        let mut detections = detections;
        detections.sort_by_key(|d| d.id);
        let pairwise = check_pairwise(&graph, &detections, pairwise, &mut errors);
        if !omega.is_finite() {
            errors.push(ValidationError::NonFinite("omega".into()));
        }
        if !errors.is_empty() {
            return Err(ValidationReport { errors });
        }
        Ok(Self::assemble(graph, detections, pairwise, omega))
    }

    fn assemble(graph: PartGraph, detections: Vec<Detection>, pairwise: PairwiseCosts, omega: f64) -> Self {
        let mut by_part = vec![Vec::new(); graph.n_parts()];
        for d in &detections {
            by_part[d.part].push(d.id);
        }
        let mut neighbors = vec![Vec::new(); detections.len()];
        for ((a, b), phi) in pairwise.iter() {
            neighbors[a].push((b, phi));
            neighbors[b].push((a, phi));
        }
        for n in &mut neighbors {
            n.sort_by_key(|&(d, _)| d);
        }
        Instance {
            graph,
            detections,
            pairwise,
            omega,
            by_part,
            neighbors,
        }
    }

    pub fn graph(&self) -> &PartGraph {
        &self.graph
    }

    pub fn detections(&self) -> &[Detection] {
        &self.detections
    }

    pub fn detection(&self, d: DetId) -> &Detection {
        &self.detections[d]
    }

    pub fn n_detections(&self) -> usize {
        self.detections.len()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn theta(&self, d: DetId) -> f64 {
        self.detections[d].theta
    }

    pub fn part_of(&self, d: DetId) -> PartId {
        self.detections[d].part
    }

    pub fn is_major_detection(&self, d: DetId) -> bool {
        self.graph.is_major(self.detections[d].part)
    }

    /// Detection ids of part `p`, ascending.
    pub fn detections_of(&self, p: PartId) -> &[DetId] {
        &self.by_part[p]
    }

    pub fn pairwise(&self) -> &PairwiseCosts {
        &self.pairwise
    }

    /// Pairwise cost of `{a, b}`, zero when no entry exists.
    pub fn phi(&self, a: DetId, b: DetId) -> f64 {
        let n = &self.neighbors[a];
        match n.binary_search_by_key(&b, |&(d, _)| d) {
            Ok(i) => n[i].1,
            Err(_) => 0.0,
        }
    }

    /// Detections sharing a pairwise entry with `d`, ascending by id.
    pub fn phi_neighbors(&self, d: DetId) -> &[(DetId, f64)] {
        &self.neighbors[d]
    }

    /// Copy with every cost multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Instance {
        let detections = self
            .detections
            .iter()
            .map(|d| Detection {
                theta: d.theta * s,
                ..d.clone()
            })
            .collect();
        let pairwise = PairwiseCosts {
            entries: self.pairwise.entries.iter().map(|(&k, &v)| (k, v * s)).collect(),
        };
        Self::assemble(self.graph.clone(), detections, pairwise, self.omega * s)
    }

    /// Copy with a different pose-instancing cost.
    pub fn with_omega(&self, omega: f64) -> Instance {
        let mut out = self.clone();
        out.omega = omega;
        out
    }

    pub fn has_positions(&self) -> bool {
        self.detections.iter().all(|d| d.position.is_some())
    }
}

fn check_detections(graph: &PartGraph, detections: &[Detection], errors: &mut Vec<ValidationError>) {
    let n = detections.len();
    let mut seen = vec![false; n];
    let mut per_part = vec![0usize; graph.n_parts()];
    for d in detections {
        if d.id >= n {
            errors.push(ValidationError::DetectionIdOutOfRange {
                id: d.id as u64,
                expected: n,
            });
        } else if seen[d.id] {
            errors.push(ValidationError::DuplicateDetectionId(d.id as u64));
        } else {
            seen[d.id] = true;
        }
        if d.part == UNRESOLVED_PART {
            // already reported by the caller
        } else if d.part >= graph.n_parts() {
            errors.push(ValidationError::UnknownPart(format!("#{}", d.part)));
        } else {
            per_part[d.part] += 1;
        }
        if !d.theta.is_finite() {
            errors.push(ValidationError::NonFinite(format!("theta of detection {}", d.id)));
        }
        if let Some((x, y)) = d.position {
            if !x.is_finite() || !y.is_finite() {
                errors.push(ValidationError::NonFinite(format!("position of detection {}", d.id)));
            }
        }
    }
    for (p, &count) in per_part.iter().enumerate() {
        if count > MAX_DETECTIONS_PER_PART {
            errors.push(ValidationError::TooManyDetections {
                part: graph.part_name(p).to_string(),
                count,
                limit: MAX_DETECTIONS_PER_PART,
            });
        }
    }
}

/// `detections` must already be sorted by id; ids that failed
/// [`check_detections`] are treated as unknown.
fn check_pairwise(
    graph: &PartGraph,
    detections: &[Detection],
    pairwise: impl IntoIterator<Item = (DetId, DetId, f64)>,
    errors: &mut Vec<ValidationError>,
) -> PairwiseCosts {
    let lookup = |id: DetId| -> Option<&Detection> {
        detections
            .binary_search_by_key(&id, |d| d.id)
            .ok()
            .map(|i| &detections[i])
            .filter(|d| d.part < graph.n_parts())
    };
    let mut entries = BTreeMap::new();
    for (d1, d2, phi) in pairwise {
        let (a, b) = match (lookup(d1), lookup(d2)) {
            (Some(a), Some(b)) => (a, b),
            (a, b) => {
                if a.is_none() {
                    errors.push(ValidationError::UnknownDetection(d1 as u64));
                }
                if b.is_none() && d2 != d1 {
                    errors.push(ValidationError::UnknownDetection(d2 as u64));
                }
                continue;
            }
        };
        if d1 == d2 {
            errors.push(ValidationError::DiagonalPairwise(d1 as u64));
            continue;
        }
        if a.part != b.part && !graph.has_edge(a.part, b.part) {
            errors.push(ValidationError::IllegalPairwisePartPair {
                d1: d1 as u64,
                d2: d2 as u64,
                part1: graph.part_name(a.part).to_string(),
                part2: graph.part_name(b.part).to_string(),
            });
            continue;
        }
        if !phi.is_finite() {
            errors.push(ValidationError::NonFinite(format!("phi of ({d1},{d2})")));
            continue;
        }
        let key = (d1.min(d2), d1.max(d2));
        if entries.insert(key, phi).is_some() {
            errors.push(ValidationError::DuplicatePairwise(key.0 as u64, key.1 as u64));
        }
    }
    PairwiseCosts { entries }
}
