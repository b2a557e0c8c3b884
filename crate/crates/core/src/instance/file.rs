//! JSON instance files.
//!
//! ```json
//! { "parts": ["neck", "head"], "major_parts": ["neck"], "edges": [["neck", "head"]],
//!   "detections": [{"id": 0, "part": "neck", "x": 10.0, "y": 4.0, "theta": -2.5}],
//!   "pairwise": [{"d1": 0, "d2": 1, "phi": -0.5}], "omega": 30.0 }
//! ```

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{Detection, Instance, PartGraph, ValidationError, ValidationReport, DEFAULT_OMEGA, UNRESOLVED_PART};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub parts: Vec<String>,
    pub major_parts: Vec<String>,
    pub edges: Vec<[String; 2]>,
    pub detections: Vec<DetectionRecord>,
    pub pairwise: Vec<PairRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub id: u64,
    pub part: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub d1: u64,
    pub d2: u64,
    pub phi: f64,
}

#[derive(Debug, Error)]
pub enum InstanceParseError {
    #[error("malformed instance JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("{0}")]
    Invalid(#[from] ValidationReport),
}

const TOP_KEYS: [&str; 6] = ["parts", "major_parts", "edges", "detections", "pairwise", "omega"];
const DETECTION_KEYS: [&str; 5] = ["id", "part", "x", "y", "theta"];
const PAIR_KEYS: [&str; 3] = ["d1", "d2", "phi"];

/// Parses and validates an instance. Unknown keys are an error in strict
/// mode and are returned as warnings otherwise.
pub fn parse_instance(text: &str, strict: bool) -> Result<(Instance, Vec<String>), InstanceParseError> {
    let value: Value = serde_json::from_str(text)?;
    let unknown = unknown_keys(&value);
    if strict && !unknown.is_empty() {
        return Err(InstanceParseError::UnknownKeys(unknown));
    }
    for k in &unknown {
        log::warn!("ignoring unknown instance key `{k}`");
    }
    let file: InstanceFile = serde_json::from_value(value)?;
    Ok((file.validate()?, unknown))
}

fn unknown_keys(value: &Value) -> Vec<String> {
    let mut out = Vec::new();
    let Some(top) = value.as_object() else {
        return out;
    };
    collect_unknown(top, &TOP_KEYS, "", &mut out);
    for (list, allowed) in [("detections", &DETECTION_KEYS[..]), ("pairwise", &PAIR_KEYS[..])] {
        if let Some(items) = top.get(list).and_then(Value::as_array) {
            for (i, item) in items.iter().enumerate() {
                if let Some(obj) = item.as_object() {
                    collect_unknown(obj, allowed, &format!("{list}[{i}]."), &mut out);
                }
            }
        }
    }
    out
}

fn collect_unknown(obj: &serde_json::Map<String, Value>, allowed: &[&str], prefix: &str, out: &mut Vec<String>) {
    for k in obj.keys() {
        if !allowed.contains(&k.as_str()) {
            out.push(format!("{prefix}{k}"));
        }
    }
}

impl InstanceFile {
    pub fn validate(&self) -> Result<Instance, ValidationReport> {
        let parts: Vec<&str> = self.parts.iter().map(String::as_str).collect();
        let majors: Vec<&str> = self.major_parts.iter().map(String::as_str).collect();
        let edges: Vec<(&str, &str)> = self.edges.iter().map(|[a, b]| (a.as_str(), b.as_str())).collect();
        let graph = match PartGraph::new(&parts, &majors, &edges) {
            Ok(g) => g,
            Err(mut errors) => {
                for d in &self.detections {
                    if !self.parts.contains(&d.part) {
                        errors.push(ValidationError::UnknownPart(d.part.clone()));
                    }
                }
                return Err(ValidationReport { errors });
            }
        };

        let mut errors = Vec::new();
        let detections = self
            .detections
            .iter()
            .map(|d| {
                let part = graph.part_id(&d.part).unwrap_or_else(|| {
                    errors.push(ValidationError::UnknownPart(d.part.clone()));
                    UNRESOLVED_PART
                });
                let position = match (d.x, d.y) {
                    (Some(x), Some(y)) => Some((x, y)),
                    _ => None,
                };
                Detection {
                    id: d.id as usize,
                    part,
                    position,
                    theta: d.theta,
                }
            })
            .collect();
        let pairwise = self.pairwise.iter().map(|p| (p.d1 as usize, p.d2 as usize, p.phi));
        Instance::build(graph, detections, pairwise, self.omega.unwrap_or(DEFAULT_OMEGA), errors)
    }

    pub fn from_instance(inst: &Instance) -> Self {
        let g = inst.graph();
        InstanceFile {
            parts: g.parts().to_vec(),
            major_parts: g.major_parts().map(|p| g.part_name(p).to_string()).collect(),
            edges: g
                .edges()
                .iter()
                .map(|&(a, b)| [g.part_name(a).to_string(), g.part_name(b).to_string()])
                .collect(),
            detections: inst
                .detections()
                .iter()
                .map(|d| DetectionRecord {
                    id: d.id as u64,
                    part: g.part_name(d.part).to_string(),
                    x: d.position.map(|p| p.0),
                    y: d.position.map(|p| p.1),
                    theta: d.theta,
                })
                .collect(),
            pairwise: inst
                .pairwise()
                .iter()
                .map(|((a, b), phi)| PairRecord {
                    d1: a as u64,
                    d2: b as u64,
                    phi,
                })
                .collect(),
            omega: Some(inst.omega()),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance files always serialize")
    }
}
