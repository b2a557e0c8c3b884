//! Selected poses and their on-disk form.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{DetId, Instance};
use crate::master::{GlobalPoseColumn, LocalAssignmentColumn, MasterError};
use crate::solver::SolveReport;

/// A global pose with the local assignments anchored at its detections.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletePose {
    pub global: GlobalPoseColumn,
    pub locals: Vec<LocalAssignmentColumn>,
}

/// Sorted pose detection sets and sorted `(anchor, locals)` pairs.
pub type Signature = (Vec<Vec<DetId>>, Vec<(DetId, Vec<DetId>)>);

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Ordered by smallest detection id.
    pub poses: Vec<CompletePose>,
    pub false_positives: Vec<DetId>,
    pub objective: f64,
}

impl Solution {
    pub fn empty(inst: &Instance) -> Self {
        Solution {
            poses: Vec::new(),
            false_positives: (0..inst.n_detections()).collect(),
            objective: 0.0,
        }
    }

    /// Groups selected columns into complete poses. Locals whose anchor is in
    /// no selected pose are dropped; a feasible selection never has any.
    pub fn from_columns(
        inst: &Instance,
        mut globals: Vec<GlobalPoseColumn>,
        mut locals: Vec<LocalAssignmentColumn>,
    ) -> Self {
        globals.sort_by(|a, b| a.detections.cmp(&b.detections));
        locals.sort_by(|a, b| (a.anchor, &a.locals).cmp(&(b.anchor, &b.locals)));
        let mut poses: Vec<CompletePose> = globals
            .into_iter()
            .map(|global| CompletePose {
                global,
                locals: Vec::new(),
            })
            .collect();
        for l in locals {
            if let Some(p) = poses.iter_mut().find(|p| p.global.contains(l.anchor)) {
                p.locals.push(l);
            }
        }
        let mut covered = vec![false; inst.n_detections()];
        let mut objective = 0.0;
        for p in &poses {
            objective += p.global.cost;
            for &d in &p.global.detections {
                covered[d] = true;
            }
            for l in &p.locals {
                objective += l.cost;
                for &d in &l.locals {
                    covered[d] = true;
                }
            }
        }
        Solution {
            poses,
            false_positives: (0..inst.n_detections()).filter(|&d| !covered[d]).collect(),
            objective,
        }
    }

    pub fn n_poses(&self) -> usize {
        self.poses.len()
    }

    /// Each pose and each local assignment as a sorted detection set, for
    /// comparing solutions structurally.
    pub fn signature(&self) -> Signature {
        let mut g: Vec<Vec<DetId>> = self.poses.iter().map(|p| p.global.detections.clone()).collect();
        let mut l: Vec<(DetId, Vec<DetId>)> = self
            .poses
            .iter()
            .flat_map(|p| p.locals.iter().map(|l| (l.anchor, l.locals.clone())))
            .collect();
        g.sort();
        l.sort();
        (g, l)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub objective: f64,
    pub poses: Vec<PoseRecord>,
    pub false_positives: Vec<DetId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<SolveReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    /// Part name to detection id.
    pub global: BTreeMap<String, DetId>,
    pub locals: Vec<LocalRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalRecord {
    pub anchor: DetId,
    pub locals: Vec<DetId>,
}

#[derive(Debug, Error)]
pub enum SolutionFileError {
    #[error("malformed solution JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("part `{0}` is not in the instance")]
    UnknownPart(String),
    #[error("detection {det} is listed under part `{part}` but belongs to another part")]
    WrongPart { det: DetId, part: String },
    #[error(transparent)]
    Column(#[from] MasterError),
}

impl SolutionFile {
    pub fn from_solution(inst: &Instance, sol: &Solution, report: Option<SolveReport>) -> Self {
        let g = inst.graph();
        SolutionFile {
            objective: sol.objective,
            poses: sol
                .poses
                .iter()
                .map(|p| PoseRecord {
                    global: p
                        .global
                        .detections
                        .iter()
                        .map(|&d| (g.part_name(inst.part_of(d)).to_string(), d))
                        .collect(),
                    locals: p
                        .locals
                        .iter()
                        .map(|l| LocalRecord {
                            anchor: l.anchor,
                            locals: l.locals.clone(),
                        })
                        .collect(),
                })
                .collect(),
            false_positives: sol.false_positives.clone(),
            report,
        }
    }

    /// Rebuilds a solution, recomputing every column cost from `inst`. The
    /// stored objective and false-positive list are kept as written so a
    /// validator can compare them against recomputed values.
    pub fn to_solution(&self, inst: &Instance) -> Result<Solution, SolutionFileError> {
        let mut poses = Vec::new();
        for p in &self.poses {
            let mut dets = Vec::new();
            for (part, &d) in &p.global {
                let pid = inst
                    .graph()
                    .part_id(part)
                    .ok_or_else(|| SolutionFileError::UnknownPart(part.clone()))?;
                if d >= inst.n_detections() || inst.part_of(d) != pid {
                    return Err(SolutionFileError::WrongPart {
                        det: d,
                        part: part.clone(),
                    });
                }
                dets.push(d);
            }
            let global = GlobalPoseColumn::new(inst, dets)?;
            let locals = p
                .locals
                .iter()
                .map(|l| LocalAssignmentColumn::new(inst, l.anchor, l.locals.clone()))
                .collect::<Result<_, _>>()?;
            poses.push(CompletePose { global, locals });
        }
        Ok(Solution {
            poses,
            false_positives: self.false_positives.clone(),
            objective: self.objective,
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution files always serialize")
    }

    pub fn parse(text: &str) -> Result<Self, SolutionFileError> {
        Ok(serde_json::from_str(text)?)
    }
}
