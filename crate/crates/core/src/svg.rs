//! SVG drawing of a solution: one color per pose, circles at global
//! detections, squares at local ones, limbs along body-graph edges, and
//! grey crosses at false positives.

use std::fmt::Write;

use thiserror::Error;

use crate::instance::{DetId, Instance};
use crate::solution::Solution;

const PALETTE: [&str; 10] = [
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4", "#f032e6", "#9a6324", "#800000", "#000075",
];
const MARGIN: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("detection {0} has no position")]
    MissingPositions(DetId),
}

pub fn render_svg(inst: &Instance, sol: &Solution) -> Result<String, RenderError> {
    let mut pos = Vec::with_capacity(inst.n_detections());
    for d in inst.detections() {
        pos.push(d.position.ok_or(RenderError::MissingPositions(d.id))?);
    }
    let (mut x0, mut y0, mut x1, mut y1) = (0.0f64, 0.0f64, 100.0f64, 100.0f64);
    if !pos.is_empty() {
        x0 = pos.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        y0 = pos.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        x1 = pos.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        y1 = pos.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    }
    let (vx, vy) = (x0 - MARGIN, y0 - MARGIN);
    let (w, h) = (x1 - x0 + 2.0 * MARGIN, y1 - y0 + 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{vx:.1} {vy:.1} {w:.1} {h:.1}" width="{w:.0}" height="{h:.0}" style="background:#fff">"#
    );
    for (k, pose) in sol.poses.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(out, r#"<g class="pose" stroke="{color}" fill="{color}">"#);
        let dets = &pose.global.detections;
        for (i, &a) in dets.iter().enumerate() {
            for &b in &dets[i + 1..] {
                if inst.graph().has_edge(inst.part_of(a), inst.part_of(b)) {
                    let (pa, pb) = (pos[a], pos[b]);
                    let _ = writeln!(
                        out,
                        r#"<line class="limb" x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke-width="2"/>"#,
                        pa.0, pa.1, pb.0, pb.1
                    );
                }
            }
        }
        for &d in dets {
            let _ = writeln!(
                out,
                r#"<circle class="global" cx="{:.1}" cy="{:.1}" r="4"><title>{} {}</title></circle>"#,
                pos[d].0,
                pos[d].1,
                d,
                inst.graph().part_name(inst.part_of(d))
            );
        }
        for l in &pose.locals {
            for &d in &l.locals {
                let _ = writeln!(
                    out,
                    r#"<rect class="local" x="{:.1}" y="{:.1}" width="5" height="5"><title>{} {}</title></rect>"#,
                    pos[d].0 - 2.5,
                    pos[d].1 - 2.5,
                    d,
                    inst.graph().part_name(inst.part_of(d))
                );
            }
        }
        out.push_str("</g>\n");
    }
    for &d in &sol.false_positives {
        let (x, y) = pos[d];
        let _ = writeln!(
            out,
            r##"<path class="fp" d="M{:.1} {:.1}L{:.1} {:.1}M{:.1} {:.1}L{:.1} {:.1}" stroke="#999" stroke-width="1.5"/>"##,
            x - 3.0,
            y - 3.0,
            x + 3.0,
            y + 3.0,
            x - 3.0,
            y + 3.0,
            x + 3.0,
            y - 3.0
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
