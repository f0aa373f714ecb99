//! Quiver plots of velocity fields.
//!
//! Each site occupies a `CELL x CELL` pixel square and its arrow starts at
//! the square's centre, extending `ARROW_SCALE` pixels per unit of velocity.
//! Zero velocities are drawn as dots. An optional truth field is drawn first,
//! in grey, underneath the estimate.

use std::fmt::Write as _;

use crate::field::FieldState;
use crate::io::IoError;
use crate::lattice::{Lattice, Velocity};

pub const CELL: f64 = 16.0;
pub const ARROW_SCALE: f64 = 6.0;

const ESTIMATE_COLOUR: &str = "#c0392b";
const TRUTH_COLOUR: &str = "#9a9a9a";

fn layer(out: &mut String, lattice: &Lattice, d: &[Velocity], class: &str, colour: &str, marker: &str) {
    let _ = writeln!(out, "<g class=\"{class}\" stroke=\"{colour}\" fill=\"{colour}\" stroke-width=\"1.5\">");
    for (site, v) in d.iter().enumerate() {
        let (x, y) = lattice.coords(site);
        let cx = (x as f64 + 0.5) * CELL;
        let cy = (y as f64 + 0.5) * CELL;
        if *v == Velocity::ZERO {
            let _ = writeln!(out, "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"1.5\"/>");
        } else {
            let tx = cx + ARROW_SCALE * f64::from(v.vx);
            let ty = cy + ARROW_SCALE * f64::from(v.vy);
            let _ = writeln!(
                out,
                "<line x1=\"{cx:.2}\" y1=\"{cy:.2}\" x2=\"{tx:.2}\" y2=\"{ty:.2}\" marker-end=\"url(#{marker})\"/>"
            );
        }
    }
    out.push_str("</g>\n");
}

fn marker(out: &mut String, id: &str, colour: &str) {
    let _ = writeln!(
        out,
        "<marker id=\"{id}\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" markerWidth=\"5\" markerHeight=\"5\" orient=\"auto\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\"{colour}\"/></marker>"
    );
}

pub fn write_quiver_svg(lattice: &Lattice, est: &FieldState, truth: Option<&FieldState>) -> Result<String, IoError> {
    est.validate(lattice)?;
    if let Some(t) = truth {
        t.validate(lattice)?;
    }
    let w = lattice.width() as f64 * CELL;
    let h = lattice.height() as f64 * CELL;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    out.push_str("<defs>\n");
    marker(&mut out, "head-estimate", ESTIMATE_COLOUR);
    if truth.is_some() {
        marker(&mut out, "head-truth", TRUTH_COLOUR);
    }
    out.push_str("</defs>\n");
    let _ = writeln!(out, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    if let Some(t) = truth {
        layer(&mut out, lattice, &t.d, "truth", TRUTH_COLOUR, "head-truth");
    }
    layer(&mut out, lattice, &est.d, "estimate", ESTIMATE_COLOUR, "head-estimate");
    out.push_str("</svg>\n");
    Ok(out)
}
