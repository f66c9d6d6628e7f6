//! SVG visualization of ground truth and matched predictions.
//!
//! Each image becomes one self-contained SVG: ground-truth pairs draw their
//! shadow and object masks as translucent fills under a dashed association
//! box, matched predictions draw solid instance boxes with a dotted
//! association box, and every prediction gets an arrow from the shadow box
//! center pointing along its light angle. Colors cycle through a fixed
//! palette by pair index, so output is deterministic.

use std::fmt::Write as _;

use crate::association::PairedAssociation;
use crate::geometry::BBox;
use crate::mask::Mask;
use crate::model::GroundTruthPair;

const PALETTE: [&str; 12] = [
    "#e6194b", "#3cb44b", "#ffe119", "#4363d8", "#f58231", "#911eb4", "#46f0f0", "#f032e6",
    "#bcf60c", "#fabebe", "#008080", "#e6beff",
];

fn fmt(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Emits a mask as few `<rect>` elements: vertical column spans merged
/// horizontally while their row range repeats.
fn mask_rects(out: &mut String, mask: &Mask, color: &str, opacity: f64) {
    let spans = mask.column_spans();
    let mut i = 0;
    while i < spans.len() {
        let (c0, r0, r1) = spans[i];
        let mut cols = 1;
        while i + cols < spans.len() && spans[i + cols] == (c0 + cols as u32, r0, r1) {
            cols += 1;
        }
        let _ = writeln!(
            out,
            r#"<rect x="{c0}" y="{r0}" width="{cols}" height="{}" fill="{color}" fill-opacity="{opacity}"/>"#,
            r1 - r0
        );
        i += cols;
    }
}

fn box_rect(out: &mut String, b: &BBox, color: &str, stroke_width: f64, dash: Option<&str>) {
    let dash_attr = dash.map_or(String::new(), |d| format!(r#" stroke-dasharray="{d}""#));
    let _ = writeln!(
        out,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="{color}" stroke-width="{}"{dash_attr}/>"#,
        fmt(b.x_min()),
        fmt(b.y_min()),
        fmt(b.width()),
        fmt(b.height()),
        fmt(stroke_width),
    );
}

fn light_arrow(out: &mut String, from: (f64, f64), angle: f64, length: f64, color: &str) {
    let (x2, y2) = (from.0 + angle.cos() * length, from.1 + angle.sin() * length);
    let _ = writeln!(
        out,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="1.5" marker-end="url(#arrow)"/>"#,
        fmt(from.0),
        fmt(from.1),
        fmt(x2),
        fmt(y2),
    );
}

/// Renders one image. `gt` and `paired` must already be filtered to the
/// image being drawn.
pub fn render_scene(
    width: u32,
    height: u32,
    gt: &[GroundTruthPair],
    paired: &[PairedAssociation],
) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    out.push_str(concat!(
        r#"<defs><marker id="arrow" markerWidth="8" markerHeight="8" refX="6" refY="3" orient="auto">"#,
        r#"<path d="M0,0 L6,3 L0,6 z" fill="context-stroke"/></marker></defs>"#,
        "\n",
    ));
    let _ = writeln!(
        out,
        r##"<rect width="{width}" height="{height}" fill="#202020"/>"##
    );

    for (k, pair) in gt.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(out, "<g><!-- ground truth pair {} -->", pair.pair_id);
        mask_rects(&mut out, &pair.shadow_mask, color, 0.3);
        mask_rects(&mut out, &pair.object_mask, color, 0.55);
        box_rect(&mut out, &pair.association_box, color, 1.0, Some("6 3"));
        out.push_str("</g>\n");
    }

    for (k, p) in paired.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(out, "<g><!-- predicted pair {k} -->");
        box_rect(&mut out, &p.shadow.bbox, color, 1.5, None);
        box_rect(&mut out, &p.object.bbox, color, 1.5, None);
        box_rect(&mut out, &p.association.bbox, color, 1.0, Some("2 2"));
        let diag = p.shadow.bbox.width().hypot(p.shadow.bbox.height());
        light_arrow(
            &mut out,
            p.shadow.bbox.center(),
            p.light_angle.radians(),
            (diag * 0.5).clamp(10.0, 48.0),
            color,
        );
        out.push_str("</g>\n");
    }

    out.push_str("</svg>\n");
    out
}
