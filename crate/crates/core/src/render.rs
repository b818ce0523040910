//! SVG snapshots of fronts.

use std::fmt::Write;

use crate::front::{CuspSign, FrontAnalysis, FrontCurve};
use crate::selector::Piece;

const W: f64 = 800.0;
const H: f64 = 500.0;
const MARGIN: f64 = 40.0;

fn dash(index: i32) -> &'static str {
    match index.rem_euclid(3) {
        0 => "",
        1 => " stroke-dasharray=\"6 4\"",
        _ => " stroke-dasharray=\"2 3\"",
    }
}

/// Index-0 sections solid, index 1 dashed, other indices dotted; cusps as
/// triangles (filled when positive), double points as circles (filled when
/// homogeneous), and the minimax pieces, if given, as a wide underlay.
pub fn front_svg(f: &FrontCurve, a: &FrontAnalysis, minimax: Option<&[Piece]>) -> String {
    let (q0, q1) = f.q_range();
    let (mut z0, mut z1) = (f64::MAX, f64::MIN);
    for v in &f.vertices {
        z0 = z0.min(v.z);
        z1 = z1.max(v.z);
    }
    if z1 - z0 < 1e-12 {
        z0 -= 0.5;
        z1 += 0.5;
    }
    let x = |q: f64| MARGIN + (q - q0) / (q1 - q0) * (W - 2.0 * MARGIN);
    let y = |z: f64| H - MARGIN - (z - z0) / (z1 - z0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{MARGIN}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">t = {:.6}</text>",
        f.time
    );
    if let Some(pieces) = minimax {
        for p in pieces {
            let sec = &a.sections[p.section];
            let pts: Vec<String> = f.vertices[sec.start..=sec.end]
                .iter()
                .filter(|v| v.q >= p.q_lo && v.q <= p.q_hi)
                .map(|v| format!("{:.3},{:.3}", x(v.q), y(v.z)))
                .collect();
            if pts.len() > 1 {
                let _ = writeln!(
                    s,
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"#f2c14e\" stroke-width=\"7\" stroke-opacity=\"0.6\"/>",
                    pts.join(" ")
                );
            }
        }
    }
    for sec in &a.sections {
        let pts: Vec<String> = f.vertices[sec.start..=sec.end]
            .iter()
            .map(|v| format!("{:.3},{:.3}", x(v.q), y(v.z)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f3b73\" stroke-width=\"1.5\"{}/>",
            pts.join(" "),
            dash(sec.index)
        );
    }
    for c in &a.cusps {
        let (cx, cy) = (x(c.q), y(c.z));
        let fill = if c.sign == CuspSign::Positive { "#c0392b" } else { "none" };
        let _ = writeln!(
            s,
            "<polygon points=\"{:.3},{:.3} {:.3},{:.3} {:.3},{:.3}\" fill=\"{fill}\" stroke=\"#c0392b\"/>",
            cx,
            cy - 5.0,
            cx - 4.5,
            cy + 4.0,
            cx + 4.5,
            cy + 4.0
        );
    }
    for d in &a.double_points {
        let fill = if d.homogeneous { "#2e8b57" } else { "none" };
        let _ = writeln!(
            s,
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"4\" fill=\"{fill}\" stroke=\"#2e8b57\"/>",
            x(d.q),
            y(d.z)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::front::analyze;
    use crate::front::tests::burgers_front;
    use crate::selector::decompose;

    #[test]
    fn fish_snapshot_has_all_glyphs() {
        let f = burgers_front(1.5, 256);
        let a = analyze(&f).unwrap();
        let d = decompose(&f, &a).unwrap();
        let svg = front_svg(&f, &a, Some(&d.minimax));
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 1);
        assert_eq!(svg.matches("stroke-dasharray=\"6 4\"").count(), 1);
        assert_eq!(svg.matches("#f2c14e").count(), 2);
        assert_eq!(svg, front_svg(&f, &a, Some(&d.minimax)));
    }
}
