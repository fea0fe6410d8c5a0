//! A minimal grayscale heatmap of a slice.

use std::fmt::Write as _;

use super::SliceGrid;

const CELL: f64 = 8.0;
const MARGIN: f64 = 48.0;

/// Renders the slice as an SVG image: darker is lower. The first free axis
/// runs left to right, the second bottom to top.
pub fn render_svg(grid: &SliceGrid) -> String {
    let (na, nb) = (grid.coords_a.len(), grid.coords_b.len());
    let lo = grid.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (w, h) = (na as f64 * CELL, nb as f64 * CELL);
    let (name_a, name_b) = grid.axis_names();

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">"#,
        w + 2.0 * MARGIN,
        h + 2.0 * MARGIN
    );
    for i in 0..na {
        for j in 0..nb {
            let level = ((grid.value(i, j) - lo) / span * 255.0).round() as u8;
            let x = MARGIN + i as f64 * CELL;
            let y = MARGIN + (nb - 1 - j) as f64 * CELL;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="rgb({level},{level},{level})"/>"#
            );
        }
    }
    let (a0, a1) = (grid.coords_a[0], grid.coords_a[na - 1]);
    let (b0, b1) = (grid.coords_b[0], grid.coords_b[nb - 1]);
    let base = MARGIN + h;
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{name_a}</text>"#, MARGIN + w / 2.0, base + 32.0);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{}" text-anchor="middle">{a0}</text>"#, base + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{a1}</text>"#, MARGIN + w, base + 16.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{name_b}</text>"#,
        MARGIN + h / 2.0,
        MARGIN + h / 2.0
    );
    let _ = writeln!(s, r#"<text x="{}" y="{base}" text-anchor="end">{b0}</text>"#, MARGIN - 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{b1}</text>"#, MARGIN - 4.0, MARGIN + 10.0);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">u from {lo:.4} (black) to {hi:.4} (white)</text>"#,
        MARGIN + w / 2.0,
        MARGIN - 16.0
    );
    s.push_str("</svg>\n");
    s
}
