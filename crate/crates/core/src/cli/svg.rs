//! Static SVG rendering of a map: one gray cell per neuron.

use std::fmt::Write;

use crate::som::MapLattice;

const CELL: usize = 40;
const MARGIN: usize = 10;

/// Mean of `dist(c, d)` over the lattice neighbors `d` of each neuron `c`
/// (0 for a neuron without neighbors).
pub fn neighbor_means(lattice: &MapLattice, dist: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    (0..lattice.neuron_count())
        .map(|c| {
            let ds: Vec<f64> = lattice.neighbors(c).map(|d| dist(c, d)).collect();
            if ds.is_empty() {
                0.0
            } else {
                ds.iter().sum::<f64>() / ds.len() as f64
            }
        })
        .collect()
}

/// Number of observations on each neuron.
pub fn counts(assignments: &[usize], neurons: usize) -> Vec<f64> {
    let mut out = vec![0.0; neurons];
    for &a in assignments {
        out[a] += 1.0;
    }
    out
}

/// Gray level of each value: high values dark. A constant map (including
/// a single neuron) is drawn mid-gray.
fn grays(values: &[f64]) -> Vec<u8> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|&v| {
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            (255.0 * (1.0 - t)).round() as u8
        })
        .collect()
}

/// Standalone SVG with one cell per neuron in lattice arrangement, shaded
/// by `values`.
pub fn export_map_svg(lattice: &MapLattice, values: &[f64], title: &str) -> String {
    let coords: Vec<(i64, i64)> = (0..lattice.neuron_count()).map(|c| lattice.coords(c)).collect();
    let rows = coords.iter().map(|c| c.0).max().unwrap_or(0) as usize + 1;
    let cols = coords.iter().map(|c| c.1).max().unwrap_or(0) as usize + 1;
    let (w, h) = (2 * MARGIN + cols * CELL, 2 * MARGIN + rows * CELL);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    for (c, ((r, col), g)) in coords.iter().zip(grays(values)).enumerate() {
        let _ = writeln!(
            s,
            r##"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="rgb({g},{g},{g})" stroke="#444444"><title>neuron {c}: {:.6}</title></rect>"##,
            MARGIN + *col as usize * CELL,
            MARGIN + *r as usize * CELL,
            values[c]
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
