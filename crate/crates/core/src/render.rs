//! SVG rendering of a scenario with a sensor placement.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{Cell, CellTag, Scenario};
use crate::result::Evaluation;
use crate::visibility::Gene;

const LEGEND_H: f64 = 28.0;

fn fill(tag: CellTag) -> &'static str {
    match tag {
        CellTag::Obstacle => "#4a4a4a",
        CellTag::Blocked => "#c8c8c8",
        CellTag::Street => "#f2f2f2",
        CellTag::Free => "#a5d6a7",
        CellTag::SensorOccupied => "#6d8f6e",
    }
}

/// Cell edge length in pixels, keeping the map near 1200 px on its long side.
fn cell_px(scenario: &Scenario) -> f64 {
    let long = scenario.width().max(scenario.height()) as f64;
    (1200.0 / long).clamp(2.0, 16.0).floor()
}

/// Renders the map, priority cells, semi-transparent cells and one wedge
/// per sensor, plus a legend line with the metrics when given.
pub fn render_svg(scenario: &Scenario, genes: &[Gene], metrics: Option<&Evaluation>) -> Result<String> {
    for g in genes {
        if !scenario.in_bounds(g.x as i64, g.y as i64) {
            return Err(Error::InvalidGene {
                x: g.x as i64,
                y: g.y as i64,
            });
        }
    }
    let px = cell_px(scenario);
    let (w, h) = (scenario.width() as f64 * px, scenario.height() as f64 * px);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{}" viewBox="0 0 {w} {}">"#,
        h + LEGEND_H,
        h + LEGEND_H
    );
    let _ = writeln!(s, r#"<clipPath id="map"><rect x="0" y="0" width="{w}" height="{h}"/></clipPath>"#);
    let _ = writeln!(s, r#"<g class="cells" shape-rendering="crispEdges">"#);
    for y in 0..scenario.height() {
        // one rect per run of equal tags keeps the file small
        let mut x = 0;
        while x < scenario.width() {
            let tag = scenario.tag(Cell::new(x, y));
            let start = x;
            while x < scenario.width() && scenario.tag(Cell::new(x, y)) == tag {
                x += 1;
            }
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{}" height="{px}" fill="{}"/>"#,
                start as f64 * px,
                y as f64 * px,
                (x - start) as f64 * px,
                fill(tag)
            );
        }
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r##"<g class="priority" fill="#f9a825" fill-opacity="0.45">"##);
    for c in scenario.priority() {
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{px}" height="{px}"/>"#,
            c.x as f64 * px,
            c.y as f64 * px
        );
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r##"<g class="opacity" fill="#c62828">"##);
    for (c, v) in scenario.opacity() {
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{px}" height="{px}" fill-opacity="{:.3}"/>"#,
            c.x as f64 * px,
            c.y as f64 * px,
            0.5 * v
        );
    }
    let _ = writeln!(s, "</g>");

    let spec = scenario.sensor_spec();
    let radius = spec.range_m / scenario.grid_len() * px;
    let half = spec.fov_rad() / 2.0;
    let large = if spec.fov_deg > 180.0 { 1 } else { 0 };
    let _ = writeln!(
        s,
        r##"<g class="sensors" clip-path="url(#map)" fill="#1e88e5" fill-opacity="0.18" stroke="#1565c0" stroke-width="0.6">"##
    );
    for g in genes {
        let (cx, cy) = ((g.x as f64 + 0.5) * px, (g.y as f64 + 0.5) * px);
        if spec.fov_deg >= 360.0 {
            let _ = writeln!(s, r#"<circle class="wedge" cx="{cx:.2}" cy="{cy:.2}" r="{radius:.2}"/>"#);
        } else {
            let (a0, a1) = (g.phi - half, g.phi + half);
            let _ = writeln!(
                s,
                r#"<path class="wedge" d="M {cx:.2} {cy:.2} L {:.2} {:.2} A {radius:.2} {radius:.2} 0 {large} 1 {:.2} {:.2} Z"/>"#,
                cx + radius * a0.cos(),
                cy + radius * a0.sin(),
                cx + radius * a1.cos(),
                cy + radius * a1.sin()
            );
        }
        let _ = writeln!(
            s,
            r##"<circle class="sensor" cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" fill="#0d47a1" fill-opacity="1"/>"##,
            (px * 0.4).max(1.5)
        );
    }
    let _ = writeln!(s, "</g>");

    if let Some(m) = metrics {
        let ceff = m.c_eff.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        let _ = writeln!(
            s,
            r#"<text class="legend" x="6" y="{:.1}" font-family="sans-serif" font-size="14">c = {:.4}   c_eff = {ceff}   N_sens = {}</text>"#,
            h + LEGEND_H - 9.0,
            m.c,
            m.n_sens
        );
    }
    let _ = writeln!(s, "</svg>");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario() -> Scenario {
        Scenario::parse("grid_len=1\nsensor_range=3\nsensor_fov_deg=40\n....\nSSSS\nSPPS\n").unwrap()
    }

    #[test]
    fn empty_solution_has_no_wedges() {
        let svg = render_svg(&scenario(), &[], None).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches(r#"class="wedge""#).count(), 0);
        // clip rect, one run per row (priority cells are street), two priority marks
        assert_eq!(svg.matches("<rect x").count(), 1 + 3 + 2);
    }

    #[test]
    fn one_gene_one_wedge_spanning_the_fov() {
        let s = scenario();
        let g = Gene::new(1, 0, 1.0);
        let svg = render_svg(&s, &[g], None).unwrap();
        assert_eq!(svg.matches(r#"class="wedge""#).count(), 1);
        let path = svg.lines().find(|l| l.contains(r#"class="wedge""#)).unwrap();
        let nums: Vec<f64> = path
            .split(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-'))
            .filter_map(|t| t.parse().ok())
            .collect();
        // M cx cy L x0 y0 A r r 0 large sweep x1 y1
        let (cx, cy, x0, y0, x1, y1) = (nums[0], nums[1], nums[2], nums[3], nums[9], nums[10]);
        let a0 = (y0 - cy).atan2(x0 - cx);
        let a1 = (y1 - cy).atan2(x1 - cx);
        assert!(((a1 - a0).to_degrees() - 40.0).abs() < 0.1);
    }

    #[test]
    fn gene_off_grid_is_rejected() {
        let err = render_svg(&scenario(), &[Gene::new(9, 0, 0.0)], None).unwrap_err();
        assert!(matches!(err, Error::InvalidGene { x: 9, y: 0 }));
    }
}
