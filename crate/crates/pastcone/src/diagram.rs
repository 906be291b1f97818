//! Deterministic SVG spacetime diagrams: time runs up, space runs right,
//! collapse cones are 45-degree lines, and the collapse regions are shaded
//! by grid-sampling the region membership predicates.

use crate::collapse::{NestedOrder, Region, Scenario};
use crate::geometry::Event;
use crate::scenario_file::RenderHints;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagramError {
    #[error("diagrams support 1 spatial dimension only, got {0}")]
    NotOneDimensional(usize),
    #[error("degenerate viewport: {0}")]
    BadViewport(String),
}

/// Fill colors, light to dark: fully collapsed, transitional. The
/// uncollapsed region stays white.
const COLLAPSED: &str = "#c8c8c8";
const TRANSITIONAL: &str = "#8f8f8f";

#[derive(Clone, Debug)]
pub struct DiagramSpec {
    pub t_range: (f64, f64),
    pub x_range: (f64, f64),
    /// Shading grid resolution per axis.
    pub grid: usize,
    /// Pixel width of the drawing area; height follows the aspect ratio of
    /// the coordinate ranges.
    pub width: u32,
    pub labels: BTreeMap<String, String>,
}

impl DiagramSpec {
    /// Viewport around the scenario's events with a margin, overridden by
    /// any render hints.
    pub fn for_scenario(sc: &Scenario, hints: &RenderHints) -> Self {
        let (mut t_lo, mut t_hi) = sc.time_bounds();
        let bounds = sc.spatial_bounds();
        let (mut x_lo, mut x_hi) = (bounds.min[0], bounds.max[0]);
        let span = (t_hi - t_lo).max(x_hi - x_lo).max(1.0);
        t_lo -= 0.75 * span;
        t_hi += 0.5 * span;
        x_lo -= 0.5 * span;
        x_hi += 0.5 * span;
        DiagramSpec {
            t_range: hints.t_range.unwrap_or((t_lo, t_hi)),
            x_range: hints.x_range.unwrap_or((x_lo, x_hi)),
            grid: hints.grid.unwrap_or(400),
            width: hints.width.unwrap_or(640),
            labels: hints.labels.clone(),
        }
    }
}

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

struct Frame {
    t_lo: f64,
    t_hi: f64,
    x_lo: f64,
    x_hi: f64,
    w: f64,
    h: f64,
    pad: f64,
}

impl Frame {
    fn sx(&self, x: f64) -> f64 {
        self.pad + (x - self.x_lo) / (self.x_hi - self.x_lo) * self.w
    }
    fn sy(&self, t: f64) -> f64 {
        self.pad + (self.t_hi - t) / (self.t_hi - self.t_lo) * self.h
    }
}

/// Render the scenario as an SVG document. Output is byte-identical across
/// runs: fixed element order, fixed decimal formatting, no timestamps.
pub fn emit_svg(sc: &Scenario, spec: &DiagramSpec) -> Result<String, DiagramError> {
    if sc.dim != 1 {
        return Err(DiagramError::NotOneDimensional(sc.dim));
    }
    let (t_lo, t_hi) = spec.t_range;
    let (x_lo, x_hi) = spec.x_range;
    if !(t_hi > t_lo) || !(x_hi > x_lo) || spec.grid == 0 {
        return Err(DiagramError::BadViewport(format!(
            "t range ({t_lo}, {t_hi}), x range ({x_lo}, {x_hi}), grid {}",
            spec.grid
        )));
    }
    let w = spec.width as f64;
    let h = w * (t_hi - t_lo) / (x_hi - x_lo);
    let frame = Frame {
        t_lo,
        t_hi,
        x_lo,
        x_hi,
        w,
        h,
        pad: 20.0,
    };
    let total_w = w + 2.0 * frame.pad;
    let total_h = h + 2.0 * frame.pad;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        fmt2(total_w),
        fmt2(total_h),
        fmt2(total_w),
        fmt2(total_h)
    );
    let _ = writeln!(
        svg,
        r##"<rect x="0" y="0" width="{}" height="{}" fill="#ffffff"/>"##,
        fmt2(total_w),
        fmt2(total_h)
    );

    let structure = sc.structure();
    if !structure.is_empty() {
        // Nested stacks get alternating per-layer shades; intersecting
        // cones get the three-tone region shading.
        let nested = matches!(structure.nested_order(), Ok(NestedOrder::Nested(_)));
        let cell_w = (x_hi - x_lo) / spec.grid as f64;
        let cell_h = (t_hi - t_lo) / spec.grid as f64;
        for row in 0..spec.grid {
            // Row 0 at the top of the diagram (largest t).
            let t = t_hi - (row as f64 + 0.5) * cell_h;
            let mut run_start = 0usize;
            let mut run_color: Option<&str> = None;
            let flush = |svg: &mut String, start: usize, end: usize, color: Option<&str>| {
                if let Some(c) = color {
                    let x0 = x_lo + start as f64 * cell_w;
                    let x1 = x_lo + end as f64 * cell_w;
                    let _ = writeln!(
                        svg,
                        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{c}"/>"#,
                        fmt2(frame.sx(x0)),
                        fmt2(frame.sy(t) - 0.5 * cell_h / (t_hi - t_lo) * h),
                        fmt2((x1 - x0) / (x_hi - x_lo) * w),
                        fmt2(cell_h / (t_hi - t_lo) * h),
                    );
                }
            };
            for col in 0..spec.grid {
                let x = x_lo + (col as f64 + 0.5) * cell_w;
                let p = Event::d1(t, x);
                let color = if nested {
                    match structure.layer_of(&p) {
                        Ok(q) if q.layer == 0 => None,
                        Ok(q) if q.layer % 2 == 1 => Some(COLLAPSED),
                        Ok(_) => Some(TRANSITIONAL),
                        Err(_) => None,
                    }
                } else {
                    match structure.region_of(&p).region {
                        Region::Uncollapsed => None,
                        Region::FullyCollapsed => Some(COLLAPSED),
                        Region::Transitional(_) => Some(TRANSITIONAL),
                    }
                };
                if color != run_color {
                    flush(&mut svg, run_start, col, run_color);
                    run_start = col;
                    run_color = color;
                }
            }
            flush(&mut svg, run_start, spec.grid, run_color);
        }
    }

    // Collapse cones: 45-degree lines from each apex down to the viewport
    // edge.
    for m in &sc.measurements {
        let apex = m.apex;
        for side in [-1.0, 1.0] {
            let x_edge = if side < 0.0 { x_lo } else { x_hi };
            let reach = (x_edge - apex.x()[0]) * side;
            let drop = (apex.t() - t_lo).min(reach.max(0.0));
            if drop <= 0.0 {
                continue;
            }
            let end_x = apex.x()[0] + side * drop;
            let end_t = apex.t() - drop;
            let _ = writeln!(
                svg,
                r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#000000" stroke-width="1"/>"##,
                fmt2(frame.sx(apex.x()[0])),
                fmt2(frame.sy(apex.t())),
                fmt2(frame.sx(end_x)),
                fmt2(frame.sy(end_t)),
            );
        }
    }

    // Worldlines, clipped to the time range.
    for line in &sc.worldlines {
        let mut points: Vec<(f64, f64)> = Vec::new();
        for seg in line.segments() {
            let a = seg.t_start.max(t_lo);
            let b = seg.t_end.min(t_hi);
            if b <= a {
                continue;
            }
            let pa = seg.position_at(a);
            let pb = seg.position_at(b);
            if points.is_empty() {
                points.push((pa.t(), pa.x()[0]));
            }
            points.push((pb.t(), pb.x()[0]));
        }
        if points.len() < 2 {
            continue;
        }
        let path: Vec<String> = points
            .iter()
            .map(|(t, x)| format!("{},{}", fmt2(frame.sx(*x)), fmt2(frame.sy(*t))))
            .collect();
        let _ = writeln!(
            svg,
            r##"<polyline points="{}" fill="none" stroke="#1a1a1a" stroke-width="2"/>"##,
            path.join(" ")
        );
        if let Some(label) = spec.labels.get(line.id()) {
            let (t, x) = points[points.len() - 1];
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" font-family="monospace" font-size="12">{}</text>"#,
                fmt2(frame.sx(x) + 4.0),
                fmt2(frame.sy(t) + 12.0),
                label
            );
        }
    }

    // Apex markers and labels (A, B, ... unless overridden).
    for (i, m) in sc.measurements.iter().enumerate() {
        let apex = m.apex;
        let _ = writeln!(
            svg,
            r##"<circle cx="{}" cy="{}" r="3" fill="#000000"/>"##,
            fmt2(frame.sx(apex.x()[0])),
            fmt2(frame.sy(apex.t())),
        );
        let fallback = char::from(b'A' + (i % 26) as u8).to_string();
        let label = spec
            .labels
            .get(&format!("m{i}"))
            .cloned()
            .unwrap_or(fallback);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="monospace" font-size="12">{label}</text>"#,
            fmt2(frame.sx(apex.x()[0]) + 5.0),
            fmt2(frame.sy(apex.t()) - 5.0),
        );
    }

    let _ = writeln!(
        svg,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#000000" stroke-width="1"/>"##,
        fmt2(frame.pad),
        fmt2(frame.pad),
        fmt2(w),
        fmt2(h)
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collapse::{MeasurementEvent, Outcome};
    use crate::geometry::Worldline;

    fn spec() -> DiagramSpec {
        DiagramSpec {
            t_range: (-3.0, 3.0),
            x_range: (-3.0, 3.0),
            grid: 40,
            width: 200,
            labels: BTreeMap::new(),
        }
    }

    fn single_cone() -> Scenario {
        let lines = vec![
            Worldline::at_rest("left", &[0.0]),
            Worldline::at_rest("right", &[1.0]),
        ];
        let ms = vec![MeasurementEvent::new(
            Event::d1(0.0, 0.0),
            "left",
            Outcome::Found,
        )];
        Scenario::new(lines, vec![0.5, 0.5], ms).unwrap()
    }

    #[test]
    fn emission_is_deterministic() {
        let sc = single_cone();
        let a = emit_svg(&sc, &spec()).unwrap();
        let b = emit_svg(&sc, &spec()).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.ends_with("</svg>\n"));
    }

    #[test]
    fn single_cone_shades_collapsed_region_only() {
        let sc = single_cone();
        let svg = emit_svg(&sc, &spec()).unwrap();
        assert!(svg.contains(COLLAPSED));
        // One cone has no transitional cells.
        assert!(!svg.contains(TRANSITIONAL));
    }

    #[test]
    fn intersecting_cones_get_three_tones() {
        let lines = vec![
            Worldline::at_rest("left", &[-1.0]),
            Worldline::at_rest("right", &[1.0]),
        ];
        let ms = vec![
            MeasurementEvent::new(Event::d1(0.0, -1.0), "left", Outcome::Found),
            MeasurementEvent::new(Event::d1(0.0, 1.0), "right", Outcome::Null),
        ];
        let sc = Scenario::new(lines, vec![0.5, 0.5], ms).unwrap();
        let svg = emit_svg(&sc, &spec()).unwrap();
        assert!(svg.contains(COLLAPSED));
        assert!(svg.contains(TRANSITIONAL));
    }

    #[test]
    fn nested_cones_alternate_layers() {
        let lines = vec![
            Worldline::at_rest("a", &[0.0]),
            Worldline::at_rest("b", &[0.5]),
        ];
        let ms = vec![
            MeasurementEvent::new(Event::d1(0.0, 0.0), "a", Outcome::Null),
            MeasurementEvent::new(Event::d1(2.0, 0.5), "b", Outcome::Found),
        ];
        let sc = Scenario::new(lines, vec![0.5, 0.5], ms).unwrap();
        let svg = emit_svg(&sc, &spec()).unwrap();
        assert!(svg.contains(COLLAPSED));
        assert!(svg.contains(TRANSITIONAL));
    }

    #[test]
    fn rejects_higher_dimensions() {
        let lines = vec![
            Worldline::at_rest("a", &[0.0, 0.0]),
            Worldline::at_rest("b", &[1.0, 0.0]),
        ];
        let sc = Scenario::new(lines, vec![0.5, 0.5], vec![]).unwrap();
        assert!(matches!(
            emit_svg(&sc, &spec()),
            Err(DiagramError::NotOneDimensional(2))
        ));
    }
}
