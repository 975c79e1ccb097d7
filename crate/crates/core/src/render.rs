//! SVG snapshots of a configuration.

use std::fmt::Write as _;

use thiserror::Error;

use crate::config::Configuration;
use crate::geometry::{convex_hull_tol, Point, Tolerances};
use crate::simulator::{ExecutedMove, Trace};
use crate::vision::collinear_lines;

const SIZE: f64 = 640.0;
const MARGIN: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("round {requested} out of range (trace has configurations 0..={last})")]
    OutOfRange { requested: u64, last: u64 },
}

/// Maps plane coordinates into the image, y pointing up.
struct View {
    min: Point,
    scale: f64,
}

impl View {
    fn fit(points: &[Point]) -> View {
        let (mut lo, mut hi) = (points[0], points[0]);
        for p in points {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let span = (hi.x - lo.x).max(hi.y - lo.y);
        let scale = if span > 0.0 { (SIZE - 2.0 * MARGIN) / span } else { 1.0 };
        View { min: lo, scale }
    }

    fn map(&self, p: Point) -> (f64, f64) {
        (
            MARGIN + (p.x - self.min.x) * self.scale,
            SIZE - MARGIN - (p.y - self.min.y) * self.scale,
        )
    }
}

/// Robots as labelled dots (`id:bit`), lines of collinearity, the hull
/// outline and arrows for `moves`.
pub fn render_configuration(config: &Configuration, moves: &[ExecutedMove], tol: &Tolerances) -> String {
    let points = config.positions();
    let view = View::fit(&points);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    svg.push_str(
        r##"<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" markerHeight="6" orient="auto-start-reverse"><path d="M 0 0 L 10 5 L 0 10 z" fill="#d62728"/></marker></defs>
"##,
    );
    let _ = writeln!(svg, r#"<title>configuration at round {}</title>"#, config.round);
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    let hull = convex_hull_tol(&points, tol);
    if hull.len() >= 3 {
        let pts: Vec<String> = hull
            .iter()
            .map(|&p| {
                let (x, y) = view.map(p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r##"<polygon class="hull" points="{}" fill="none" stroke="#999999" stroke-dasharray="6 4"/>"##,
            pts.join(" ")
        );
    }

    for line in collinear_lines(config, tol) {
        let first = config.position(line.members[0]).expect("member of config");
        let last = config
            .position(*line.members.last().expect("nonempty line"))
            .expect("member of config");
        let (x1, y1) = view.map(first);
        let (x2, y2) = view.map(last);
        let _ = writeln!(
            svg,
            r##"<line class="collinear" x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="#1f77b4" stroke-width="1.5"/>"##
        );
    }

    for m in moves {
        let (x1, y1) = view.map(m.from);
        let (x2, y2) = view.map(m.reached);
        let _ = writeln!(
            svg,
            r##"<line class="move" x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="#d62728" marker-end="url(#arrow)"/>"##
        );
    }

    for r in config.robots() {
        let (x, y) = view.map(r.position);
        let fill = if r.bit { "#ff7f0e" } else { "#222222" };
        let _ = writeln!(
            svg,
            r#"<circle class="robot" cx="{x:.3}" cy="{y:.3}" r="5" fill="{fill}"/><text x="{:.3}" y="{:.3}" font-size="11" font-family="monospace">{}:{}</text>"#,
            x + 7.0,
            y - 7.0,
            r.id,
            u8::from(r.bit)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Configuration index `t` of a trace, with the moves that produced it.
pub fn render_round(trace: &Trace, t: u64) -> Result<String, RenderError> {
    let last = trace.rounds.len() as u64;
    let config = trace
        .configuration_at(t)
        .ok_or(RenderError::OutOfRange { requested: t, last })?;
    let moves: &[ExecutedMove] = if t == 0 {
        &[]
    } else {
        &trace.rounds[t as usize - 1].moves
    };
    Ok(render_configuration(config, moves, &trace.spec.tolerances))
}

/// One image per configuration index.
pub fn render_all(trace: &Trace) -> Vec<String> {
    (0..=trace.rounds.len() as u64)
        .map(|t| render_round(trace, t).expect("index in range"))
        .collect()
}
