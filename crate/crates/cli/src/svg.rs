//! Static SVG rendering of a front with constant-cost lines.

use std::fmt::Write;

use hdc_core::learning::ParetoFront;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;

/// An operating point `(eps, delta)` and its cost `delta / (1 - eps)`.
#[derive(Debug, Clone, Copy)]
pub struct CostMark {
    pub eps: f64,
    pub delta: f64,
    pub cost: f64,
}

struct Frame {
    y_max: f64,
}

impl Frame {
    fn x(&self, eps: f64) -> f64 {
        LEFT + eps * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, delta: f64) -> f64 {
        TOP + (HEIGHT - TOP - BOTTOM) * (1.0 - delta / self.y_max)
    }
}

/// Front polyline over `[0, 1] x [0, y_max]`. Each mark adds the line through
/// its point and `(1, 0)`, whose intercept on the `delta` axis is the cost.
pub fn render_front(front: &ParetoFront, marks: &[CostMark]) -> String {
    let peak = front
        .points
        .iter()
        .map(|p| p.delta)
        .chain(marks.iter().map(|m| m.cost))
        .fold(0.0, f64::max);
    let frame = Frame {
        y_max: if peak > 0.0 { 1.05 * peak } else { 1.0 },
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (frame.x(0.0), frame.x(1.0), frame.y(0.0), frame.y(frame.y_max));
    let _ = writeln!(
        s,
        r#"<path d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let e = i as f64 / 4.0;
        let x = frame.x(e);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{e:.2}</text>"#,
            y0 + 4.0,
            y0 + 16.0
        );
        let d = frame.y_max * e;
        let y = frame.y(d);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{d:.3}</text>"#,
            x0 - 4.0,
            x0 - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">||P|| budget</text>"#,
        0.5 * (x0 + x1),
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">residual ||B+PW-W||</text>"#,
        0.5 * (y0 + y1),
        0.5 * (y0 + y1)
    );

    let mut path: Vec<String> = front
        .points
        .iter()
        .map(|p| format!("{:.2},{:.2}", frame.x(p.eps), frame.y(p.delta)))
        .collect();
    if front.eps_exact.is_infinite() && !path.is_empty() {
        path.push(format!("{:.2},{:.2}", frame.x(1.0), frame.y(0.0)));
    }
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#1f4e9c" stroke-width="1.5"/>"##,
        path.join(" ")
    );
    for p in &front.points {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="#1f4e9c"/>"##,
            frame.x(p.eps),
            frame.y(p.delta)
        );
    }
    for m in marks {
        let _ = writeln!(
            s,
            r##"<line x1="{x0:.2}" y1="{:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="#b22222" stroke-dasharray="5,3"/>"##,
            frame.y(m.cost)
        );
        let (cx, cy) = (frame.x(m.eps), frame.y(m.delta));
        let _ = writeln!(
            s,
            r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="4" fill="none" stroke="#b22222"/><text x="{:.2}" y="{:.2}" fill="#b22222">cost {:.4}</text>"##,
            cx + 6.0,
            cy - 6.0,
            m.cost
        );
    }
    s.push_str("</svg>\n");
    s
}
