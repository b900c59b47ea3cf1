//! Minimal SVG rendering: inter-sample time stems and running averages.

use std::fmt::Write;

use stc_core::simulation::{running_average, CsvRow};

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const TICKS: usize = 5;
const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct Series {
    pub name: String,
    /// `(t_i, tau_i)`.
    pub points: Vec<(f64, f64)>,
    pub average: Vec<f64>,
}

impl Series {
    pub fn from_rows(name: String, rows: &[CsvRow]) -> Self {
        let taus: Vec<f64> = rows.iter().map(|r| r.tau).collect();
        Self {
            name,
            points: rows.iter().map(|r| (r.t, r.tau)).collect(),
            average: running_average(&taus),
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn render(series: &[Series]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let t_max = all().map(|p| p.0).fold(0.0f64, f64::max);
    let t_min = all().map(|p| p.0).fold(f64::INFINITY, f64::min).min(t_max);
    let y_max = all().map(|p| p.1).fold(0.0f64, f64::max) * 1.1;
    let t_span = if t_max > t_min { t_max - t_min } else { 1.0 };
    let y_span = if y_max > 0.0 { y_max } else { 1.0 };
    let px = |t: f64| MARGIN + (t - t_min) / t_span * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - y / y_span * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    // Axes and ticks.
    let (x0, x1, y0, y1) = (px(t_min), px(t_min + t_span), py(0.0), py(y_span));
    let _ = writeln!(
        svg,
        r#"<path class="axes" d="M{x0:.2},{y1:.2} V{y0:.2} H{x1:.2}" stroke="black" fill="none"/>"#
    );
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let t = t_min + f * t_span;
        let y = f * y_span;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{t:.3}</text>"#,
            px(t),
            y0 + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{y:.3}</text>"#,
            x0 - 6.0,
            py(y) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">t</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">inter-sample time</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    for (n, s) in series.iter().enumerate() {
        let color = PALETTE[n % PALETTE.len()];
        let name = escape(&s.name);
        let mut stems = String::new();
        for &(t, tau) in &s.points {
            let _ = write!(stems, "M{:.2},{y0:.2}V{:.2}", px(t), py(tau));
        }
        let _ = writeln!(
            svg,
            r#"<path class="stems" data-series="{name}" d="{stems}" stroke="{color}" stroke-opacity="0.45" fill="none"/>"#
        );
        let points: Vec<String> = s
            .points
            .iter()
            .zip(&s.average)
            .map(|(&(t, _), &a)| format!("{:.2},{:.2}", px(t), py(a)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="average" data-series="{name}" points="{}" stroke="{color}" stroke-width="2" fill="none"/>"#,
            points.join(" ")
        );
        let ly = MARGIN - 30.0 + 16.0 * n as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{name}</text>"#,
            WIDTH - 200.0,
            WIDTH - 180.0,
            WIDTH - 174.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
