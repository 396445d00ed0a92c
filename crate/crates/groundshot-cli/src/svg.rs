//! Small hand-rolled SVG line plots: fixed layout, fixed palette, no
//! styling dependencies, deterministic output.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 44.0;
const MARGIN_BOTTOM: f64 = 54.0;
const PALETTE: [&str; 6] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// One labelled polyline.
#[derive(Debug, Clone)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Curve {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Curve { label: label.into(), points }
    }
}

fn tick_text(value: f64) -> String {
    if value != 0.0 && (value.abs() >= 1e4 || value.abs() < 1e-3) {
        format!("{value:.3e}")
    } else {
        format!("{value:.4}")
    }
}

fn bounds(curves: &[Curve]) -> ((f64, f64), (f64, f64)) {
    let mut x = (f64::INFINITY, f64::NEG_INFINITY);
    let mut y = (f64::INFINITY, f64::NEG_INFINITY);
    for curve in curves {
        for &(px, py) in &curve.points {
            if px.is_finite() && py.is_finite() {
                x = (x.0.min(px), x.1.max(px));
                y = (y.0.min(py), y.1.max(py));
            }
        }
    }
    if !x.0.is_finite() || !x.1.is_finite() {
        x = (0.0, 1.0);
    }
    if !y.0.is_finite() || !y.1.is_finite() {
        y = (0.0, 1.0);
    }
    let widen = |(lo, hi): (f64, f64)| {
        if hi > lo {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    (widen(x), widen(y))
}

/// Renders the curves into a complete standalone SVG document.
pub fn polyline_plot(title: &str, x_label: &str, y_label: &str, curves: &[Curve]) -> String {
    let ((x0, x1), (y0, y1)) = bounds(curves);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let map_x = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let map_y = |y: f64| HEIGHT - MARGIN_BOTTOM - (y - y0) / (y1 - y0) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"13\">"
    );
    let _ = writeln!(out, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );

    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = x0 + t * (x1 - x0);
        let yv = y0 + t * (y1 - y0);
        let px = map_x(xv);
        let py = map_y(yv);
        let _ = writeln!(
            out,
            "<line x1=\"{px:.2}\" y1=\"{:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>",
            MARGIN_TOP,
            HEIGHT - MARGIN_BOTTOM
        );
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{:.2}\" y2=\"{py:.2}\" stroke=\"#dddddd\"/>",
            MARGIN_LEFT,
            WIDTH - MARGIN_RIGHT
        );
        let _ = writeln!(
            out,
            "<text x=\"{px:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            HEIGHT - MARGIN_BOTTOM + 18.0,
            tick_text(xv)
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            MARGIN_LEFT - 6.0,
            py + 4.0,
            tick_text(yv)
        );
    }

    let _ = writeln!(
        out,
        "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w:.2}\" height=\"{plot_h:.2}\" \
         fill=\"none\" stroke=\"#333333\"/>"
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"18\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">{}</text>",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    );

    for (index, curve) in curves.iter().enumerate() {
        let color = PALETTE[index % PALETTE.len()];
        let mut points = String::new();
        for &(px, py) in curve.points.iter().filter(|(a, b)| a.is_finite() && b.is_finite()) {
            let _ = write!(points, "{:.2},{:.2} ", map_x(px), map_y(py));
        }
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            points.trim_end()
        );
        let legend_y = MARGIN_TOP + 16.0 + 18.0 * index as f64;
        let legend_x = WIDTH - MARGIN_RIGHT - 180.0;
        let _ = writeln!(
            out,
            "<line x1=\"{legend_x:.2}\" y1=\"{legend_y:.2}\" x2=\"{:.2}\" y2=\"{legend_y:.2}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>",
            legend_x + 24.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
            legend_x + 30.0,
            legend_y + 4.0,
            escape(&curve.label)
        );
    }

    out.push_str("</svg>\n");
    out
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
