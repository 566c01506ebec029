//! Minimal self-contained SVG scatter plots.

use std::fmt::Write;

use shiftspec::aline::clipped_probit;

const WIDTH: f64 = 560.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 70.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;

/// Accuracies used for the secondary (raw accuracy) tick labels.
const ACC_TICKS: [f64; 13] = [
    0.001, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 0.99, 0.999,
];

pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
}

pub struct Line {
    pub label: String,
    pub color: &'static str,
    pub dashed: bool,
    pub slope: f64,
    pub intercept: f64,
}

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Coordinates are probits and get accuracy ticks on the top and right.
    pub probit_axes: bool,
    pub series: Vec<Series>,
    pub lines: Vec<Line>,
}

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Scatter of accuracy pairs on probit axes.
pub fn probit_plot(title: &str, x_label: &str, y_label: &str, pairs: &[(f64, f64)], clip_alpha: f64) -> Plot {
    Plot {
        title: title.into(),
        x_label: format!("{x_label} (probit)"),
        y_label: format!("{y_label} (probit)"),
        probit_axes: true,
        series: vec![Series {
            label: "models".into(),
            color: PALETTE[0],
            points: pairs
                .iter()
                .map(|&(x, y)| (clipped_probit(x, clip_alpha), clipped_probit(y, clip_alpha)))
                .collect(),
        }],
        lines: vec![Line {
            label: "y = x".into(),
            color: "#888888",
            dashed: true,
            slope: 1.0,
            intercept: 0.0,
        }],
    }
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let mult = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    mult * mag
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = ((hi - lo) * 0.08).max(1e-3);
    (lo - pad, hi + pad)
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    pub fn render(&self) -> String {
        let (x0, x1) = range(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
        let (y0, y1) = range(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

        let mut o = String::new();
        let _ = writeln!(
            o,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(o, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            o,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            o,
            r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
        );

        // primary ticks: bottom and left
        let step = nice_step(x1 - x0);
        let mut t = (x0 / step).ceil() * step;
        while t <= x1 {
            let _ = writeln!(
                o,
                r##"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="#333"/><text x="{0:.2}" y="{3}" text-anchor="middle">{4}</text>"##,
                sx(t),
                TOP + ph,
                TOP + ph + 5.0,
                TOP + ph + 18.0,
                fmt_num(t)
            );
            t += step;
        }
        let step = nice_step(y1 - y0);
        let mut t = (y0 / step).ceil() * step;
        while t <= y1 {
            let _ = writeln!(
                o,
                r##"<line x1="{0}" y1="{1:.2}" x2="{2}" y2="{1:.2}" stroke="#333"/><text x="{3}" y="{4:.2}" text-anchor="end">{5}</text>"##,
                LEFT - 5.0,
                sy(t),
                LEFT,
                LEFT - 8.0,
                sy(t) + 4.0,
                fmt_num(t)
            );
            t += step;
        }

        // secondary ticks: raw accuracy on top and right
        if self.probit_axes {
            for &a in &ACC_TICKS {
                let z = clipped_probit(a, 1e-6);
                if z >= x0 && z <= x1 {
                    let _ = writeln!(
                        o,
                        r##"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="#999"/><text x="{0:.2}" y="{3}" text-anchor="middle" fill="#666">{4}</text>"##,
                        sx(z),
                        TOP - 5.0,
                        TOP,
                        TOP - 8.0,
                        fmt_num(a)
                    );
                }
                if z >= y0 && z <= y1 {
                    let _ = writeln!(
                        o,
                        r##"<line x1="{0}" y1="{1:.2}" x2="{2}" y2="{1:.2}" stroke="#999"/><text x="{3}" y="{4:.2}" fill="#666">{5}</text>"##,
                        LEFT + pw,
                        sy(z),
                        LEFT + pw + 5.0,
                        LEFT + pw + 8.0,
                        sy(z) + 4.0,
                        fmt_num(a)
                    );
                }
            }
        }

        // lines, clipped to the plot box by evaluating at the x range ends
        let _ = writeln!(
            o,
            r#"<clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath>"#
        );
        for line in &self.lines {
            let dash = if line.dashed { r#" stroke-dasharray="5,4""# } else { "" };
            let _ = writeln!(
                o,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}"{} clip-path="url(#plot)"/>"#,
                sx(x0),
                sy(line.intercept + line.slope * x0),
                sx(x1),
                sy(line.intercept + line.slope * x1),
                line.color,
                dash
            );
        }
        for s in &self.series {
            for &(x, y) in &s.points {
                if x.is_finite() && y.is_finite() {
                    let _ = writeln!(
                        o,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}" fill-opacity="0.75"/>"#,
                        sx(x),
                        sy(y),
                        s.color
                    );
                }
            }
        }

        // legend
        let mut ly = TOP + 14.0;
        let entries = self
            .series
            .iter()
            .map(|s| (&s.label, s.color, false))
            .chain(self.lines.iter().map(|l| (&l.label, l.color, true)));
        for (label, color, is_line) in entries {
            let mark = if is_line {
                format!(
                    r#"<line x1="{}" y1="{ly:.2}" x2="{}" y2="{ly:.2}" stroke="{color}"/>"#,
                    LEFT + 8.0,
                    LEFT + 22.0
                )
            } else {
                format!(r#"<circle cx="{}" cy="{ly:.2}" r="3" fill="{color}"/>"#, LEFT + 15.0)
            };
            let _ = writeln!(
                o,
                r#"{mark}<text x="{}" y="{:.2}">{}</text>"#,
                LEFT + 28.0,
                ly + 4.0,
                escape(label)
            );
            ly += 15.0;
        }

        let _ = writeln!(
            o,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            o,
            r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        o.push_str("</svg>\n");
        o
    }
}
