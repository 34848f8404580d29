//! Minimal standalone SVG line charts.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub enum SeriesKind {
    Line,
    /// Markers with symmetric error bars of the given half-heights.
    Points { errors: Vec<f64> },
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub kind: SeriesKind,
}

impl Series {
    pub fn line(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
            kind: SeriesKind::Line,
        }
    }

    pub fn points(name: impl Into<String>, points: Vec<(f64, f64)>, errors: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            points,
            kind: SeriesKind::Points { errors },
        }
    }
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Step of the form {1, 2, 5} x 10^k that gives about `target` intervals.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let frac = raw / mag;
    let nice = if frac < 1.5 {
        1.0
    } else if frac < 3.5 {
        2.0
    } else if frac < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64) -> (f64, f64, Vec<f64>) {
    let step = nice_step(hi - lo, 5.0);
    let start = (lo / step).floor() * step;
    let end = (hi / step).ceil() * step;
    let n = ((end - start) / step).round() as usize;
    let vals = (0..=n).map(|i| start + i as f64 * step).collect();
    (start, end, vals)
}

fn tick_label(v: f64, step: f64, scientific: bool) -> String {
    if v.abs() < step * 1e-6 {
        return "0".into();
    }
    if scientific {
        let digits = ((v.abs().log10().floor() - step.log10().floor()).max(0.0) as usize).min(4);
        format!("{v:.digits$e}")
    } else {
        let decimals = (-step.log10().floor()).max(0.0) as usize;
        format!("{v:.decimals$}")
    }
}

fn bounds(chart: &Chart) -> ((f64, f64), (f64, f64)) {
    let mut x = (f64::INFINITY, f64::NEG_INFINITY);
    let mut y = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &chart.series {
        for (i, &(px, py)) in s.points.iter().enumerate() {
            let e = match &s.kind {
                SeriesKind::Points { errors } => errors.get(i).copied().unwrap_or(0.0),
                SeriesKind::Line => 0.0,
            };
            x = (x.0.min(px), x.1.max(px));
            y = (y.0.min(py - e), y.1.max(py + e));
        }
    }
    let widen = |(lo, hi): (f64, f64)| {
        if !lo.is_finite() || !hi.is_finite() {
            (0.0, 1.0)
        } else if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
            (lo - pad, hi + pad)
        } else {
            (lo, hi)
        }
    };
    (widen(x), widen(y))
}

impl Chart {
    pub fn render(&self) -> String {
        let ((x0, x1), (y0, y1)) = bounds(self);
        let (x0, x1, xt) = ticks(x0.min(0.0), x1);
        let (y0, y1, yt) = ticks(y0, y1);
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;
        let y_sci = y1.abs().max(y0.abs()) < 1e-2 || y1.abs().max(y0.abs()) >= 1e5;
        let x_sci = x1.abs().max(x0.abs()) >= 1e5;
        let xstep = xt.get(1).map(|v| v - xt[0]).unwrap_or(1.0);
        let ystep = yt.get(1).map(|v| v - yt[0]).unwrap_or(1.0);

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="25" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        // grid and ticks
        for &v in &xt {
            let x = sx(v);
            let _ = writeln!(
                out,
                r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e5e5e5"/>"##,
                TOP + ph
            );
            let _ = writeln!(
                out,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                TOP + ph + 18.0,
                tick_label(v, xstep, x_sci)
            );
        }
        for &v in &yt {
            let y = sy(v);
            let _ = writeln!(
                out,
                r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/>"##,
                LEFT + pw
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                y + 4.0,
                tick_label(v, ystep, y_sci)
            );
        }
        // axes
        let _ = writeln!(
            out,
            r#"<polyline points="{LEFT},{TOP} {LEFT},{b:.2} {r:.2},{b:.2}" fill="none" stroke="black"/>"#,
            b = TOP + ph,
            r = LEFT + pw
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            match &s.kind {
                SeriesKind::Line => {
                    let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                    let _ = writeln!(
                        out,
                        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                        pts.join(" ")
                    );
                }
                SeriesKind::Points { errors } => {
                    for (i, &(x, y)) in s.points.iter().enumerate() {
                        let e = errors.get(i).copied().unwrap_or(0.0);
                        let (px, lo, hi) = (sx(x), sy(y - e), sy(y + e));
                        if e > 0.0 {
                            let _ = writeln!(
                                out,
                                r#"<path d="M{px:.2},{lo:.2} V{hi:.2} M{:.2},{lo:.2} H{:.2} M{:.2},{hi:.2} H{:.2}" stroke="{color}" fill="none"/>"#,
                                px - 5.0,
                                px + 5.0,
                                px - 5.0,
                                px + 5.0
                            );
                        }
                        let _ = writeln!(
                            out,
                            r#"<circle cx="{px:.2}" cy="{:.2}" r="4" fill="{color}"/>"#,
                            sy(y)
                        );
                    }
                }
            }
        }

        // legend
        let lx = LEFT + 12.0;
        let ly = TOP + 10.0;
        let lh = 18.0 * self.series.len() as f64 + 8.0;
        let longest = self.series.iter().map(|s| s.name.chars().count()).max().unwrap_or(0);
        let lw = 52.0 + 7.0 * longest as f64;
        let _ = writeln!(
            out,
            r##"<rect x="{lx:.2}" y="{ly:.2}" width="{lw:.2}" height="{lh:.2}" fill="white" fill-opacity="0.85" stroke="#999"/>"##
        );
        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let y = ly + 16.0 + 18.0 * k as f64;
            match s.kind {
                SeriesKind::Line => {
                    let _ = writeln!(
                        out,
                        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/>"#,
                        lx + 8.0,
                        y - 4.0,
                        lx + 32.0,
                        y - 4.0
                    );
                }
                SeriesKind::Points { .. } => {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/>"#,
                        lx + 20.0,
                        y - 4.0
                    );
                }
            }
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{y:.2}">{}</text>"#,
                lx + 40.0,
                escape(&s.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}
