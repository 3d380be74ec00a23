//! Minimal static SVG emission for histograms and scatter plots.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

pub const PALETTE: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Roughly five round tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * span {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn pad(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let m = 0.05 * (hi - lo);
        (lo - m, hi + m)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    body: String,
}

impl Frame {
    fn new(title: &str, x_label: &str, y_label: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        let mut f = Self { x, y, body: String::new() };
        let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
        let b = &mut f.body;
        let _ = writeln!(b, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##);
        let _ = writeln!(b, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#, LEFT + pw / 2.0, escape(title));
        let _ = writeln!(
            b,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 15.0,
            escape(x_label)
        );
        let _ = writeln!(
            b,
            r#"<text x="18" y="{:.1}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(y_label)
        );
        for t in ticks(x.0, x.1) {
            let px = f.px(t);
            let _ = writeln!(
                f.body,
                r##"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="#333"/><text x="{px:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"##,
                HEIGHT - BOTTOM,
                HEIGHT - BOTTOM + 5.0,
                HEIGHT - BOTTOM + 18.0,
                fmt_tick(t)
            );
        }
        for t in ticks(y.0, y.1) {
            let py = f.py(t);
            let _ = writeln!(
                f.body,
                r##"<line x1="{:.1}" y1="{py:.1}" x2="{LEFT}" y2="{py:.1}" stroke="#333"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"##,
                LEFT - 5.0,
                LEFT - 8.0,
                py + 4.0,
                fmt_tick(t)
            );
        }
        f
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + (v - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }

    fn legend(&mut self, i: usize, color: &str, label: &str, dashed: bool) {
        let x = WIDTH - RIGHT + 15.0;
        let y = TOP + 10.0 + 20.0 * i as f64;
        let dash = if dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<line x1="{x}" y1="{y}" x2="{:.1}" y2="{y}" stroke="{color}" stroke-width="3"{dash}/><text x="{:.1}" y="{:.1}" font-size="12">{}</text>"#,
            x + 20.0,
            x + 26.0,
            y + 4.0,
            escape(label)
        );
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}

fn fmt_tick(t: f64) -> String {
    let s = format!("{t:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

/// One histogram series: per-bin fractions and an optional median marker.
pub struct Series<'a> {
    pub label: &'a str,
    pub fractions: &'a [f64],
    pub median: Option<f64>,
}

/// Step-outline histograms sharing `edges`; bin 0 is the zero atom and is
/// drawn as a bar of width `zero_width` centred on 0.
pub fn histogram(title: &str, x_label: &str, edges: &[(f64, f64)], series: &[Series]) -> String {
    let zero_w = edges.iter().skip(1).map(|(a, b)| b - a).next().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let lo = edges.iter().skip(1).map(|e| e.0).fold(-0.5 * zero_w, f64::min);
    let hi = edges.iter().skip(1).map(|e| e.1).fold(0.5 * zero_w, f64::max);
    let y_max = series.iter().flat_map(|s| s.fractions.iter().copied()).fold(0.0, f64::max).max(1e-12);
    let mut f = Frame::new(title, x_label, "fraction of jobs", pad(lo, hi), (0.0, y_max * 1.05));
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        for (k, (&(a, b), &v)) in edges.iter().zip(s.fractions).enumerate() {
            let (a, b) = if k == 0 { (-0.5 * zero_w, 0.5 * zero_w) } else { (a, b) };
            let (xa, xb, y0, yv) = (f.px(a), f.px(b), f.py(0.0), f.py(v));
            let _ = write!(path, "M{xa:.1},{y0:.1}L{xa:.1},{yv:.1}L{xb:.1},{yv:.1}L{xb:.1},{y0:.1}");
        }
        let _ = writeln!(f.body, r#"<path d="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
        if let Some(m) = s.median.filter(|m| m.is_finite()) {
            let x = f.px(m);
            let _ = writeln!(
                f.body,
                r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="{color}" stroke-width="2" stroke-dasharray="5,3"/>"#,
                f.py(0.0),
                f.py(y_max * 1.05)
            );
        }
        f.legend(i, color, s.label, false);
    }
    f.legend(series.len(), "#555", "median", true);
    f.finish()
}

pub struct Group<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
    pub centroid: Option<(f64, f64)>,
}

/// Points coloured by group with a larger outlined marker at each centroid.
pub fn scatter(title: &str, x_label: &str, y_label: &str, groups: &[Group]) -> String {
    let all = || groups.iter().flat_map(|g| g.points.iter().copied());
    let (mut xl, mut xh, mut yl, mut yh) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all() {
        xl = xl.min(x);
        xh = xh.max(x);
        yl = yl.min(y);
        yh = yh.max(y);
    }
    if !xl.is_finite() {
        (xl, xh, yl, yh) = (0.0, 1.0, 0.0, 1.0);
    }
    let mut f = Frame::new(title, x_label, y_label, pad(xl, xh), pad(yl, yh));
    for (i, g) in groups.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for &(x, y) in &g.points {
            let _ = writeln!(
                f.body,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}" fill-opacity="0.6"/>"#,
                f.px(x),
                f.py(y)
            );
        }
        if let Some((x, y)) = g.centroid {
            let _ = writeln!(
                f.body,
                r##"<circle cx="{:.1}" cy="{:.1}" r="8" fill="{color}" stroke="#000" stroke-width="2"/>"##,
                f.px(x),
                f.py(y)
            );
        }
        f.legend(i, color, g.label, false);
    }
    f.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(ticks(1.0, 1.0), vec![1.0]);
        assert_eq!(fmt_tick(0.25), "0.25");
        assert_eq!(fmt_tick(3.0), "3");
    }

    #[test]
    fn documents_are_closed() {
        let h = histogram(
            "t",
            "EPT",
            &[(0.0, 0.0), (0.0, 1.0), (1.0, 2.0)],
            &[Series {
                label: "observed",
                fractions: &[0.2, 0.5, 0.3],
                median: Some(1.0),
            }],
        );
        assert!(h.starts_with("<svg") && h.trim_end().ends_with("</svg>"));
        let s = scatter("t", "x", "y & z", &[Group { label: "L1", points: vec![(0.0, 1.0)], centroid: Some((0.0, 1.0)) }]);
        assert!(s.contains("y &amp; z"));
        assert_eq!(s.matches("<circle").count(), 2);
    }
}
