//! Minimal self-contained SVG charts: lines, markers and histogram bars on
//! linear or logarithmic axes.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 84.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

pub const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Dashed,
    Markers,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub color: String,
    pub style: Style,
    pub points: Vec<(f64, f64)>,
    /// Histogram bars `(left, right, height)`; drawn under any points.
    pub bars: Vec<(f64, f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, color: &str, style: Style, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), color: color.into(), style, points, bars: Vec::new() }
    }

    pub fn bars(label: impl Into<String>, color: &str, edges: &[f64], heights: &[f64]) -> Self {
        let bars = edges.windows(2).zip(heights).map(|(e, &h)| (e[0], e[1], h)).collect();
        Series { label: label.into(), color: color.into(), style: Style::Line, points: Vec::new(), bars }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool, include_zero: bool) -> Axis {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = if log { (1.0, 10.0) } else { (0.0, 1.0) };
        }
        if log {
            let (a, b) = (lo.log10().floor(), hi.log10().ceil());
            let b = if b <= a { a + 1.0 } else { b };
            return Axis { lo: 10f64.powf(a), hi: 10f64.powf(b), log };
        }
        if include_zero {
            lo = lo.min(0.0);
            hi = hi.max(0.0);
        }
        if hi - lo <= 0.0 {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
            (lo, hi) = (lo - pad, hi + pad);
        } else {
            let pad = 0.05 * (hi - lo);
            lo = if include_zero && lo == 0.0 { 0.0 } else { lo - pad };
            hi += pad;
        }
        Axis { lo, hi, log }
    }

    fn frac(&self, v: f64) -> f64 {
        if self.log {
            (v.log10() - self.lo.log10()) / (self.hi.log10() - self.lo.log10())
        } else {
            (v - self.lo) / (self.hi - self.lo)
        }
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.log10().round() as i32, self.hi.log10().round() as i32);
            let step = ((b - a) as usize).div_ceil(8).max(1);
            return (a..=b).step_by(step).map(|k| 10f64.powi(k)).collect();
        }
        let raw = (self.hi - self.lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
        let mut t = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        while t <= self.hi + 1e-9 * step {
            out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
            t += step;
        }
        out
    }
}

pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".into()
    } else if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.0e}")
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    pub fn to_svg(&self) -> String {
        let has_bars = self.series.iter().any(|s| !s.bars.is_empty());
        let xs = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0).chain(s.bars.iter().flat_map(|b| [b.0, b.1])));
        let ys = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1).chain(s.bars.iter().map(|b| b.2)));
        let ax = Axis::fit(xs, self.log_x, false);
        let ay = Axis::fit(ys, self.log_y, has_bars);
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |v: f64| LEFT + ax.frac(v) * pw;
        let sy = |v: f64| TOP + (1.0 - ay.frac(v)) * ph;
        let ok = |x: f64, y: f64| x.is_finite() && y.is_finite() && (!ax.log || x > 0.0) && (!ay.log || y > 0.0);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, esc(&self.title));
        let _ = writeln!(s, r#"<clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath>"#);
        let _ = writeln!(s, r##"<g clip-path="url(#plot)">"##);
        for series in &self.series {
            for &(l, r, h) in &series.bars {
                if !(ok(l, h.max(f64::MIN_POSITIVE)) && ok(r, h.max(f64::MIN_POSITIVE))) {
                    continue;
                }
                let base = if ay.log { ay.lo } else { 0.0 };
                let (x0, x1, y0, y1) = (sx(l), sx(r), sy(h), sy(base));
                let _ = writeln!(
                    s,
                    r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{}" fill-opacity="0.45" stroke="{}" stroke-width="0.5"/>"#,
                    (x1 - x0).max(0.0),
                    (y1 - y0).max(0.0),
                    series.color,
                    series.color
                );
            }
            let pts: Vec<(f64, f64)> = series.points.iter().copied().filter(|&(x, y)| ok(x, y)).collect();
            match series.style {
                Style::Line | Style::Dashed if pts.len() > 1 => {
                    let d: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                    let dash = if series.style == Style::Dashed { r#" stroke-dasharray="6,4""# } else { "" };
                    let _ = writeln!(
                        s,
                        r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.6"{dash}/>"#,
                        d.join(" "),
                        series.color
                    );
                }
                _ => {
                    for &(x, y) in &pts {
                        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#, sx(x), sy(y), series.color);
                    }
                }
            }
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black" stroke-width="1"/>"#
        );
        for t in ax.ticks() {
            let x = sx(t);
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, fmt_num(t));
        }
        for t in ay.ticks() {
            let y = sy(t);
            let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0);
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 4.0, fmt_num(t));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 14.0, esc(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
            TOP + ph / 2.0,
            esc(&self.y_label)
        );
        for (i, series) in self.series.iter().enumerate().filter(|(_, s)| !s.label.is_empty()) {
            let y = TOP + 16.0 + 16.0 * i as f64;
            let x = W - RIGHT - 150.0;
            let _ = writeln!(s, r#"<rect x="{x}" y="{}" width="14" height="4" fill="{}"/>"#, y - 4.0, series.color);
            let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, x + 20.0, esc(&series.label));
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_axis_ticks_are_decades() {
        let a = Axis::fit([0.3, 40.0].into_iter(), true, false);
        assert_eq!(a.ticks(), vec![0.1, 1.0, 10.0, 100.0]);
    }

    #[test]
    fn linear_ticks_cover_range() {
        let a = Axis { lo: -0.2, hi: 1.1, log: false };
        let t = a.ticks();
        assert_eq!(t.first().copied(), Some(0.0));
        assert!(t.iter().all(|v| *v >= a.lo && *v <= a.hi));
    }

    #[test]
    fn svg_is_well_formed_text() {
        let p = Plot {
            title: "a < b".into(),
            x_label: "τ (s)".into(),
            y_label: "MSD (nm²)".into(),
            log_x: true,
            log_y: true,
            series: vec![Series::new("data", PALETTE[0], Style::Markers, vec![(0.1, 1.0), (1.0, 10.0), (0.0, 5.0)])],
        };
        let svg = p.to_svg();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<circle").count(), 2);
    }
}
