//! Minimal hand-written SVG line plots.
//!
//! Axis policy: the range is the data range widened to whole decades on log
//! axes and to multiples of a 1-2-5 step on linear axes; an empty plot gets
//! the unit range. Output depends only on the data.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// Free text lines printed under the legend.
    pub notes: Vec<String>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
    ticks: Vec<(f64, String)>,
}

impl Axis {
    fn new(log: bool, vals: &[f64]) -> Axis {
        let t: Vec<f64> = vals
            .iter()
            .filter(|v| v.is_finite() && (!log || **v > 0.0))
            .map(|&v| if log { v.log10() } else { v })
            .collect();
        let (mut lo, mut hi) = if t.is_empty() {
            (0.0, 1.0)
        } else {
            t.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
        };
        if log {
            lo = lo.floor();
            hi = hi.ceil();
            if hi <= lo {
                hi = lo + 1.0;
            }
            let stride = ((hi - lo) / 6.0).ceil().max(1.0) as i64;
            let ticks = (lo as i64..=hi as i64)
                .filter(|k| (k - lo as i64) % stride == 0)
                .map(|k| (k as f64, format!("1e{k}")))
                .collect();
            return Axis { log, lo, hi, ticks };
        }
        if hi <= lo {
            let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
            lo -= pad;
            hi += pad;
        }
        let raw = (hi - lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        lo = (lo / step).floor() * step;
        hi = (hi / step).ceil() * step;
        let decimals = (-step.log10().floor()).max(0.0) as usize;
        let count = ((hi - lo) / step).round() as i64;
        let ticks = (0..=count)
            .map(|k| {
                let v = lo + k as f64 * step;
                let v = if v.abs() < 1e-12 * step { 0.0 } else { v };
                (v, format!("{v:.decimals$}"))
            })
            .collect();
        Axis { log, lo, hi, ticks }
    }

    fn map(&self, v: f64, a: f64, b: f64) -> Option<f64> {
        if !v.is_finite() || (self.log && v <= 0.0) {
            return None;
        }
        let t = if self.log { v.log10() } else { v };
        Some(a + (t - self.lo) / (self.hi - self.lo) * (b - a))
    }
}

impl Plot {
    pub fn to_svg(&self) -> String {
        let xs: Vec<f64> = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
        let ys: Vec<f64> = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).collect();
        let ax = Axis::new(self.log_x, &xs);
        let ay = Axis::new(self.log_y, &ys);
        let (x0, x1) = (LEFT, W - RIGHT);
        let (y0, y1) = (H - BOTTOM, TOP);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            (x0 + x1) / 2.0,
            esc(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        );
        for (v, label) in &ax.ticks {
            let px = x0 + (v - ax.lo) / (ax.hi - ax.lo) * (x1 - x0);
            let _ = writeln!(s, r##"<line x1="{px:.2}" y1="{y1}" x2="{px:.2}" y2="{y0}" stroke="#e0e0e0"/>"##);
            let _ = writeln!(s, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{label}</text>"#, y0 + 16.0);
        }
        for (v, label) in &ay.ticks {
            let py = y0 + (v - ay.lo) / (ay.hi - ay.lo) * (y1 - y0);
            let _ = writeln!(s, r##"<line x1="{x0}" y1="{py:.2}" x2="{x1}" y2="{py:.2}" stroke="#e0e0e0"/>"##);
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#, x0 - 6.0, py + 4.0);
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            H - 18.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            esc(&self.y_label)
        );
        if xs.is_empty() {
            let _ = writeln!(
                s,
                r##"<text x="{}" y="{}" text-anchor="middle" fill="#888">no data</text>"##,
                (x0 + x1) / 2.0,
                (y0 + y1) / 2.0
            );
        }
        for (k, ser) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let pts: Vec<(f64, f64)> = ser
                .points
                .iter()
                .filter_map(|&(x, y)| Some((ax.map(x, x0, x1)?, ay.map(y, y0, y1)?)))
                .collect();
            if pts.len() > 1 {
                let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                    path.join(" ")
                );
            }
            for (x, y) in &pts {
                let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
            }
            let ly = TOP + 10.0 + 16.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
                x1 + 10.0,
                x1 + 28.0
            );
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x1 + 32.0, ly + 4.0, esc(&ser.label));
        }
        let base = TOP + 16.0 * self.series.len() as f64 + 24.0;
        for (k, note) in self.notes.iter().enumerate() {
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x1 + 10.0, base + 14.0 * k as f64, esc(note));
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_plot_has_axes() {
        let svg = Plot {
            title: "empty".into(),
            log_x: true,
            log_y: true,
            ..Plot::default()
        }
        .to_svg();
        assert!(svg.contains("no data"));
        assert!(svg.contains("1e0"));
        assert!(!svg.contains("polyline"));
    }

    #[test]
    fn deterministic_and_drops_nonpositive_on_log_axes() {
        let p = Plot {
            title: "a < b".into(),
            log_y: true,
            series: vec![Series {
                label: "s".into(),
                points: vec![(1.0, 1e-3), (2.0, 0.0), (3.0, 1e-5)],
            }],
            notes: vec!["slope 2".into()],
            ..Plot::default()
        };
        let a = p.to_svg();
        assert_eq!(a, p.to_svg());
        assert_eq!(a.matches("<circle").count(), 2);
        assert!(a.contains("a &lt; b"));
        assert!(a.contains("1e-5") && a.contains("1e-3"));
    }

    #[test]
    fn linear_ticks_are_round() {
        let ax = Axis::new(false, &[0.13, 0.87]);
        assert_eq!(ax.lo, 0.0);
        assert!((ax.hi - 1.0).abs() < 1e-12);
        assert_eq!(ax.ticks.first().unwrap().1, "0.0");
    }
}
