//! Minimal SVG line plots and histograms. Coordinates are printed with fixed
//! precision so the output is byte-stable.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Bin edges and per-bin densities.
pub struct Histogram {
    pub name: String,
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn new(name: &str, values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0usize; bins];
        for &v in values {
            if v.is_finite() && v >= lo && v <= hi {
                let b = (((v - lo) / width) as usize).min(bins - 1);
                counts[b] += 1;
            }
        }
        let scale = 1.0 / (values.len().max(1) as f64 * width);
        Self {
            name: name.to_string(),
            edges,
            density: counts.iter().map(|&c| c as f64 * scale).collect(),
        }
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, stamp: &str, title: &str, frame: &Frame, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, "<!-- {} -->", escape(stamp));
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<path d="M{l:.1},{t:.1} L{l:.1},{b:.1} L{r:.1},{b:.1}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let fx = frame.x0 + (frame.x1 - frame.x0) * i as f64 / 4.0;
        let fy = frame.y0 + (frame.y1 - frame.y0) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            frame.px(fx),
            b + 16.0,
            tick(fx)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            l - 6.0,
            frame.py(fy) + 4.0,
            tick(fy)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn legend(out: &mut String, names: impl Iterator<Item = String>) {
    for (i, name) in names.enumerate() {
        let y = MARGIN + 16.0 * i as f64;
        let x = WIDTH - MARGIN - 150.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.1}" y="{:.1}" width="12" height="12" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            y - 10.0,
            COLORS[i % COLORS.len()],
            x + 18.0,
            y,
            escape(&name)
        );
    }
}

pub fn line_plot(stamp: &str, title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let pts = || series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (x0, x1) = padded(
        pts().map(|p| p.0).fold(f64::INFINITY, f64::min),
        pts().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = padded(
        pts().map(|p| p.1).fold(f64::INFINITY, f64::min),
        pts().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    );
    let frame = Frame { x0, x1, y0, y1 };
    let mut out = String::new();
    header(&mut out, stamp, title, &frame, xlabel, ylabel);
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            coords.join(" ")
        );
        for c in &coords {
            let (cx, cy) = c.split_once(',').expect("pair");
            let _ = writeln!(out, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
        }
    }
    legend(&mut out, series.iter().map(|s| s.name.clone()));
    out.push_str("</svg>\n");
    out
}

/// Overlaid step histograms; `log_y` plots `log10` of the density, skipping empty bins.
pub fn histogram_plot(stamp: &str, title: &str, xlabel: &str, hists: &[Histogram], log_y: bool) -> String {
    let tf = |d: f64| if log_y { d.log10() } else { d };
    let ys = || {
        hists
            .iter()
            .flat_map(|h| h.density.iter().copied())
            .filter(|&d| !log_y || d > 0.0)
            .map(tf)
    };
    let x0 = hists.iter().map(|h| h.edges[0]).fold(f64::INFINITY, f64::min);
    let x1 = hists
        .iter()
        .map(|h| *h.edges.last().expect("edges"))
        .fold(f64::NEG_INFINITY, f64::max);
    let ylo = if log_y { ys().fold(f64::INFINITY, f64::min) } else { 0.0 };
    let (y0, y1) = padded(ylo, ys().fold(f64::NEG_INFINITY, f64::max));
    let frame = Frame {
        x0,
        x1,
        y0: if log_y { y0 } else { 0.0 },
        y1,
    };
    let mut out = String::new();
    let ylabel = if log_y { "log10 density" } else { "density" };
    header(&mut out, stamp, title, &frame, xlabel, ylabel);
    for (i, h) in hists.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        for (b, &dens) in h.density.iter().enumerate() {
            if log_y && dens <= 0.0 {
                continue;
            }
            let (l, r, y) = (frame.px(h.edges[b]), frame.px(h.edges[b + 1]), frame.py(tf(dens)));
            let _ = write!(d, "M{l:.2},{y:.2} L{r:.2},{y:.2} ");
        }
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            d.trim_end()
        );
    }
    legend(&mut out, hists.iter().map(|h| h.name.clone()));
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_integrates_to_one() {
        let values: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let h = Histogram::new("u", &values, 0.0, 1.0, 10);
        let total: f64 = h.density.iter().map(|d| d * 0.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plots_are_well_formed_and_stable() {
        let s = [Series {
            name: "a<b".into(),
            points: vec![(1.0, 2.0), (2.0, 1.0), (3.0, f64::NAN)],
        }];
        let a = line_plot("stamp", "t", "x", "y", &s);
        assert_eq!(a, line_plot("stamp", "t", "x", "y", &s));
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert!(a.contains("a&lt;b") && !a.contains("NaN"));

        let h = Histogram::new("h", &[0.1, 0.2, 0.2], 0.0, 1.0, 4);
        let svg = histogram_plot("stamp", "t", "x", &[h], true);
        assert!(svg.contains("<path d=\"M") && !svg.contains("inf"));
    }
}
