//! Bare-bones SVG plots. Best effort only; the CSV and JSON files carry the data.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * PAD)
    }
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    let pad = 0.05 * (hi - lo).max(1e-12);
    (lo - pad, hi + pad)
}

fn open(title: &str, xlabel: &str, ylabel: &str) -> String {
    let mut s = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="20" text-anchor="middle">{title}</text>
<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>
<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{ylabel}</text>
"#,
        W / 2.0,
        W / 2.0,
        H - 12.0,
        H / 2.0,
        H / 2.0
    );
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    s
}

/// `(u, [(T, var)], slope, intercept)`.
pub type Series = (f64, Vec<(f64, f64)>, f64, f64);

/// Log-log variance against horizon: one point series and one fitted line per threshold.
pub fn scaling(series: &[Series]) -> String {
    let xs = series.iter().flat_map(|s| s.1.iter().map(|p| p.0.ln()));
    let ys = series.iter().flat_map(|s| s.1.iter().map(|p| p.1.ln()));
    let frame = Frame { x: span(xs), y: span(ys) };
    let mut s = open("variance scaling", "log T", "log Var");
    for (i, (u, points, slope, intercept)) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        for &(t, v) in points {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{c}"/>"#, frame.px(t.ln()), frame.py(v.ln()));
        }
        let (a, b) = frame.x;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{c}"/>"#,
            frame.px(a),
            frame.py(intercept + slope * a),
            frame.px(b),
            frame.py(intercept + slope * b)
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{c}">u={u} slope={slope:.3}</text>"#, PAD + 8.0, PAD + 16.0 * (i + 1) as f64);
    }
    s.push_str("</svg>\n");
    s
}

fn counts(x: &[f64], lo: f64, width: f64, bins: usize) -> Vec<f64> {
    let mut c = vec![0.0; bins];
    for v in x {
        let b = ((v - lo) / width).floor();
        if b >= 0.0 && (b as usize) < bins {
            c[b as usize] += 1.0;
        }
    }
    let norm = x.len() as f64 * width;
    c.iter().map(|v| v / norm).collect()
}

/// Density histogram of `x` with either a second sample or the standard normal overlaid.
pub fn histogram(x: &[f64], other: Option<&[f64]>) -> String {
    const BINS: usize = 30;
    let (lo, hi) = span(x.iter().chain(other.unwrap_or(&[])).copied());
    let width = (hi - lo) / BINS as f64;
    let main = counts(x, lo, width, BINS);
    let overlay: Vec<(f64, f64)> = match other {
        Some(o) => counts(o, lo, width, BINS).into_iter().enumerate().map(|(i, d)| (lo + (i as f64 + 0.5) * width, d)).collect(),
        None => (0..=200)
            .map(|i| {
                let t = lo + (hi - lo) * i as f64 / 200.0;
                (t, (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt())
            })
            .collect(),
    };
    let top = main.iter().copied().chain(overlay.iter().map(|p| p.1)).fold(0.0, f64::max);
    let frame = Frame { x: (lo, hi), y: (0.0, top * 1.05 + 1e-12) };
    let mut s = open("standardized functional", "value", "density");
    for (i, d) in main.iter().enumerate() {
        let x0 = frame.px(lo + i as f64 * width);
        let x1 = frame.px(lo + (i + 1) as f64 * width);
        let _ = writeln!(
            s,
            r#"<rect x="{x0:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}" fill-opacity="0.5"/>"#,
            frame.py(*d),
            x1 - x0,
            frame.py(0.0) - frame.py(*d),
            COLORS[0]
        );
    }
    let path: Vec<String> = overlay.iter().map(|&(t, d)| format!("{:.2},{:.2}", frame.px(t), frame.py(d))).collect();
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#, path.join(" "), COLORS[1]);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documents_are_closed() {
        let s = scaling(&[(2.0, vec![(64.0, 1.0), (128.0, 2.5), (256.0, 7.0)], 1.4, -5.0)]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<circle").count(), 3);
        let h = histogram(&[0.1, -0.3, 1.2, 0.4], None);
        assert!(h.contains("<polyline"));
        let h2 = histogram(&[0.1, -0.3], Some(&[0.5, 0.0]));
        assert!(h2.trim_end().ends_with("</svg>"));
    }
}
