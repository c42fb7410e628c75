//! Minimal static SVG line plots: mean best-so-far traces with
//! bootstrapped uncertainty bands.

use std::fmt::Write;

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Optional (lo, hi) band around the line.
    pub band: Option<(Vec<f64>, Vec<f64>)>,
}

const W: f64 = 720.0;
const H: f64 = 440.0;
const MARGIN: f64 = 60.0;

fn nice_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let span = hi - lo;
    let raw = span / count as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= count as f64 + 0.5)
        .unwrap_or(mag * 10.0);
    let start = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = start;
    while t <= hi + 1e-12 * span {
        ticks.push(t);
        t += step;
    }
    ticks
}

/// Render series into an SVG document.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &x in &s.xs {
            x_lo = x_lo.min(x);
            x_hi = x_hi.max(x);
        }
        for &y in &s.ys {
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
        }
        if let Some((lo, hi)) = &s.band {
            for &v in lo.iter().chain(hi) {
                y_lo = y_lo.min(v);
                y_hi = y_hi.max(v);
            }
        }
    }
    if !x_lo.is_finite() {
        x_lo = 0.0;
        x_hi = 1.0;
    }
    if !y_lo.is_finite() {
        y_lo = 0.0;
        y_hi = 1.0;
    }
    if y_hi - y_lo < 1e-12 {
        y_hi = y_lo + 1.0;
    }
    let pad = 0.04 * (y_hi - y_lo);
    y_lo -= pad;
    y_hi += pad;

    let sx = move |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (W - 2.0 * MARGIN);
    let sy = move |y: f64| H - MARGIN - (y - y_lo) / (y_hi - y_lo) * (H - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = write!(
        svg,
        r#"<rect width="{W}" height="{H}" fill="white"/><text x="{}" y="24" text-anchor="middle" font-size="16" font-family="sans-serif">{title}</text>"#,
        W / 2.0
    );

    for t in nice_ticks(x_lo, x_hi, 8) {
        let x = sx(t);
        let _ = write!(
            svg,
            r#"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke='gainsboro'/><text x="{x:.1}" y="{}" text-anchor="middle" font-size="11" font-family="sans-serif">{t}</text>"#,
            MARGIN,
            H - MARGIN,
            H - MARGIN + 16.0
        );
    }
    for t in nice_ticks(y_lo, y_hi, 6) {
        let y = sy(t);
        let _ = write!(
            svg,
            r#"<line x1="{}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke='gainsboro'/><text x="{}" y="{y:.1}" text-anchor="end" font-size="11" font-family="sans-serif">{t:.4}</text>"#,
            MARGIN,
            W - MARGIN,
            MARGIN - 6.0
        );
    }
    let _ = write!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    let _ = write!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13" font-family="sans-serif">{x_label}</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = write!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="13" font-family="sans-serif" transform="rotate(-90 16 {})">{y_label}</text>"#,
        H / 2.0,
        H / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        if let Some((lo, hi)) = &s.band {
            let mut path = String::from("M");
            for (k, &x) in s.xs.iter().enumerate() {
                let _ = write!(path, "{:.1},{:.1} ", sx(x), sy(hi[k]));
            }
            for (k, &x) in s.xs.iter().enumerate().rev() {
                let _ = write!(path, "{:.1},{:.1} ", sx(x), sy(lo[k]));
            }
            let _ = write!(
                svg,
                r#"<path d="{path}Z" fill="{}" opacity="0.18" stroke="none"/>"#,
                s.color
            );
        }
        let mut pts = String::new();
        for (k, &x) in s.xs.iter().enumerate() {
            let _ = write!(pts, "{:.1},{:.1} ", sx(x), sy(s.ys[k]));
        }
        let _ = write!(
            svg,
            r#"<polyline points="{pts}" fill="none" stroke="{}" stroke-width="1.6"/>"#,
            s.color
        );
        let ly = MARGIN + 18.0 + 16.0 * i as f64;
        let _ = write!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/><text x="{}" y="{}" font-size="12" font-family="sans-serif">{}</text>"#,
            W - MARGIN - 150.0,
            W - MARGIN - 120.0,
            s.color,
            W - MARGIN - 112.0,
            ly + 4.0,
            s.label
        );
    }
    svg.push_str("</svg>");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn produces_valid_looking_svg() {
        let s = Series {
            label: "trace",
            color: "#1f77b4",
            xs: (0..50).map(|i| i as f64).collect(),
            ys: (0..50).map(|i| (50 - i) as f64).collect(),
            band: None,
        };
        let svg = line_plot("test", "evaluations", "best", &[s]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>"));
        assert!(svg.contains("polyline"));
    }

    #[test]
    fn handles_degenerate_ranges() {
        let s = Series {
            label: "flat",
            color: "#000",
            xs: vec![0.0, 1.0],
            ys: vec![5.0, 5.0],
            band: None,
        };
        let svg = line_plot("flat", "x", "y", &[s]);
        assert!(svg.contains("polyline"));
    }
}
