//! Minimal SVG figures: a field raster and log-scale line plots.

use std::fmt::Write;

use crate::diagnostics::ReplicateStats;
use crate::grid::GridField;

const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// A named polyline.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
        }
    }

    /// Mean relative error against iteration.
    pub fn from_stats(name: &str, stats: &[ReplicateStats]) -> Self {
        let pts = stats
            .iter()
            .filter_map(|s| s.rel_err.map(|e| (s.iter as f64, e.mean)))
            .collect();
        Self::new(name, pts)
    }
}

// blue -> white -> red
fn colour(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let s = t / 0.5;
        (40.0 + 215.0 * s, 80.0 + 175.0 * s, 200.0 + 55.0 * s)
    } else {
        let s = (t - 0.5) / 0.5;
        (255.0, 255.0 - 190.0 * s, 255.0 - 200.0 * s)
    };
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Heat map of a field, one rectangle per node, with the value range in the title.
pub fn raster(field: &GridField, title: &str) -> String {
    let g = *field.grid();
    let v = field.values();
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let side = H - 2.0 * MARGIN;
    let (cw, ch) = (side / g.nx as f64, side / g.ny as f64);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-size="14" text-anchor="middle">{} [{:.3}, {:.3}]</text>"#,
        W / 2.0,
        escape(title),
        lo,
        hi
    );
    let x0 = (W - side) / 2.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let t = (field.get(i, j) - lo) / span;
            // j grows upwards
            let y = MARGIN + side - (j + 1) as f64 * ch;
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                x0 + i as f64 * cw,
                y,
                cw + 0.3,
                ch + 0.3,
                colour(t)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Line plot with a log10 y axis. Non-positive values are dropped.
pub fn line_plot(series: &[Series], title: &str, xlabel: &str, ylabel: &str) -> String {
    let pts = || {
        series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|p| p.1 > 0.0 && p.1.is_finite())
    };
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts() {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y.log10());
        ymax = ymax.max(y.log10());
    }
    if !xmin.is_finite() {
        (xmin, xmax, ymin, ymax) = (0.0, 1.0, -1.0, 0.0);
    }
    if xmax <= xmin {
        xmax = xmin + 1.0;
    }
    ymin = ymin.floor();
    ymax = ymax.ceil().max(ymin + 1.0);
    let px = |x: f64| MARGIN + (x - xmin) / (xmax - xmin) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y.log10() - ymin) / (ymax - ymin) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-size="14" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    let mut d = ymin as i32;
    while d as f64 <= ymax {
        let y = py(10f64.powi(d));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" font-size="10" text-anchor="end">1e{d}</text>"#,
            MARGIN - 4.0,
            y + 3.0
        );
        d += 1;
    }
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{}" font-size="10">{}</text><text x="{}" y="{}" font-size="10" text-anchor="end">{}</text>"#,
        H - MARGIN + 14.0,
        xmin,
        W - MARGIN,
        H - MARGIN + 14.0,
        xmax
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    for (k, ser) in series.iter().enumerate() {
        let c = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.1 > 0.0 && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            );
        }
        let ly = MARGIN + 14.0 + 14.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" font-size="11" fill="{c}" text-anchor="end">{}</text>"#,
            W - MARGIN - 6.0,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;

    #[test]
    fn raster_has_one_cell_per_node() {
        let g = Grid2D::square(4, 1.0).unwrap();
        let f = GridField::new(g, (0..16).map(f64::from).collect()).unwrap();
        let s = raster(&f, "a<b");
        assert_eq!(s.matches("<rect").count(), 16);
        assert!(s.contains("a&lt;b"));
    }

    #[test]
    fn line_plot_skips_nonpositive_values() {
        let s = line_plot(
            &[Series::new("x", vec![(1.0, 1.0), (2.0, 0.0), (3.0, 0.01)])],
            "t",
            "n",
            "e",
        );
        assert_eq!(s.matches("<polyline").count(), 1);
        assert!(s.contains("1e-2"));
    }

    #[test]
    fn empty_plot_is_valid() {
        let s = line_plot(&[], "t", "n", "e");
        assert!(s.ends_with("</svg>\n"));
    }
}
