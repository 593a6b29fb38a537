//! Minimal self-contained SVG charts.

use std::fmt::Write as _;

use crate::trajectory::{Embedding, Labeling};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let range = |v: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        Self {
            x: range(&mut xs.clone()),
            y: range(&mut ys.clone()),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    s
}

fn legend(s: &mut String, names: &[String]) {
    for (i, name) in names.iter().enumerate() {
        let y = MARGIN + 14.0 + 16.0 * i as f64;
        let x = WIDTH - MARGIN - 140.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{y}" font-family="sans-serif" font-size="12">{}</text>"#,
            y - 9.0,
            PALETTE[i % PALETTE.len()],
            x + 14.0,
            escape(name)
        );
    }
}

/// Scatter of the first two embedding coordinates, one `<circle>` per row,
/// colored by `labels` (a 1-D embedding is drawn on a horizontal line).
pub fn scatter_svg(e: &Embedding, labels: &Labeling, names: &[String], title: &str) -> String {
    let xy: Vec<(f64, f64)> = (0..e.rows())
        .map(|i| {
            let r = e.row(i);
            (r[0], r.get(1).copied().unwrap_or(0.0))
        })
        .collect();
    let frame = Frame::fit(xy.iter().map(|p| p.0), xy.iter().map(|p| p.1));
    let mut s = open(title);
    for (i, (x, y)) in xy.iter().enumerate() {
        let c = labels.labels().get(i).copied().unwrap_or(0);
        let _ = writeln!(
            s,
            r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="2.5" fill="{}" fill-opacity="0.7"/>"#,
            frame.px(*x),
            frame.py(*y),
            PALETTE[c % PALETTE.len()]
        );
    }
    legend(&mut s, names);
    s.push_str("</svg>\n");
    s
}

/// One polyline with point markers per series.
pub fn line_svg(series: &[(String, Vec<(f64, f64)>)], title: &str, x_label: &str, y_label: &str) -> String {
    let all = series.iter().flat_map(|(_, pts)| pts.iter());
    let frame = Frame::fit(all.clone().map(|p| p.0), all.map(|p| p.1));
    let mut s = open(title);
    for (i, (_, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                frame.px(x),
                frame.py(y)
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    for (edge, v) in [(frame.x.0, "min"), (frame.x.1, "max")] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="10" class="{v}">{edge}</text>"#,
            frame.px(edge),
            HEIGHT - MARGIN + 14.0
        );
    }
    let names: Vec<String> = series.iter().map(|(n, _)| n.clone()).collect();
    legend(&mut s, &names);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::EmbeddingKind;

    #[test]
    fn one_marker_per_point() {
        let e = Embedding::new(3, 2, vec![0.0, 0.0, 1.0, 2.0, 3.0, -1.0], EmbeddingKind::Tsne).unwrap();
        let l = Labeling::new(vec![0, 1, 1], 2).unwrap();
        let svg = scatter_svg(&e, &l, &["a".into(), "b<c".into()], "t");
        assert_eq!(svg.matches(r#"class="point""#).count(), 3);
        assert!(svg.contains("b&lt;c"));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn flat_series_do_not_divide_by_zero() {
        let svg = line_svg(&[("s".into(), vec![(2.0, 1.0), (3.0, 1.0)])], "t", "k", "v");
        assert!(!svg.contains("NaN"));
    }
}
