//! Minimal standalone SVG charts: reliability diagrams and metric series.
//! Output is self-contained (no scripts, fonts or external references).

use std::fmt::Write;

use crate::metrics::BinnedReliability;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Maps data coordinates onto the plot area.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn open(svg: &mut String, title: &str) {
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = write!(
        svg,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/><text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(svg: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let (x0, x1) = (frame.px(frame.x.0), frame.px(frame.x.1));
    let (y0, y1) = (frame.py(frame.y.0), frame.py(frame.y.1));
    let _ = write!(
        svg,
        r##"<path d="M{x0:.2} {y1:.2} V{y0:.2} H{x1:.2}" fill="none" stroke="#333"/>"##
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = frame.x.0 + t * (frame.x.1 - frame.x.0);
        let yv = frame.y.0 + t * (frame.y.1 - frame.y.0);
        let _ = write!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            frame.px(xv),
            y0 + 14.0,
            tick(xv),
            x0 - 4.0,
            frame.py(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = write!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text><text x="12" y="{:.2}" text-anchor="middle" transform="rotate(-90 12 {:.2})">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 8.0,
        escape(x_label),
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Mean outcome against mean confidence per nonempty bin, with the diagonal
/// of perfect calibration. Marker area scales with the bin's share.
pub fn reliability_svg(binned: &BinnedReliability, title: &str) -> String {
    let frame = Frame {
        x: (0.0, 1.0),
        y: (0.0, 1.0),
    };
    let mut svg = String::new();
    open(&mut svg, title);
    axes(&mut svg, &frame, "mean confidence", "observed acceptance");
    let _ = write!(
        svg,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
        frame.px(0.0),
        frame.py(0.0),
        frame.px(1.0),
        frame.py(1.0)
    );
    let points: Vec<(f64, f64, f64)> = binned
        .nonempty()
        .map(|(_, b)| {
            let share = b.count as f64 / binned.total.max(1) as f64;
            (b.sum_confidence / b.count as f64, b.sum_outcome / b.count as f64, share)
        })
        .collect();
    if points.len() > 1 {
        let d: Vec<String> = points
            .iter()
            .enumerate()
            .map(|(i, (x, y, _))| {
                format!(
                    "{}{:.2} {:.2}",
                    if i == 0 { 'M' } else { 'L' },
                    frame.px(*x),
                    frame.py(*y)
                )
            })
            .collect();
        let _ = write!(
            svg,
            r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            d.join(" "),
            PALETTE[0]
        );
    }
    for (x, y, share) in &points {
        let _ = write!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="{}"/>"#,
            frame.px(*x),
            frame.py(*y),
            2.5 + 6.0 * share.sqrt(),
            PALETTE[0]
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Line chart of one or more series with a legend.
pub fn series_svg(series: &[Series], title: &str, x_label: &str, y_label: &str) -> String {
    let all = || {
        series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|p| p.0.is_finite() && p.1.is_finite())
    };
    let (mut x_min, mut x_max, mut y_min, mut y_max) = all().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if !x_min.is_finite() {
        (x_min, x_max, y_min, y_max) = (0.0, 1.0, 0.0, 1.0);
    }
    if x_max <= x_min {
        x_max = x_min + 1.0;
    }
    if y_max <= y_min {
        y_max = y_min + 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    let frame = Frame {
        x: (x_min, x_max),
        y: (y_min - pad, y_max + pad),
    };
    let mut svg = String::new();
    open(&mut svg, title);
    axes(&mut svg, &frame, x_label, y_label);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let d: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .enumerate()
            .map(|(j, (x, y))| {
                format!(
                    "{}{:.2} {:.2}",
                    if j == 0 { 'M' } else { 'L' },
                    frame.px(*x),
                    frame.py(*y)
                )
            })
            .collect();
        if !d.is_empty() {
            let _ = write!(
                svg,
                r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#,
                d.join(" ")
            );
        }
        let ly = 36.0 + 14.0 * i as f64;
        let _ = write!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="10" height="3" fill="{color}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            WIDTH - MARGIN - 110.0,
            ly - 4.0,
            WIDTH - MARGIN - 96.0,
            ly,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::bin;

    #[test]
    fn reliability_svg_is_well_formed() {
        let b = bin(&[0.1, 0.15, 0.5, 0.9], &[0, 0, 1, 1], 10).unwrap();
        let svg = reliability_svg(&b, "java <uncalibrated> & co");
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("circle")).count(), 3);
        assert!(!svg.contains("href"));
    }

    #[test]
    fn series_svg_handles_degenerate_input() {
        let svg = series_svg(&[], "empty", "window", "ece");
        roxmltree::Document::parse(&svg).unwrap();
        let flat = Series {
            name: "u1".into(),
            points: vec![(0.0, 0.2), (1.0, 0.2), (2.0, f64::NAN)],
        };
        let svg = series_svg(&[flat], "flat", "window", "ece");
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("path")).count(), 2);
    }
}
