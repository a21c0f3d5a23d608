//! Minimal hand-rolled SVG output: broken-line signature plots and a
//! confusion-matrix heatmap. Deterministic string assembly, no external
//! renderer.

use std::fmt::Write;

use dirmix_core::classify::ConfusionMatrix;
use dirmix_core::csvio::SignatureRow;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Broken-line plot of component signatures: one polyline per component,
/// colored by source, coordinates on the x-axis.
pub fn signatures_svg(names: &[String], rows: &[SignatureRow]) -> String {
    let (width, height) = (700.0, 420.0);
    let (left, right, top, bottom) = (60.0, 160.0, 30.0, 50.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let d = names.len().max(2);
    let y_max = rows
        .iter()
        .flat_map(|r| r.values.iter().copied())
        .fold(0.1f64, f64::max);

    let x_at = |i: usize| left + plot_w * i as f64 / (d - 1) as f64;
    let y_at = |v: f64| top + plot_h * (1.0 - (v / y_max).clamp(0.0, 1.0));

    let mut sources: Vec<&str> = Vec::new();
    for row in rows {
        if !sources.contains(&row.source.as_str()) {
            sources.push(&row.source);
        }
    }

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    );
    // Axes.
    let _ = write!(
        svg,
        "<line x1=\"{left}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333\"/>\n\
         <line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{}\" stroke=\"#333\"/>\n",
        top + plot_h,
        left + plot_w,
        top + plot_h,
        top + plot_h,
    );
    // Horizontal gridlines and y tick labels.
    for t in 0..=4 {
        let v = y_max * t as f64 / 4.0;
        let y = y_at(v);
        let _ = write!(
            svg,
            "<line x1=\"{left}\" y1=\"{y:.1}\" x2=\"{}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n\
             <text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{v:.2}</text>\n",
            left + plot_w,
            left - 6.0,
            y + 4.0,
        );
    }
    // Coordinate labels.
    for (i, name) in names.iter().enumerate() {
        let _ = write!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            x_at(i),
            top + plot_h + 18.0,
            escape(name),
        );
    }
    // One polyline per signature.
    for row in rows {
        let color = PALETTE[sources
            .iter()
            .position(|s| *s == row.source)
            .unwrap_or(0)
            % PALETTE.len()];
        let points: Vec<String> = row
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.1},{:.1}", x_at(i), y_at(v)))
            .collect();
        let _ = write!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" \
             opacity=\"0.85\"/>\n",
            points.join(" "),
        );
    }
    // Legend.
    for (s, source) in sources.iter().enumerate() {
        let y = top + 16.0 * s as f64;
        let color = PALETTE[s % PALETTE.len()];
        let _ = write!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"{color}\" \
             stroke-width=\"3\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
            width - right + 12.0,
            width - right + 36.0,
            width - right + 42.0,
            y + 4.0,
            escape(source),
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Heatmap of the confusion matrix with counts printed in each cell.
pub fn confusion_svg(matrix: &ConfusionMatrix) -> String {
    let labels = matrix.labels();
    let counts = matrix.counts();
    let k = labels.len();
    let cell = 56.0;
    let (left, top) = (120.0, 70.0);
    let width = left + cell * k as f64 + 20.0;
    let height = top + cell * k as f64 + 20.0;
    let max = counts.iter().flatten().copied().max().unwrap_or(1).max(1) as f64;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n\
         <text x=\"{left}\" y=\"18\" font-weight=\"bold\">truth (rows) vs prediction \
         (columns)</text>\n"
    );
    for (c, label) in labels.iter().enumerate() {
        let _ = write!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            left + cell * (c as f64 + 0.5),
            top - 10.0,
            escape(label),
        );
    }
    for (r, label) in labels.iter().enumerate() {
        let _ = write!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            left - 8.0,
            top + cell * (r as f64 + 0.5) + 4.0,
            escape(label),
        );
        for (c, &count) in counts[r].iter().enumerate() {
            let t = count as f64 / max;
            // White through mid blue; text flips to white on dark cells.
            let shade = (255.0 - t * 185.0).round() as u8;
            let (x, y) = (left + cell * c as f64, top + cell * r as f64);
            let _ = write!(
                svg,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell}\" height=\"{cell}\" \
                 fill=\"rgb({shade},{shade},255)\" stroke=\"#999\"/>\n\
                 <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"{}\">{count}</text>\n",
                x + cell / 2.0,
                y + cell / 2.0 + 4.0,
                if t > 0.6 { "#fff" } else { "#222" },
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}
