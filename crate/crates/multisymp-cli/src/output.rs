//! Deterministic emission: CSV with 17 significant digits, pretty JSON,
//! and hand-rolled SVG heatmaps/polylines.

use std::io::Write;

use crate::config::ConfigError;

/// Floats print as `d.dddddddddddddddde±xx`: 17 significant digits, enough
/// to round-trip f64 bit patterns.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct CsvWriter {
    rows: Vec<String>,
}

impl CsvWriter {
    pub fn new(header: &[&str]) -> Self {
        CsvWriter {
            rows: vec![header.join(",")],
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.rows.push(cells.join(","));
    }

    pub fn finish(self) -> String {
        let mut out = self.rows.join("\n");
        out.push('\n');
        out
    }
}

pub fn cell(x: f64) -> String {
    fmt_float(x)
}

/// Writes to the configured path or stdout.
pub fn emit(output: Option<&str>, content: &str) -> Result<(), ConfigError> {
    match output {
        Some(path) => std::fs::write(path, content).map_err(|e| ConfigError {
            message: format!("cannot write {path}: {e}"),
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes()).map_err(|e| ConfigError {
                message: format!("stdout: {e}"),
            })
        }
    }
}

/// A rectangle-per-node heatmap of nonnegative values on an `n1 x n2` grid.
pub fn svg_heatmap(values: &[f64], npts: (usize, usize), title: &str) -> String {
    let (n0, n1) = npts;
    let cell_px = 12usize;
    let width = n0 * cell_px;
    let height = n1 * cell_px;
    let max = values.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{}\" viewBox=\"0 0 {width} {}\">\n",
        height + 20,
        height + 20
    ));
    svg.push_str(&format!(
        "<title>{title}</title>\n<text x=\"2\" y=\"{}\" font-size=\"10\">{title} (max {:.3e})</text>\n",
        height + 14,
        max
    ));
    for i0 in 0..n0 {
        for i1 in 0..n1 {
            let v = values[i0 * n1 + i1];
            let t = (v / max).clamp(0.0, 1.0);
            // white -> red ramp
            let level = (255.0 * (1.0 - t)).round() as u8;
            svg.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{cell_px}\" height=\"{cell_px}\" fill=\"rgb(255,{level},{level})\"/>\n",
                i0 * cell_px,
                (n1 - 1 - i1) * cell_px,
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// A polyline plot of one scalar series against node index.
pub fn svg_polyline(values: &[f64], title: &str) -> String {
    let width = 640.0;
    let height = 320.0;
    let max = values.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min).min(0.0);
    let span = (max - min).max(f64::MIN_POSITIVE);
    let n = values.len().max(2);
    let points: Vec<String> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let x = width * i as f64 / (n - 1) as f64;
            let y = height - height * (v - min) / span;
            format!("{x:.2},{y:.2}")
        })
        .collect();
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{}\" viewBox=\"0 0 {width} {}\">\n<title>{title}</title>\n<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1\" points=\"{}\"/>\n<text x=\"2\" y=\"{}\" font-size=\"10\">{title} (max {max:.3e})</text>\n</svg>\n",
        height + 20.0,
        height + 20.0,
        points.join(" "),
        height + 14.0,
    )
}
