//! Minimal hand-emitted SVG plots for envelope tables. Diagnostic only:
//! first numeric column on x, second on y, config digest in metadata.

use super::ResultEnvelope;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Line,
    Scatter,
    LogLog,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

fn parse_table(csv: &str) -> Result<(String, String, Vec<(f64, f64)>)> {
    let mut lines = csv.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::EmptyTable("missing header".to_string()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let mut rows = Vec::new();
    let mut xi = None;
    let mut yi = None;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if xi.is_none() {
            // First data row decides which two columns are numeric.
            let numeric: Vec<usize> = fields
                .iter()
                .enumerate()
                .filter(|(_, f)| f.parse::<f64>().is_ok())
                .map(|(i, _)| i)
                .collect();
            if numeric.len() < 2 {
                return Err(Error::invalid(
                    "table needs two numeric columns to plot".to_string(),
                ));
            }
            xi = Some(numeric[0]);
            yi = Some(numeric[1]);
        }
        let (xi, yi) = (xi.unwrap(), yi.unwrap());
        let x: f64 = fields
            .get(xi)
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::invalid(format!("bad row: {line}")))?;
        let y: f64 = fields
            .get(yi)
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::invalid(format!("bad row: {line}")))?;
        rows.push((x, y));
    }
    if rows.is_empty() {
        return Err(Error::EmptyTable("no data rows".to_string()));
    }
    let x_label = columns.get(xi.unwrap()).unwrap_or(&"x").to_string();
    let y_label = columns.get(yi.unwrap()).unwrap_or(&"y").to_string();
    Ok((x_label, y_label, rows))
}

/// Render one table of the envelope as a standalone SVG document.
pub fn plot(envelope: &ResultEnvelope, table: &str, kind: PlotKind) -> Result<String> {
    let csv = envelope
        .tables
        .get(table)
        .ok_or_else(|| Error::EmptyTable(format!("no table named {table}")))?;
    let (x_label, y_label, mut rows) = parse_table(csv)?;
    if kind == PlotKind::LogLog {
        rows.retain(|&(x, y)| x > 0.0 && y > 0.0);
        if rows.is_empty() {
            return Err(Error::EmptyTable(
                "no positive data for log-log axes".to_string(),
            ));
        }
        for r in &mut rows {
            r.0 = r.0.log10();
            r.1 = r.1.log10();
        }
    }
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &rows {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x_min) / (x_max - x_min) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y_min) / (y_max - y_min) * (HEIGHT - 2.0 * MARGIN);

    let mut doc = String::new();
    doc.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    doc.push_str(&format!(
        "  <metadata>config_digest={} table={} kind={:?}</metadata>\n",
        envelope.config_digest, table, kind
    ));
    doc.push_str("  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // Axes.
    doc.push_str(&format!(
        "  <line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    ));
    doc.push_str(&format!(
        "  <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN
    ));
    // Range labels and axis names.
    doc.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-size=\"12\">{:.4}</text>\n",
        MARGIN,
        HEIGHT - MARGIN + 16.0,
        x_min
    ));
    doc.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{:.4}</text>\n",
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 16.0,
        x_max
    ));
    doc.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-size=\"12\">{:.4}</text>\n",
        4.0,
        HEIGHT - MARGIN,
        y_min
    ));
    doc.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-size=\"12\">{:.4}</text>\n",
        4.0,
        MARGIN + 4.0,
        y_max
    ));
    doc.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        HEIGHT - 12.0,
        x_label
    ));
    doc.push_str(&format!(
        "  <text x=\"14\" y=\"{}\" font-size=\"13\" transform=\"rotate(-90 14 {})\">{}</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        y_label
    ));

    match kind {
        PlotKind::Scatter => {
            for &(x, y) in &rows {
                doc.push_str(&format!(
                    "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"steelblue\"/>\n",
                    sx(x),
                    sy(y)
                ));
            }
        }
        PlotKind::Line | PlotKind::LogLog => {
            let points: Vec<String> = rows
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            doc.push_str(&format!(
                "  <polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                points.join(" ")
            ));
        }
    }
    doc.push_str("</svg>\n");
    Ok(doc)
}
