//! Methods × metrics summary: document metrics followed by context metrics,
//! with `NA` where a method predicts no context.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{MetricSpec, MetricsReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Documents,
    Contexts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub documents: Option<MetricsReport>,
    pub contexts: Option<MetricsReport>,
}

fn cell(report: Option<&MetricsReport>, metric: &MetricSpec) -> String {
    match report.and_then(|r| r.get(metric)) {
        Some(v) => format!("{:.2}", v * 100.0),
        None => "NA".to_string(),
    }
}

/// Aligned plain-text table; values are percentages with two decimals.
pub fn render_report_table(
    rows: &[ReportRow],
    doc_metrics: &[MetricSpec],
    ctx_metrics: &[MetricSpec],
) -> String {
    let mut header = vec!["method".to_string()];
    header.extend(doc_metrics.iter().map(MetricSpec::label));
    header.extend(ctx_metrics.iter().map(|m| format!("ctx {}", m.label())));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            let mut cells = vec![row.method.clone()];
            cells.extend(doc_metrics.iter().map(|m| cell(row.documents.as_ref(), m)));
            cells.extend(ctx_metrics.iter().map(|m| cell(row.contexts.as_ref(), m)));
            cells
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            std::iter::once(&header)
                .chain(&body)
                .map(|r| r[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for r in std::iter::once(&header).chain(&body) {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, v)| {
                if c == 0 {
                    format!("{v:<w$}", w = widths[c])
                } else {
                    format!("{v:>w$}", w = widths[c])
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

#[derive(Serialize)]
struct ReportRecord<'a> {
    method: &'a str,
    target: Target,
    metric: String,
    value: Option<f64>,
}

/// One JSON line per (method, target, metric); `value` is null when the
/// method has no run for that target.
pub fn render_report_jsonl(
    rows: &[ReportRow],
    doc_metrics: &[MetricSpec],
    ctx_metrics: &[MetricSpec],
) -> String {
    let mut out = String::new();
    for row in rows {
        let targets = [
            (Target::Documents, row.documents.as_ref(), doc_metrics),
            (Target::Contexts, row.contexts.as_ref(), ctx_metrics),
        ];
        for (target, report, metrics) in targets {
            for m in metrics {
                let record = ReportRecord {
                    method: &row.method,
                    target,
                    metric: m.to_string(),
                    value: report.and_then(|r| r.get(m)),
                };
                out.push_str(&serde_json::to_string(&record).expect("report record serializes"));
                out.push('\n');
            }
        }
    }
    out
}
