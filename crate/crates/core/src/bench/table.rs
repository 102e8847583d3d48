use serde::Serialize;

use super::latency::{BenchReport, FAMILY_CNN};
use crate::train::EvalReport;

/// One cell of a family × variant table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableEntry {
    pub family: String,
    pub variant: String,
    pub column: String,
    pub value: f64,
    pub display: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub family: String,
    pub variant: String,
    /// Column name → value; `None` where the row has no entry.
    pub cells: Vec<(String, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub text: String,
    pub json: String,
}

/// Latency cells: `ratio` per sequence length, with median and IQR.
pub fn latency_entries(report: &BenchReport) -> Vec<TableEntry> {
    report
        .rows
        .iter()
        .map(|r| {
            let variant = if r.threads == "single" {
                r.variant.clone()
            } else {
                format!("{} ({}-thread)", r.variant, r.threads)
            };
            let ratio = if r.family == FAMILY_CNN && r.threads == "single" { 1.0 } else { r.ratio };
            TableEntry {
                family: r.family.clone(),
                variant,
                column: format!("L={}", r.seq_len),
                value: ratio,
                display: format!(
                    "{ratio:.2}x ({:.2} ms, iqr {:.2})",
                    r.median_ns / 1e6,
                    r.iqr_ns / 1e6
                ),
            }
        })
        .collect()
}

/// Accuracy cells: one column per dataset.
pub fn accuracy_entry(family: &str, variant: &str, dataset: &str, report: &EvalReport) -> TableEntry {
    TableEntry {
        family: family.into(),
        variant: variant.into(),
        column: dataset.into(),
        value: report.accuracy,
        display: format!("{:.2}", 100.0 * report.accuracy),
    }
}

/// Pivots entries into rows (first-appearance order of family × variant)
/// and columns (first-appearance order), as aligned text and JSON lines.
pub fn emit_report_table(entries: &[TableEntry]) -> ReportTable {
    let mut columns: Vec<&str> = Vec::new();
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for e in entries {
        if !columns.contains(&e.column.as_str()) {
            columns.push(&e.column);
        }
        let k = (e.family.as_str(), e.variant.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let find = |k: (&str, &str), c: &str| {
        entries
            .iter()
            .find(|e| e.family == k.0 && e.variant == k.1 && e.column == c)
    };

    let mut grid: Vec<Vec<String>> = vec![["family", "variant"]
        .into_iter()
        .map(String::from)
        .chain(columns.iter().map(|c| c.to_string()))
        .collect()];
    let mut json = String::new();
    for &k in &keys {
        let mut line = vec![k.0.to_string(), k.1.to_string()];
        let mut cells = Vec::new();
        for &c in &columns {
            let e = find(k, c);
            line.push(e.map_or_else(|| "-".to_string(), |e| e.display.clone()));
            cells.push((c.to_string(), e.map(|e| e.value)));
        }
        grid.push(line);
        json.push_str(&crate::train::json_line(&TableRow {
            family: k.0.into(),
            variant: k.1.into(),
            cells,
        }));
    }

    let widths: Vec<usize> = (0..grid[0].len())
        .map(|j| grid.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
        .collect();
    let mut text = String::new();
    for (i, row) in grid.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(j, (c, &w))| if j < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        text.push_str(cells.join("  ").trim_end());
        text.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
            text.push_str(&rule.join("  "));
            text.push('\n');
        }
    }
    ReportTable { text, json }
}
