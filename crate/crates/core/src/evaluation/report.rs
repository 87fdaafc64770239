//! Report tables: rows are feature sources, columns model x tie-break.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::experiment::{CellAudit, CellResult};

struct Table<'a> {
    columns: Vec<&'a str>,
    /// `(table, features)` in first-appearance order.
    rows: Vec<(&'a str, &'a str)>,
}

fn layout(results: &[CellResult]) -> Table<'_> {
    let mut columns: Vec<&str> = Vec::new();
    let mut rows: Vec<(&str, &str)> = Vec::new();
    for r in results {
        if !columns.contains(&r.cell.column.as_str()) {
            columns.push(&r.cell.column);
        }
        let key = (r.cell.table.as_str(), r.cell.features.as_str());
        if !rows.contains(&key) {
            rows.push(key);
        }
    }
    Table { columns, rows }
}

fn lookup<'a>(results: &'a [CellResult], row: (&str, &str), col: &str) -> Option<&'a CellResult> {
    results
        .iter()
        .find(|r| r.cell.table == row.0 && r.cell.features == row.1 && r.cell.column == col)
}

/// Wide CSV: `table,features,<column...>`, balanced accuracies as fractions
/// with 4 decimals, `error` for failed cells and empty for absent ones.
pub fn render_csv(results: &[CellResult]) -> Result<String> {
    let t = layout(results);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["table", "features"];
    header.extend(&t.columns);
    w.write_record(&header)?;
    for &row in &t.rows {
        let mut rec = vec![row.0.to_string(), row.1.to_string()];
        for col in &t.columns {
            rec.push(match lookup(results, row, col) {
                Some(CellResult {
                    report: Some(r), ..
                }) => format!("{:.4}", r.balanced_accuracy),
                Some(_) => "error".into(),
                None => String::new(),
            });
        }
        w.write_record(&rec)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 input"))
}

/// Aligned text tables, one per table group, balanced accuracy in percent.
pub fn render_text(results: &[CellResult], c_grid: &[f64]) -> String {
    let t = layout(results);
    let mut out = String::new();
    let grid: Vec<String> = c_grid.iter().map(|c| format!("{c:e}")).collect();
    writeln!(out, "Balanced accuracy (%), nested leave-one-out").unwrap();
    writeln!(out, "C grid: {}", grid.join(", ")).unwrap();
    let mut tables: Vec<&str> = Vec::new();
    for &(tab, _) in &t.rows {
        if !tables.contains(&tab) {
            tables.push(tab);
        }
    }
    for tab in tables {
        let rows: Vec<&str> = t.rows.iter().filter(|r| r.0 == tab).map(|r| r.1).collect();
        let fw = rows
            .iter()
            .map(|r| r.chars().count())
            .max()
            .unwrap_or(0)
            .max(8);
        let widths: Vec<usize> = t.columns.iter().map(|c| c.chars().count().max(6)).collect();
        writeln!(out).unwrap();
        writeln!(out, "[{tab}]").unwrap();
        write!(out, "{:<fw$}", "features").unwrap();
        for (c, w) in t.columns.iter().zip(&widths) {
            write!(out, "  {c:>w$}").unwrap();
        }
        writeln!(out).unwrap();
        for row in rows {
            let pad = fw - row.chars().count();
            write!(out, "{row}{}", " ".repeat(pad)).unwrap();
            for (c, w) in t.columns.iter().zip(&widths) {
                let v = match lookup(results, (tab, row), c) {
                    Some(CellResult {
                        report: Some(r), ..
                    }) => {
                        format!("{:.1}", 100.0 * r.balanced_accuracy)
                    }
                    Some(_) => "error".into(),
                    None => "-".into(),
                };
                write!(out, "  {v:>w$}").unwrap();
            }
            writeln!(out).unwrap();
        }
    }
    out
}

pub fn write_audit_jsonl(path: &Path, audit: &[CellAudit]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for a in audit {
        serde_json::to_writer(&mut w, a)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<CellResult>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Write `report.csv`, `report.txt` and `reports.json` into `dir`.
pub fn write_reports(dir: &Path, results: &[CellResult], c_grid: &[f64]) -> Result<()> {
    let put = |name: &str, text: String| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    put("report.csv", render_csv(results)?)?;
    put("report.txt", render_text(results, c_grid))?;
    put(
        "reports.json",
        serde_json::to_string_pretty(results)? + "\n",
    )
}
