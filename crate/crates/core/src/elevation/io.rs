use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::ElevationMap;

/// Write a map as CSV: a `# origin x0 y0 spacing dx dy` header followed by
/// one line per row (row 0 first), `NA` for undefined nodes.
pub fn write_map_csv(map: &ElevationMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    writeln!(
        out,
        "# origin {} {} spacing {} {}",
        map.origin[0], map.origin[1], map.spacing[0], map.spacing[1]
    )
    .unwrap();
    for r in 0..map.rows {
        for c in 0..map.cols {
            if c > 0 {
                out.push(',');
            }
            match map.get(r, c) {
                Some(h) => write!(out, "{h}").unwrap(),
                None => out.push_str("NA"),
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a CSV map written by [`write_map_csv`]. The instrument id is the file stem.
pub fn read_map_csv(path: impl AsRef<Path>) -> Result<ElevationMap> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| perr(1, "empty file".into()))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 7 || toks[0] != "#" || toks[1] != "origin" || toks[4] != "spacing" {
        return Err(perr(1, format!("bad header {header:?}")));
    }
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| perr(1, format!("bad header number: {e}")))
    };
    let origin = [num(toks[2])?, num(toks[3])?];
    let spacing = [num(toks[5])?, num(toks[6])?];
    let mut values = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| match t.trim() {
                "NA" => Ok(None),
                v => v
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|e| perr(k + 2, format!("bad value {v:?}: {e}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        values.push(row);
    }
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("map")
        .to_string();
    ElevationMap::from_rows(id, origin, spacing, &values)
}

pub fn write_map_json(map: &ElevationMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(map)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_map_json(path: impl AsRef<Path>) -> Result<ElevationMap> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let map: ElevationMap = serde_json::from_str(&text)?;
    map.validate()?;
    Ok(map)
}
