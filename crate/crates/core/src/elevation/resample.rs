use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ElevationMap;

/// Axis-aligned box in the `(x, y)` plane, millimetres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb2 {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Aabb2 {
    pub fn union(&self, other: &Aabb2) -> Aabb2 {
        Aabb2 {
            min: [self.min[0].min(other.min[0]), self.min[1].min(other.min[1])],
            max: [self.max[0].max(other.max[0]), self.max[1].max(other.max[1])],
        }
    }

    /// Grow every side by `fraction` of the extent along that axis.
    pub fn padded(&self, fraction: f64) -> Aabb2 {
        let px = (self.max[0] - self.min[0]) * fraction;
        let py = (self.max[1] - self.min[1]) * fraction;
        Aabb2 {
            min: [self.min[0] - px, self.min[1] - py],
            max: [self.max[0] + px, self.max[1] + py],
        }
    }

    pub fn contains_box(&self, other: &Aabb2, tol: f64) -> bool {
        other.min[0] >= self.min[0] - tol
            && other.min[1] >= self.min[1] - tol
            && other.max[0] <= self.max[0] + tol
            && other.max[1] <= self.max[1] + tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleMode {
    /// Tile each instrument's own cropped bounding box.
    Relative,
    /// Tile a bounding box shared by the whole dataset.
    Absolute,
}

impl fmt::Display for ResampleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResampleMode::Relative => "relative",
            ResampleMode::Absolute => "absolute",
        })
    }
}

impl FromStr for ResampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relative" => Ok(ResampleMode::Relative),
            "absolute" => Ok(ResampleMode::Absolute),
            other => Err(Error::InvalidInput(format!(
                "unknown resampling mode {other:?}"
            ))),
        }
    }
}

/// Grid presets as `(width_cells, length_cells)`, coarsest first.
pub const RESAMPLE_PRESETS: [(usize, usize); 7] = [
    (5, 10),
    (10, 25),
    (20, 50),
    (25, 65),
    (50, 125),
    (75, 190),
    (100, 250),
];

/// Target grid of a resampling.
///
/// Grids are written `W×L`: `width_cells` across the instrument (x) and
/// `length_cells` along it (y). The resampled map therefore has
/// `length_cells` rows and `width_cells` columns.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResampleSpec {
    pub mode: ResampleMode,
    pub width_cells: usize,
    pub length_cells: usize,
    /// Shared frame, required for absolute resampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_box: Option<Aabb2>,
}

impl ResampleSpec {
    pub fn relative(width_cells: usize, length_cells: usize) -> Self {
        ResampleSpec {
            mode: ResampleMode::Relative,
            width_cells,
            length_cells,
            global_box: None,
        }
    }

    pub fn absolute(width_cells: usize, length_cells: usize, global_box: Aabb2) -> Self {
        ResampleSpec {
            mode: ResampleMode::Absolute,
            width_cells,
            length_cells,
            global_box: Some(global_box),
        }
    }

    pub fn feature_count(&self) -> usize {
        self.width_cells * self.length_cells
    }

    /// `"5x10"` style grid label.
    pub fn grid_label(&self) -> String {
        format!("{}x{}", self.width_cells, self.length_cells)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width_cells == 0 || self.length_cells == 0 {
            return Err(Error::InvalidInput(
                "resampling grid needs at least 1x1 cells".into(),
            ));
        }
        if self.mode == ResampleMode::Absolute && self.global_box.is_none() {
            return Err(Error::Config(
                "absolute resampling requires a global box".into(),
            ));
        }
        Ok(())
    }
}

/// Parse a `"5x10"` grid label into `(width_cells, length_cells)`.
pub fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let (w, l) = s
        .split_once(['x', 'X', '×'])
        .ok_or_else(|| Error::InvalidInput(format!("grid {s:?} is not of the form WxL")))?;
    let w = w
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("bad grid {s:?}")))?;
    let l = l
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("bad grid {s:?}")))?;
    Ok((w, l))
}

/// Union of the defined footprints of all maps, padded by 1% per side.
pub fn absolute_global_box(maps: &[ElevationMap]) -> Result<Aabb2> {
    maps.iter()
        .filter_map(ElevationMap::defined_extent)
        .reduce(|a, b| a.union(&b))
        .map(|b| b.padded(0.01))
        .ok_or_else(|| Error::InvalidInput("no defined footprint in dataset".into()))
}

/// Average the defined fine nodes falling into each output cell.
///
/// A cell is defined iff at least one defined node lies inside it. Cells are
/// half-open `[lo, hi)` except the last one along each axis, which is closed.
pub fn resample(map: &ElevationMap, spec: &ResampleSpec) -> Result<ElevationMap> {
    spec.validate()?;
    let extent = map
        .defined_extent()
        .ok_or_else(|| Error::InvalidInput(format!("{}: empty map", map.instrument_id)))?;
    let frame = match spec.mode {
        ResampleMode::Relative => extent,
        ResampleMode::Absolute => {
            let g = spec.global_box.expect("validated");
            if !g.contains_box(&extent, 1e-9) {
                return Err(Error::InvalidInput(format!(
                    "{}: global box does not contain the map footprint",
                    map.instrument_id
                )));
            }
            g
        }
    };
    let (wc, lc) = (spec.width_cells, spec.length_cells);
    let span_x = frame.max[0] - frame.min[0];
    let span_y = frame.max[1] - frame.min[1];
    let cell_x = span_x / wc as f64;
    let cell_y = span_y / lc as f64;

    let bin = |v: f64, lo: f64, cell: f64, n: usize| -> Option<usize> {
        if cell <= 0.0 {
            return Some(0);
        }
        let t = (v - lo) / cell;
        if t < -1e-9 || t > n as f64 + 1e-9 {
            return None;
        }
        Some((t.max(0.0).floor() as usize).min(n - 1))
    };

    let mut sum = vec![0.0; wc * lc];
    let mut count = vec![0usize; wc * lc];
    for r in 0..map.rows {
        for c in 0..map.cols {
            let Some(h) = map.get(r, c) else { continue };
            let (x, y) = map.node_xy(r, c);
            let (Some(bx), Some(by)) = (
                bin(x, frame.min[0], cell_x, wc),
                bin(y, frame.min[1], cell_y, lc),
            ) else {
                continue;
            };
            sum[by * wc + bx] += h;
            count[by * wc + bx] += 1;
        }
    }
    if count.iter().all(|&n| n == 0) {
        return Err(Error::InvalidInput(format!(
            "{}: empty overlap with the resampling frame",
            map.instrument_id
        )));
    }

    let spacing = [
        if cell_x > 0.0 { cell_x } else { map.spacing[0] },
        if cell_y > 0.0 { cell_y } else { map.spacing[1] },
    ];
    let mut out = ElevationMap::undefined(
        map.instrument_id.clone(),
        [frame.min[0] + cell_x / 2.0, frame.min[1] + cell_y / 2.0],
        spacing,
        lc,
        wc,
    );
    for i in 0..wc * lc {
        if count[i] > 0 {
            out.heights[i] = sum[i] / count[i] as f64;
            out.defined[i] = true;
        }
    }
    Ok(out)
}
