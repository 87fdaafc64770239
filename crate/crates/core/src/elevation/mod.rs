//! Elevation maps: rasterised heights of a sound board over a regular grid.
//!
//! A map stores one height per grid node together with an explicit
//! defined/undefined mask. Undefined nodes (no mesh above or below them) hold
//! exactly `0.0`, which is the elevation of the reference plane; every
//! operation in this module preserves that zero-fill invariant.

mod io;
mod raster;
mod resample;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub use io::{read_map_csv, read_map_json, write_map_csv, write_map_json};
pub use raster::{compute_elevation_map, DEFAULT_SPACING_MM};
pub use resample::{
    absolute_global_box, parse_grid, resample, Aabb2, ResampleMode, ResampleSpec, RESAMPLE_PRESETS,
};

/// Heights of a sound board sampled on a rectangular grid.
///
/// Node `(r, c)` sits at `(origin[0] + c * spacing[0], origin[1] + r * spacing[1])`:
/// rows run along the length axis `y` (row 0 at the bottom of the instrument),
/// columns across the width `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElevationMap {
    pub instrument_id: String,
    pub origin: [f64; 2],
    pub spacing: [f64; 2],
    pub rows: usize,
    pub cols: usize,
    /// Row-major heights in millimetres, `0.0` where undefined.
    pub heights: Vec<f64>,
    /// Row-major defined mask.
    pub defined: Vec<bool>,
}

impl ElevationMap {
    /// Empty (all undefined) map.
    pub fn undefined(
        instrument_id: impl Into<String>,
        origin: [f64; 2],
        spacing: [f64; 2],
        rows: usize,
        cols: usize,
    ) -> Self {
        ElevationMap {
            instrument_id: instrument_id.into(),
            origin,
            spacing,
            rows,
            cols,
            heights: vec![0.0; rows * cols],
            defined: vec![false; rows * cols],
        }
    }

    /// Build a map from dense values; `None` marks undefined nodes.
    pub fn from_rows(
        instrument_id: impl Into<String>,
        origin: [f64; 2],
        spacing: [f64; 2],
        values: &[Vec<Option<f64>>],
    ) -> Result<Self> {
        let rows = values.len();
        let cols = values.first().map_or(0, Vec::len);
        if values.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("ragged elevation rows".into()));
        }
        let mut map = ElevationMap::undefined(instrument_id, origin, spacing, rows, cols);
        for (r, row) in values.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                if let Some(h) = v {
                    map.set(r, c, *h);
                }
            }
        }
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing[0] > 0.0 && self.spacing[1] > 0.0) {
            return Err(Error::InvalidInput(format!(
                "grid spacing must be positive, got {:?}",
                self.spacing
            )));
        }
        let n = self.rows * self.cols;
        if self.heights.len() != n || self.defined.len() != n {
            return Err(Error::InvalidInput(
                "map buffers do not match rows*cols".into(),
            ));
        }
        if let Some(i) = (0..n).find(|&i| !self.defined[i] && self.heights[i] != 0.0) {
            return Err(Error::InvalidInput(format!(
                "undefined node {i} carries non-zero height {}",
                self.heights[i]
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn index(&self, r: usize, c: usize) -> usize {
        r * self.cols + c
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        let i = self.index(r, c);
        self.defined[i].then(|| self.heights[i])
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, h: f64) {
        let i = self.index(r, c);
        self.heights[i] = h;
        self.defined[i] = true;
    }

    /// World coordinates of node `(r, c)`.
    #[inline]
    pub fn node_xy(&self, r: usize, c: usize) -> (f64, f64) {
        (
            self.origin[0] + c as f64 * self.spacing[0],
            self.origin[1] + r as f64 * self.spacing[1],
        )
    }

    pub fn defined_count(&self) -> usize {
        self.defined.iter().filter(|&&d| d).count()
    }

    pub fn row_width(&self, r: usize) -> usize {
        self.defined[r * self.cols..(r + 1) * self.cols]
            .iter()
            .filter(|&&d| d)
            .count()
    }

    pub fn max_height(&self) -> Option<f64> {
        self.heights
            .iter()
            .zip(&self.defined)
            .filter(|(_, &d)| d)
            .map(|(&h, _)| h)
            .fold(None, |m, h| Some(m.map_or(h, |m: f64| m.max(h))))
    }

    /// Box spanned by the defined nodes, `None` for an all-undefined map.
    pub fn defined_extent(&self) -> Option<Aabb2> {
        let mut b: Option<Aabb2> = None;
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.defined[self.index(r, c)] {
                    let (x, y) = self.node_xy(r, c);
                    b = Some(match b {
                        None => Aabb2 {
                            min: [x, y],
                            max: [x, y],
                        },
                        Some(b) => Aabb2 {
                            min: [b.min[0].min(x), b.min[1].min(y)],
                            max: [b.max[0].max(x), b.max[1].max(y)],
                        },
                    });
                }
            }
        }
        b
    }

    fn submap(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> ElevationMap {
        let (x0, y0) = self.node_xy(r0, c0);
        let mut out = ElevationMap::undefined(
            self.instrument_id.clone(),
            [x0, y0],
            self.spacing,
            r1 - r0 + 1,
            c1 - c0 + 1,
        );
        for r in r0..=r1 {
            for c in c0..=c1 {
                if let Some(h) = self.get(r, c) {
                    out.set(r - r0, c - c0, h);
                }
            }
        }
        out
    }
}

/// Keep the bottom part of the board, from its widest row down to its
/// bottom edge.
///
/// Width is the number of defined nodes in a row; ties go to the row closest
/// to the bottom. The result is trimmed to the defined rows and columns of
/// that band, so cropping is idempotent.
pub fn crop_zone_of_interest(map: &ElevationMap) -> Result<ElevationMap> {
    let mut widest: Option<(usize, usize)> = None;
    for r in 0..map.rows {
        let w = map.row_width(r);
        if w > 0 && widest.is_none_or(|(_, best)| w > best) {
            widest = Some((r, w));
        }
    }
    let (r_top, _) =
        widest.ok_or_else(|| Error::Degenerate("elevation map has no defined node".into()))?;
    let r_bottom = (0..=r_top)
        .find(|&r| map.row_width(r) > 0)
        .expect("widest row is defined");
    let mut c0 = usize::MAX;
    let mut c1 = 0;
    for r in r_bottom..=r_top {
        for c in 0..map.cols {
            if map.defined[map.index(r, c)] {
                c0 = c0.min(c);
                c1 = c1.max(c);
            }
        }
    }
    Ok(map.submap(r_bottom, r_top, c0, c1))
}

/// Standardise defined heights to zero mean and unit population standard
/// deviation. Undefined nodes stay at zero.
pub fn normalize_heights(map: &ElevationMap) -> Result<ElevationMap> {
    let values: Vec<f64> = map
        .heights
        .iter()
        .zip(&map.defined)
        .filter(|(_, &d)| d)
        .map(|(&h, _)| h)
        .collect();
    if values.len() < 2 {
        return Err(Error::ZeroVariance(format!(
            "{}: need at least 2 defined nodes to normalise",
            map.instrument_id
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if std <= 1e-12 * scale {
        return Err(Error::ZeroVariance(format!(
            "{}: constant heights cannot be normalised",
            map.instrument_id
        )));
    }
    let mut out = map.clone();
    for (h, &d) in out.heights.iter_mut().zip(&map.defined) {
        if d {
            *h = (*h - mean) / std;
        }
    }
    Ok(out)
}

/// Row-major feature vector of a (resampled) map; undefined nodes give 0.
pub fn flatten(map: &ElevationMap) -> FeatureVector {
    let mut names = Vec::with_capacity(map.rows * map.cols);
    for r in 0..map.rows {
        for c in 0..map.cols {
            names.push(format!("cell_{r}_{c}"));
        }
    }
    FeatureVector {
        instrument_id: map.instrument_id.clone(),
        names,
        values: map.heights.clone(),
        label: None,
    }
}
