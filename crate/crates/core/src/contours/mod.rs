//! Contour lines of the sound board and their parametric fits.
//!
//! Iso-lines are extracted from the fine cropped elevation map at 1 mm level
//! spacing, the bottom arc of each is fitted with
//! `y = alpha * |(x - delta) / (lambda / 2)|^beta + gamma`, and the fits are
//! stacked into per-instrument parameter profiles.

mod fit;
mod marching;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elevation::ElevationMap;
use crate::error::{Error, Result};

pub use fit::{
    curve, fit_contour, linear_alpha_gamma, rss, seeds, CurveParams, BETA_MAX, BETA_MIN,
};
pub use marching::{extract_contours, iso_segments};

pub const DEFAULT_LEVEL_STEP_MM: f64 = 1.0;
pub const MIN_CONTOUR_POINTS: usize = 5;

/// Bottom arc of one iso-line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourLine {
    /// Height above the reference plane, mm.
    pub level: f64,
    /// `(x, y)` points ordered by x.
    pub points: Vec<(f64, f64)>,
    /// Measured width of the full iso-line at this level, mm.
    pub lambda: f64,
}

impl ContourLine {
    pub fn validate(&self) -> Result<()> {
        if self.points.len() < MIN_CONTOUR_POINTS {
            return Err(Error::InvalidInput(format!(
                "contour at level {} has {} points (need {MIN_CONTOUR_POINTS})",
                self.level,
                self.points.len()
            )));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidInput(format!(
                "contour at level {} has non-positive width",
                self.level
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedLevel {
    pub level: f64,
    pub reason: String,
}

/// Extracted contours plus the log of levels that produced none.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContourSet {
    pub lines: Vec<ContourLine>,
    pub skipped: Vec<SkippedLevel>,
}

/// Result of fitting one contour. `lambda` is copied from the contour.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourFit {
    pub level: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub lambda: f64,
    pub rss: f64,
    #[serde(default)]
    pub iterations: usize,
}

/// Fitted parameters stacked across levels (ascending).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterProfile {
    pub instrument_id: String,
    pub levels: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub rss: Vec<f64>,
    /// Levels inside the profile range that have no successful fit.
    pub gaps: Vec<f64>,
}

impl ParameterProfile {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn fits(&self) -> impl Iterator<Item = ContourFit> + '_ {
        (0..self.len()).map(move |i| ContourFit {
            level: self.levels[i],
            alpha: self.alpha[i],
            beta: self.beta[i],
            gamma: self.gamma[i],
            delta: self.delta[i],
            lambda: self.lambda[i],
            rss: self.rss[i],
            iterations: 0,
        })
    }
}

/// Stack fits into a profile sorted by level, recording missing levels on the
/// `level_step` grid as gaps.
pub fn build_profile(
    instrument_id: impl Into<String>,
    fits: &[ContourFit],
    level_step: f64,
) -> Result<ParameterProfile> {
    let instrument_id = instrument_id.into();
    if fits.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "{instrument_id}: profile needs at least 3 fitted levels, got {}",
            fits.len()
        )));
    }
    let mut sorted = fits.to_vec();
    sorted.sort_by(|a, b| a.level.total_cmp(&b.level));
    if sorted
        .windows(2)
        .any(|w| w[1].level - w[0].level < level_step * 0.5)
    {
        return Err(Error::InvalidInput(format!(
            "{instrument_id}: duplicate contour levels"
        )));
    }
    let mut gaps = Vec::new();
    for w in sorted.windows(2) {
        let missing = ((w[1].level - w[0].level) / level_step).round() as usize;
        for k in 1..missing {
            gaps.push(w[0].level + k as f64 * level_step);
        }
    }
    if !gaps.is_empty() {
        log::info!("{instrument_id}: profile gaps at levels {gaps:?}");
    }
    Ok(ParameterProfile {
        instrument_id,
        levels: sorted.iter().map(|f| f.level).collect(),
        alpha: sorted.iter().map(|f| f.alpha).collect(),
        beta: sorted.iter().map(|f| f.beta).collect(),
        gamma: sorted.iter().map(|f| f.gamma).collect(),
        delta: sorted.iter().map(|f| f.delta).collect(),
        lambda: sorted.iter().map(|f| f.lambda).collect(),
        rss: sorted.iter().map(|f| f.rss).collect(),
        gaps,
    })
}

/// Contours of a fine cropped map, fitted level by level (in parallel) and
/// stacked. Levels whose fit fails are logged and left as gaps.
pub fn profile_from_map(map: &ElevationMap, level_step: f64) -> Result<ParameterProfile> {
    let set = extract_contours(map, level_step);
    for s in &set.skipped {
        log::debug!(
            "{}: level {} skipped: {}",
            map.instrument_id,
            s.level,
            s.reason
        );
    }
    let fits: Vec<ContourFit> = set
        .lines
        .par_iter()
        .map(fit_contour)
        .collect::<Vec<_>>()
        .into_iter()
        .filter_map(|r| match r {
            Ok(f) => Some(f),
            Err(e) => {
                log::warn!("{}: contour fit dropped: {e}", map.instrument_id);
                None
            }
        })
        .collect();
    build_profile(map.instrument_id.clone(), &fits, level_step)
}

const PROFILE_HEADER: [&str; 7] = ["level", "alpha", "beta", "gamma", "delta", "lambda", "rss"];

/// Write a profile as CSV with columns `level,alpha,beta,gamma,delta,lambda,rss`.
pub fn write_profile_csv(profile: &ParameterProfile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(PROFILE_HEADER)?;
    for f in profile.fits() {
        w.write_record(
            [f.level, f.alpha, f.beta, f.gamma, f.delta, f.lambda, f.rss].map(|v| v.to_string()),
        )?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a profile CSV; the instrument id is the file stem. Gaps are
/// recomputed on the `level_step` grid.
pub fn read_profile_csv(path: impl AsRef<Path>, level_step: f64) -> Result<ParameterProfile> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != PROFILE_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {}", PROFILE_HEADER.join(",")),
        });
    }
    let mut fits = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let v: Vec<f64> = rec
            .iter()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: k + 2,
                message: e.to_string(),
            })?;
        fits.push(ContourFit {
            level: v[0],
            alpha: v[1],
            beta: v[2],
            gamma: v[3],
            delta: v[4],
            lambda: v[5],
            rss: v[6],
            iterations: 0,
        });
    }
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("profile")
        .to_string();
    build_profile(id, &fits, level_step)
}
