//! Engineered features of the β profile.
//!
//! Polynomial fits use levels centred at their mean, so an intercept is the
//! fitted β at the mean level rather than at level zero.

use nalgebra::{DMatrix, DVector};

use crate::contours::ParameterProfile;
use crate::error::{Error, Result};

use super::FeatureVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdMode {
    Count,
    Proportion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolyKind {
    Linear,
    Quadratic,
}

impl PolyKind {
    fn degree(self) -> usize {
        match self {
            PolyKind::Linear => 1,
            PolyKind::Quadratic => 2,
        }
    }
}

/// `#{β ≤ 2}`, `#{β ≤ 3}`, `#{β > 3}` (the first two bins are nested), or
/// the same divided by the number of levels.
pub fn beta_threshold_features(
    profile: &ParameterProfile,
    mode: ThresholdMode,
) -> Result<FeatureVector> {
    if profile.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{}: empty profile",
            profile.instrument_id
        )));
    }
    let le2 = profile.beta.iter().filter(|&&b| b <= 2.0).count() as f64;
    let le3 = profile.beta.iter().filter(|&&b| b <= 3.0).count() as f64;
    let gt3 = profile.beta.iter().filter(|&&b| b > 3.0).count() as f64;
    let (prefix, div) = match mode {
        ThresholdMode::Count => ("count", 1.0),
        ThresholdMode::Proportion => ("prop", profile.len() as f64),
    };
    Ok(FeatureVector::new(
        profile.instrument_id.clone(),
        vec![
            format!("{prefix}_beta_le2"),
            format!("{prefix}_beta_le3"),
            format!("{prefix}_beta_gt3"),
        ],
        vec![le2 / div, le3 / div, gt3 / div],
    ))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Least-squares polynomial of `y` in powers of `x`; coefficients highest
/// degree first, plus the residual sum of squares.
fn least_squares_poly(x: &[f64], y: &[f64], degree: usize) -> Result<(Vec<f64>, f64)> {
    let n = x.len();
    let design = DMatrix::from_fn(n, degree + 1, |i, j| x[i].powi((degree - j) as i32));
    let rhs = DVector::from_column_slice(y);
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-12) {
        return Err(Error::RankDeficient(format!(
            "degree-{degree} fit on {n} points is rank deficient"
        )));
    }
    let coef = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::RankDeficient(e.to_string()))?;
    let resid = &design * &coef - rhs;
    Ok((coef.iter().copied().collect(), resid.norm_squared()))
}

/// Linear `(slope, intercept)` or quadratic `(quad, slope, intercept)` fit of
/// β against centred level.
pub fn polyfit_features(profile: &ParameterProfile, kind: PolyKind) -> Result<FeatureVector> {
    let deg = kind.degree();
    if profile.len() < deg + 2 {
        return Err(Error::InvalidInput(format!(
            "{}: {:?} fit needs {} levels, profile has {}",
            profile.instrument_id,
            kind,
            deg + 2,
            profile.len()
        )));
    }
    let m = mean(&profile.levels);
    let x: Vec<f64> = profile.levels.iter().map(|l| l - m).collect();
    let (coef, _) = least_squares_poly(&x, &profile.beta, deg)?;
    let names = match kind {
        PolyKind::Linear => vec!["lin_slope", "lin_intercept"],
        PolyKind::Quadratic => vec!["quad_a2", "quad_a1", "quad_a0"],
    };
    Ok(FeatureVector::new(
        profile.instrument_id.clone(),
        names.into_iter().map(String::from).collect(),
        coef,
    ))
}

/// One straight-line segment in centred coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearSegment {
    pub slope: f64,
    pub intercept: f64,
    pub rss: f64,
}

/// Two independent segments split at `breakpoint_index`: the lower segment
/// holds levels `[0, k)`, the upper `[k, n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PiecewiseFit {
    pub lower: LinearSegment,
    pub upper: LinearSegment,
    pub breakpoint_index: usize,
    pub breakpoint_level: f64,
}

impl PiecewiseFit {
    pub fn rss(&self) -> f64 {
        self.lower.rss + self.upper.rss
    }
}

fn segment(x: &[f64], y: &[f64]) -> Result<LinearSegment> {
    let (c, rss) = least_squares_poly(x, y, 1)?;
    Ok(LinearSegment {
        slope: c[0],
        intercept: c[1],
        rss,
    })
}

/// Best two-segment fit over breakpoints with at least 3 levels per side.
/// Breakpoints whose total rss is within rounding of the best are tied and
/// the smallest index wins.
pub fn piecewise_fit(profile: &ParameterProfile) -> Result<PiecewiseFit> {
    let n = profile.len();
    if n < 6 {
        return Err(Error::InvalidInput(format!(
            "{}: piecewise fit needs 6 levels, profile has {n}",
            profile.instrument_id
        )));
    }
    let m = mean(&profile.levels);
    let x: Vec<f64> = profile.levels.iter().map(|l| l - m).collect();
    let y = &profile.beta;
    let my = mean(y);
    let tol = 1e-12 * y.iter().map(|v| (v - my).powi(2)).sum::<f64>().max(1.0);
    let mut best: Option<PiecewiseFit> = None;
    for k in 3..=n - 3 {
        let lower = segment(&x[..k], &y[..k])?;
        let upper = segment(&x[k..], &y[k..])?;
        let cand = PiecewiseFit {
            lower,
            upper,
            breakpoint_index: k,
            breakpoint_level: profile.levels[k],
        };
        if best.is_none_or(|b| cand.rss() < b.rss() - tol) {
            best = Some(cand);
        }
    }
    Ok(best.expect("n >= 6 gives at least one breakpoint"))
}

/// `(slope1, intercept1, slope2, intercept2, breakpoint level)`; slope2 is
/// the "second slope" of the upper-level segment.
pub fn piecewise_features(profile: &ParameterProfile) -> Result<FeatureVector> {
    let f = piecewise_fit(profile)?;
    Ok(FeatureVector::new(
        profile.instrument_id.clone(),
        [
            "pw_slope1",
            "pw_intercept1",
            "pw_slope2",
            "pw_intercept2",
            "pw_break_level",
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        vec![
            f.lower.slope,
            f.lower.intercept,
            f.upper.slope,
            f.upper.intercept,
            f.breakpoint_level,
        ],
    ))
}

/// β linearly interpolated at `n` equispaced levels over the profile range.
pub fn resample_profile(profile: &ParameterProfile, n: usize) -> Result<FeatureVector> {
    if profile.len() < 2 || n == 0 {
        return Err(Error::InvalidInput(format!(
            "{}: resampling needs 2 levels and n >= 1",
            profile.instrument_id
        )));
    }
    let lv = &profile.levels;
    let (lo, hi) = (lv[0], lv[lv.len() - 1]);
    let mut values = Vec::with_capacity(n);
    let mut seg = 0;
    for j in 0..n {
        let t = if n == 1 {
            lo
        } else {
            lo + (hi - lo) * j as f64 / (n - 1) as f64
        };
        while seg + 2 < lv.len() && t > lv[seg + 1] {
            seg += 1;
        }
        let (l0, l1) = (lv[seg], lv[seg + 1]);
        let w = ((t - l0) / (l1 - l0)).clamp(0.0, 1.0);
        values.push(profile.beta[seg] * (1.0 - w) + profile.beta[seg + 1] * w);
    }
    Ok(FeatureVector::new(
        profile.instrument_id.clone(),
        (0..n).map(|j| format!("beta_r{j:02}")).collect(),
        values,
    ))
}
