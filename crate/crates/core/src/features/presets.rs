use crate::contours::ParameterProfile;
use crate::error::{Error, Result};

use super::beta::{
    beta_threshold_features, piecewise_features, polyfit_features, resample_profile, PolyKind,
    ThresholdMode,
};
use super::FeatureVector;

/// Building block of an engineered feature set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureComponent {
    /// Linear fit: slope, intercept.
    Linear,
    /// Quadratic fit: three coefficients.
    Quadratic,
    /// Two-segment fit: two slopes, two intercepts, breakpoint.
    Piecewise,
    /// Slope of the upper segment of the two-segment fit.
    SecondSlope,
    CountLe2,
    PropLe2,
    CountLe2Le3,
    PropLe2Le3,
    /// All three β-threshold counts.
    Counts,
    /// All three β-threshold proportions.
    Proportions,
    /// β profile resampled at 50 levels.
    Resampled50,
}

impl FeatureComponent {
    fn compute(self, profile: &ParameterProfile) -> Result<FeatureVector> {
        use FeatureComponent::*;
        let take = |v: FeatureVector, idx: &[usize]| FeatureVector {
            instrument_id: v.instrument_id.clone(),
            names: idx.iter().map(|&i| v.names[i].clone()).collect(),
            values: idx.iter().map(|&i| v.values[i]).collect(),
            label: None,
        };
        match self {
            Linear => polyfit_features(profile, PolyKind::Linear),
            Quadratic => polyfit_features(profile, PolyKind::Quadratic),
            Piecewise => piecewise_features(profile),
            SecondSlope => Ok(take(piecewise_features(profile)?, &[2])),
            CountLe2 => Ok(take(
                beta_threshold_features(profile, ThresholdMode::Count)?,
                &[0],
            )),
            PropLe2 => Ok(take(
                beta_threshold_features(profile, ThresholdMode::Proportion)?,
                &[0],
            )),
            CountLe2Le3 => Ok(take(
                beta_threshold_features(profile, ThresholdMode::Count)?,
                &[0, 1],
            )),
            PropLe2Le3 => Ok(take(
                beta_threshold_features(profile, ThresholdMode::Proportion)?,
                &[0, 1],
            )),
            Counts => beta_threshold_features(profile, ThresholdMode::Count),
            Proportions => beta_threshold_features(profile, ThresholdMode::Proportion),
            Resampled50 => resample_profile(profile, 50),
        }
    }
}

/// Named engineered feature set: components concatenated in order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureSet {
    pub id: &'static str,
    /// Row label used in report tables.
    pub label: &'static str,
    pub components: &'static [FeatureComponent],
    pub size: usize,
}

use FeatureComponent as C;

/// The 21 engineered feature sets, in report row order.
pub const FEATURE_SETS: [FeatureSet; 21] = [
    FeatureSet {
        id: "lin2",
        label: "2 (linear fit.)",
        components: &[C::Linear],
        size: 2,
    },
    FeatureSet {
        id: "slope2+count_le2",
        label: "2 (second slope + number of β ≤ 2)",
        components: &[C::SecondSlope, C::CountLe2],
        size: 2,
    },
    FeatureSet {
        id: "slope2+prop_le2",
        label: "2 (second slope + proportion of β ≤ 2)",
        components: &[C::SecondSlope, C::PropLe2],
        size: 2,
    },
    FeatureSet {
        id: "quad3",
        label: "3 (quadratic fit.)",
        components: &[C::Quadratic],
        size: 3,
    },
    FeatureSet {
        id: "count3",
        label: "3 (number of β ≤ 2, β ≤ 3 and β > 3)",
        components: &[C::Counts],
        size: 3,
    },
    FeatureSet {
        id: "prop3",
        label: "3 (proportion of β ≤ 2, β ≤ 3 and β > 3)",
        components: &[C::Proportions],
        size: 3,
    },
    FeatureSet {
        id: "slope2+count_le2_le3",
        label: "3 (second slope + number of β ≤ 2 and β ≤ 3)",
        components: &[C::SecondSlope, C::CountLe2Le3],
        size: 3,
    },
    FeatureSet {
        id: "slope2+prop_le2_le3",
        label: "3 (second slope + proportion of β ≤ 2 and β ≤ 3)",
        components: &[C::SecondSlope, C::PropLe2Le3],
        size: 3,
    },
    FeatureSet {
        id: "slope2+count3",
        label: "4 (second slope + number of β ≤ 2, β ≤ 3 and β > 3)",
        components: &[C::SecondSlope, C::Counts],
        size: 4,
    },
    FeatureSet {
        id: "slope2+prop3",
        label: "4 (second slope + proportion of β ≤ 2, β ≤ 3 and β > 3)",
        components: &[C::SecondSlope, C::Proportions],
        size: 4,
    },
    FeatureSet {
        id: "lin2+count3",
        label: "5 (linear fit. + number of β ≤ 2, β ≤ 3 and β > 3)",
        components: &[C::Linear, C::Counts],
        size: 5,
    },
    FeatureSet {
        id: "lin2+prop3",
        label: "5 (linear fit. + proportion of β ≤ 2, β ≤ 3 and β > 3)",
        components: &[C::Linear, C::Proportions],
        size: 5,
    },
    FeatureSet {
        id: "quad3+count3",
        label: "6 (quadratic fit. + number of β ≤ 2, β ≤ 3 and β > 3)",
        components: &[C::Quadratic, C::Counts],
        size: 6,
    },
    FeatureSet {
        id: "quad3+prop3",
        label: "6 (quadratic fit. + proportion of β ≤ 2, β ≤ 3 and β > 3)",
        components: &[C::Quadratic, C::Proportions],
        size: 6,
    },
    FeatureSet {
        id: "pw5",
        label: "5 (piecewise linear fit.)",
        components: &[C::Piecewise],
        size: 5,
    },
    FeatureSet {
        id: "pw5+count3",
        label: "8 (piecewise linear fit. + number of β ≤ 2, β ≤ 3 and β > 3)",
        components: &[C::Piecewise, C::Counts],
        size: 8,
    },
    FeatureSet {
        id: "pw5+prop3",
        label: "8 (piecewise linear fit. + proportion of β ≤ 2, β ≤ 3 and β > 3)",
        components: &[C::Piecewise, C::Proportions],
        size: 8,
    },
    FeatureSet {
        id: "pw5+quad3",
        label: "8 (piecewise lin. + quadratic fit.)",
        components: &[C::Piecewise, C::Quadratic],
        size: 8,
    },
    FeatureSet {
        id: "all13",
        label: "13 (lin. fit. + piecewise lin. fit. + quad. fit. + number of β)",
        components: &[C::Linear, C::Piecewise, C::Quadratic, C::Counts],
        size: 13,
    },
    FeatureSet {
        id: "all13_prop",
        label: "13 (lin. fit. + piecewise lin. fit. + quad. fit. + proportion of β)",
        components: &[C::Linear, C::Piecewise, C::Quadratic, C::Proportions],
        size: 13,
    },
    FeatureSet {
        id: "beta50",
        label: "50 (resampled β profile)",
        components: &[C::Resampled50],
        size: 50,
    },
];

impl FeatureSet {
    pub fn by_id(id: &str) -> Result<&'static FeatureSet> {
        FEATURE_SETS.iter().find(|s| s.id == id).ok_or_else(|| {
            Error::InvalidInput(format!(
                "unknown feature set {id:?}; known: {}",
                FEATURE_SETS.map(|s| s.id).join(", ")
            ))
        })
    }
}

/// Compute the named engineered feature set for one profile.
pub fn compose_feature_set(profile: &ParameterProfile, set_id: &str) -> Result<FeatureVector> {
    let set = FeatureSet::by_id(set_id)?;
    let parts = set
        .components
        .iter()
        .map(|c| c.compute(profile))
        .collect::<Result<Vec<_>>>()?;
    let v = FeatureVector::concat(&profile.instrument_id, parts);
    debug_assert_eq!(v.len(), set.size);
    Ok(v)
}
