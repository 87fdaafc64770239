//! PCA of resampled elevation maps under a common binary mask.
//!
//! A cell is kept only if it is defined for every instrument. Components are
//! the right singular vectors of the centred, masked data matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::elevation::{ElevationMap, ResampleMode, ResampleSpec};
use crate::error::{Error, Result};
use crate::label::Label;

use super::FeatureVector;

/// Flattened resampled maps with their per-cell defined flags.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedMatrix {
    pub mode: ResampleMode,
    pub ids: Vec<String>,
    pub labels: Vec<Option<Label>>,
    pub values: Vec<Vec<f64>>,
    pub defined: Vec<Vec<bool>>,
}

impl MaskedMatrix {
    /// Collect maps that were all resampled with `spec`.
    pub fn from_maps(
        maps: &[ElevationMap],
        labels: &[Option<Label>],
        spec: &ResampleSpec,
    ) -> Result<Self> {
        if maps.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: maps.len(),
                actual: labels.len(),
            });
        }
        let dim = spec.feature_count();
        for m in maps {
            if m.heights.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: m.heights.len(),
                });
            }
        }
        Ok(MaskedMatrix {
            mode: spec.mode,
            ids: maps.iter().map(|m| m.instrument_id.clone()).collect(),
            labels: labels.to_vec(),
            values: maps.iter().map(|m| m.heights.clone()).collect(),
            defined: maps.iter().map(|m| m.defined.clone()).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Cells defined for every row.
    pub fn common_mask(&self) -> Vec<bool> {
        let mut mask = vec![true; self.dim()];
        for d in &self.defined {
            for (m, &x) in mask.iter_mut().zip(d) {
                *m &= x;
            }
        }
        mask
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// Over raw cell positions: kept iff defined for every training map.
    pub mask: Vec<bool>,
    /// Mean over kept positions.
    pub mean: Vec<f64>,
    /// `k` orthonormal directions over kept positions, by decreasing variance.
    pub components: Vec<Vec<f64>>,
    /// Variance along each component (`s^2 / (n - 1)`).
    pub explained_variance: Vec<f64>,
    pub k: usize,
}

impl PcaModel {
    pub fn kept_dim(&self) -> usize {
        self.mean.len()
    }

    /// Explained variance of every direction found during the fit, not only
    /// the retained `k`.
    pub fn explained_variance_ratio(&self, total: f64) -> Vec<f64> {
        self.explained_variance.iter().map(|v| v / total).collect()
    }
}

/// Fit PCA on relative-resampled maps.
///
/// Each component's largest-magnitude entry is made positive so the result
/// does not depend on the solver's sign choice.
pub fn pca_fit(data: &MaskedMatrix, k: usize) -> Result<PcaModel> {
    if data.mode == ResampleMode::Absolute {
        return Err(Error::Config(
            "PCA is only applied to relative resampled grids; absolute resampling is rejected"
                .into(),
        ));
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let n = data.values.len();
    if n < 2 {
        return Err(Error::InvalidInput(
            "PCA needs at least 2 instruments".into(),
        ));
    }
    let mask = data.common_mask();
    let kept: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    let m = kept.len();
    if m == 0 {
        return Err(Error::Degenerate("common mask keeps no cell".into()));
    }
    let mut mean = vec![0.0; m];
    for row in &data.values {
        for (j, &c) in kept.iter().enumerate() {
            mean[j] += row[c];
        }
    }
    for v in &mut mean {
        *v /= n as f64;
    }
    let x = DMatrix::from_fn(n, m, |i, j| data.values[i][kept[j]] - mean[j]);
    let svd = x.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let smax = s.first().copied().unwrap_or(0.0);
    let rank = s
        .iter()
        .filter(|&&v| v > smax * 1e-10 * (n.max(m) as f64))
        .count();
    if k > rank {
        return Err(Error::RankDeficient(format!(
            "k = {k} exceeds the rank {rank} of the centred data ({n} instruments, {m} kept cells)"
        )));
    }
    let components: Vec<Vec<f64>> = order[..k]
        .iter()
        .map(|&i| {
            let mut c: Vec<f64> = v_t.row(i).iter().copied().collect();
            let pivot = c
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |(bi, bv), (j, &v)| {
                    if v.abs() > bv.abs() + 1e-12 {
                        (j, v)
                    } else {
                        (bi, bv)
                    }
                })
                .1;
            if pivot < 0.0 {
                c.iter_mut().for_each(|v| *v = -*v);
            }
            c
        })
        .collect();
    let explained_variance = s.iter().map(|v| v * v / (n - 1) as f64).collect();
    Ok(PcaModel {
        mask,
        mean,
        components,
        explained_variance,
        k,
    })
}

/// Coefficients `<component_j, masked(v) - mean>` for `j < k`.
pub fn pca_project(model: &PcaModel, v: &FeatureVector) -> Result<FeatureVector> {
    if v.values.len() != model.mask.len() {
        return Err(Error::DimensionMismatch {
            expected: model.mask.len(),
            actual: v.values.len(),
        });
    }
    let centred: Vec<f64> = v
        .values
        .iter()
        .zip(&model.mask)
        .filter(|(_, &m)| m)
        .map(|(&x, _)| x)
        .zip(&model.mean)
        .map(|(x, mu)| x - mu)
        .collect();
    let coef = model
        .components
        .iter()
        .map(|c| c.iter().zip(&centred).map(|(a, b)| a * b).sum())
        .collect();
    Ok(FeatureVector {
        instrument_id: v.instrument_id.clone(),
        names: (1..=model.k).map(|j| format!("pc{j}")).collect(),
        values: coef,
        label: v.label,
    })
}
