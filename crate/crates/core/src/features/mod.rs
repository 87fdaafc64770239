//! Feature vectors and matrices, engineered β-profile features and
//! mask-consistent PCA of resampled elevation maps.

mod beta;
mod pca;
mod presets;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;

pub use beta::{
    beta_threshold_features, piecewise_features, piecewise_fit, polyfit_features, resample_profile,
    LinearSegment, PiecewiseFit, PolyKind, ThresholdMode,
};
pub use pca::{pca_fit, pca_project, MaskedMatrix, PcaModel};
pub use presets::{compose_feature_set, FeatureComponent, FeatureSet, FEATURE_SETS};

/// Named feature values of one instrument.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub instrument_id: String,
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub label: Option<Label>,
}

impl FeatureVector {
    pub fn new(instrument_id: impl Into<String>, names: Vec<String>, values: Vec<f64>) -> Self {
        FeatureVector {
            instrument_id: instrument_id.into(),
            names,
            values,
            label: None,
        }
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.names.len() != self.values.len() {
            return Err(Error::InvalidInput(format!(
                "{}: {} names for {} values",
                self.instrument_id,
                self.names.len(),
                self.values.len()
            )));
        }
        let mut seen = HashSet::with_capacity(self.names.len());
        if let Some(dup) = self.names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::InvalidInput(format!(
                "{}: duplicate feature name {dup:?}",
                self.instrument_id
            )));
        }
        Ok(())
    }

    /// Concatenate feature blocks in order.
    pub fn concat(instrument_id: &str, parts: impl IntoIterator<Item = FeatureVector>) -> Self {
        let mut out = FeatureVector::new(instrument_id, Vec::new(), Vec::new());
        for p in parts {
            out.names.extend(p.names);
            out.values.extend(p.values);
        }
        out
    }
}

/// Instruments sharing one feature layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: Vec<FeatureVector>,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<FeatureVector>) -> Result<Self> {
        let m = FeatureMatrix { rows };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.rows.first() else {
            return Err(Error::InvalidInput("feature matrix has no rows".into()));
        };
        for r in &self.rows {
            r.validate()?;
            if r.names != first.names {
                return Err(Error::InvalidInput(format!(
                    "{}: feature names differ from {}",
                    r.instrument_id, first.instrument_id
                )));
            }
            if r.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{}: non-finite feature value",
                    r.instrument_id
                )));
            }
        }
        let mut ids = HashSet::new();
        if let Some(r) = self
            .rows
            .iter()
            .find(|r| !ids.insert(r.instrument_id.as_str()))
        {
            return Err(Error::InvalidInput(format!(
                "duplicate instrument id {:?}",
                r.instrument_id
            )));
        }
        Ok(())
    }

    /// Additional checks for training data: labels everywhere, both classes.
    pub fn validate_training(&self) -> Result<()> {
        self.validate()?;
        if self.rows.len() < 2 {
            return Err(Error::InvalidInput("training needs at least 2 rows".into()));
        }
        let labels = self.labels()?;
        if !labels.contains(&Label::Reduced) || !labels.contains(&Label::Unreduced) {
            return Err(Error::InvalidInput(
                "training data must contain both classes".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, FeatureVector::len)
    }

    pub fn names(&self) -> &[String] {
        self.rows.first().map_or(&[], |r| &r.names)
    }

    pub fn labels(&self) -> Result<Vec<Label>> {
        self.rows
            .iter()
            .map(|r| {
                r.label.ok_or_else(|| {
                    Error::InvalidInput(format!("{}: missing label", r.instrument_id))
                })
            })
            .collect()
    }

    pub fn values(&self) -> Vec<&[f64]> {
        self.rows.iter().map(|r| r.values.as_slice()).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// CSV: `instrument_id`, one column per feature, then `label`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["instrument_id".to_string()];
        header.extend(self.names().iter().cloned());
        header.push("label".into());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.instrument_id.clone()];
            rec.extend(r.values.iter().map(|v| v.to_string()));
            rec.push(r.label.map_or(String::new(), |l| l.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols.len() < 2 || cols[0] != "instrument_id" || cols[cols.len() - 1] != "label" {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: "expected instrument_id,<features...>,label header".into(),
            });
        }
        let names: Vec<String> = cols[1..cols.len() - 1]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut rows = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            let perr = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: k + 2,
                message,
            };
            let values = (1..rec.len() - 1)
                .map(|i| rec[i].parse::<f64>().map_err(|e| perr(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            let label = match rec[rec.len() - 1].trim() {
                "" => None,
                l => Some(l.parse::<Label>().map_err(|e| perr(e.to_string()))?),
            };
            rows.push(FeatureVector {
                instrument_id: rec[0].to_string(),
                names: names.clone(),
                values,
                label,
            });
        }
        FeatureMatrix::new(rows)
    }
}
