use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;

/// Confusion counts with reduced as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn from_labels(truth: &[Label], pred: &[Label]) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                actual: pred.len(),
            });
        }
        let mut c = Confusion::default();
        for (t, p) in truth.iter().zip(pred) {
            match (t.is_positive(), p.is_positive()) {
                (true, true) => c.tp += 1,
                (true, false) => c.fn_ += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.tn + self.fp
    }

    pub fn tpr(&self) -> Result<f64> {
        match self.positives() {
            0 => Err(Error::InvalidInput(
                "no positive (reduced) instance in truth".into(),
            )),
            p => Ok(self.tp as f64 / p as f64),
        }
    }

    pub fn tnr(&self) -> Result<f64> {
        match self.negatives() {
            0 => Err(Error::InvalidInput(
                "no negative (unreduced) instance in truth".into(),
            )),
            n => Ok(self.tn as f64 / n as f64),
        }
    }

    pub fn balanced_accuracy(&self) -> Result<f64> {
        Ok((self.tpr()? + self.tnr()?) / 2.0)
    }
}

/// `(TPR + TNR) / 2`; both classes must occur in `truth`.
pub fn balanced_accuracy(truth: &[Label], pred: &[Label]) -> Result<f64> {
    Confusion::from_labels(truth, pred)?.balanced_accuracy()
}
