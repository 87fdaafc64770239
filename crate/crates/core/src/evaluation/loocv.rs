//! Nested per-instrument leave-one-out cross-validation.
//!
//! For every held-out instrument T, each grid value is scored by an inner
//! leave-one-out over the other n-1 instruments; the best value (ties broken
//! by the min/max policy) is used to train on all n-1 and predict T.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{
    svm_fit_gram, tree_fit_rows, LinearGram, Prediction, SvmConfig, TreeConfig,
};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::label::Label;

use super::metrics::Confusion;

/// Decade-spaced C grid `10^-4 .. 10^4`.
pub const C_GRID: [f64; 9] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    /// Smallest C (strongest regularisation) or smallest depth.
    Min,
    /// Largest C or largest depth.
    Max,
}

impl fmt::Display for TieBreak {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TieBreak::Min => "min",
            TieBreak::Max => "max",
        })
    }
}

impl FromStr for TieBreak {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(TieBreak::Min),
            "max" => Ok(TieBreak::Max),
            _ => Err(Error::InvalidInput(format!("unknown tie-break {s:?}"))),
        }
    }
}

/// Hyperparameter values searched by the inner loop, strictly increasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HyperGrid {
    C(Vec<f64>),
    Depth(Vec<usize>),
}

impl HyperGrid {
    pub fn c_decades() -> Self {
        HyperGrid::C(C_GRID.to_vec())
    }

    pub fn depths(lo: usize, hi: usize) -> Self {
        HyperGrid::Depth((lo..=hi).collect())
    }

    pub fn len(&self) -> usize {
        match self {
            HyperGrid::C(v) => v.len(),
            HyperGrid::Depth(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, i: usize) -> f64 {
        match self {
            HyperGrid::C(v) => v[i],
            HyperGrid::Depth(v) => v[i] as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let increasing = match self {
            HyperGrid::C(v) => v.iter().all(|c| *c > 0.0) && v.windows(2).all(|w| w[0] < w[1]),
            HyperGrid::Depth(v) => v.iter().all(|d| *d >= 1) && v.windows(2).all(|w| w[0] < w[1]),
        };
        if self.is_empty() || !increasing {
            return Err(Error::Config(format!(
                "hyperparameter grid must be nonempty, positive and strictly increasing: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Model family with its fixed settings; the grid supplies C or max depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Learner {
    Svm(SvmConfig),
    Tree(TreeConfig),
}

impl Learner {
    pub fn describe(&self) -> String {
        match self {
            Learner::Svm(c) => format!("svm-{}", c.kernel),
            Learner::Tree(t) => format!("tree-{}", t.criterion),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Inner,
    Final,
}

/// One trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub fold: usize,
    pub held_out: String,
    pub stage: Stage,
    pub hyper: f64,
    /// Instrument predicted by an inner model.
    pub validation: Option<String>,
    pub training_ids: Vec<String>,
    /// Inner balanced accuracy of `hyper` in this fold.
    pub inner_score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterPrediction {
    pub instrument_id: String,
    pub truth: Label,
    pub predicted: Label,
    /// SVM decision value; absent for trees.
    pub decision: Option<f64>,
    pub chosen: f64,
    /// Inner balanced accuracy per grid value (`None` if undefined).
    pub inner_scores: Vec<Option<f64>>,
}

/// Settings that identify one evaluation; filled in further by the
/// experiment runner.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportFingerprint {
    pub feature_source: String,
    pub resampling: Option<String>,
    pub normalize: bool,
    pub model: String,
    pub tie_break: String,
    pub grid: Vec<f64>,
    /// `"auto"` or the fixed RBF gamma.
    pub gamma: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fingerprint: ReportFingerprint,
    pub predictions: Vec<OuterPrediction>,
    pub confusion: Confusion,
    pub tpr: f64,
    pub tnr: f64,
    pub balanced_accuracy: f64,
    pub trainings: usize,
}

/// Report plus one audit record per trained model, in fold order.
#[derive(Clone, Debug, PartialEq)]
pub struct LoocvRun {
    pub report: EvalReport,
    pub audit: Vec<AuditRecord>,
}

/// Shared, read-only state of one cross-validation.
struct Context<'a> {
    rows: Vec<&'a [f64]>,
    names: &'a [String],
    labels: Vec<Label>,
    learner: &'a Learner,
    grid: &'a HyperGrid,
    gram: Option<LinearGram>,
}

impl Context<'_> {
    /// Train on `train` once per grid value and predict `target`.
    fn fit_predict(&self, train: &[usize], target: usize) -> Result<Vec<Prediction>> {
        let labels: Vec<Label> = train.iter().map(|&i| self.labels[i]).collect();
        match (self.learner, self.grid) {
            (Learner::Svm(cfg), HyperGrid::C(cs)) => {
                let gram = self.gram.as_ref().expect("gram built for SVM");
                cs.iter()
                    .map(|&c| {
                        let cfg = SvmConfig { c, ..cfg.clone() };
                        let fit = svm_fit_gram(gram, train, &labels, &cfg)?;
                        Ok(Prediction::from_decision(fit.decision(gram, target)))
                    })
                    .collect()
            }
            (Learner::Tree(cfg), HyperGrid::Depth(ds)) => {
                // Greedy growth is top-down: one tree at the largest depth,
                // truncated, gives every shallower model.
                let cfg = TreeConfig {
                    max_depth: *ds.last().expect("nonempty grid"),
                    ..cfg.clone()
                };
                let rows = train.iter().map(|&i| self.rows[i]).collect();
                let tree = tree_fit_rows(rows, labels, self.names.to_vec(), &cfg)?;
                ds.iter()
                    .map(|&d| {
                        let label = tree.predict_truncated(self.rows[target], d)?;
                        Ok(Prediction {
                            label,
                            decision: f64::NAN,
                        })
                    })
                    .collect()
            }
            _ => Err(Error::Config(format!(
                "grid {:?} does not match learner {}",
                self.grid,
                self.learner.describe()
            ))),
        }
    }

    fn both_classes(&self, idx: &[usize]) -> bool {
        let pos = idx
            .iter()
            .filter(|&&i| self.labels[i].is_positive())
            .count();
        pos > 0 && pos < idx.len()
    }
}

struct FoldResult {
    prediction: OuterPrediction,
    audit: Vec<AuditRecord>,
}

fn select(scores: &[Option<f64>], tie_break: TieBreak) -> usize {
    let best = scores
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let candidates: Vec<usize> = if best.is_finite() {
        (0..scores.len())
            .filter(|&g| scores[g] == Some(best))
            .collect()
    } else {
        (0..scores.len()).collect()
    };
    match tie_break {
        TieBreak::Min => candidates[0],
        TieBreak::Max => candidates[candidates.len() - 1],
    }
}

fn outer_fold(ctx: &Context, ids: &[String], t: usize, tie_break: TieBreak) -> Result<FoldResult> {
    let n = ctx.labels.len();
    let train: Vec<usize> = (0..n).filter(|&i| i != t).collect();
    let g_len = ctx.grid.len();
    let mut inner: Vec<Vec<(usize, Label)>> = vec![Vec::new(); g_len];
    let mut trained: Vec<(usize, Vec<usize>)> = Vec::new();
    for &v in &train {
        let inner_train: Vec<usize> = train.iter().copied().filter(|&i| i != v).collect();
        if !ctx.both_classes(&inner_train) {
            log::warn!(
                "fold {t}: inner fold leaving out {} has a single class; skipped",
                ids[v]
            );
            continue;
        }
        let preds = ctx.fit_predict(&inner_train, v)?;
        for (g, p) in preds.iter().enumerate() {
            inner[g].push((v, p.label));
        }
        trained.push((v, inner_train));
    }
    let scores: Vec<Option<f64>> = inner
        .iter()
        .map(|preds| {
            let truth: Vec<Label> = preds.iter().map(|&(v, _)| ctx.labels[v]).collect();
            let pred: Vec<Label> = preds.iter().map(|&(_, l)| l).collect();
            Confusion::from_labels(&truth, &pred)
                .and_then(|c| c.balanced_accuracy())
                .ok()
        })
        .collect();
    if scores.iter().all(Option::is_none) {
        log::warn!("fold {t}: no inner score is defined; choosing by tie-break alone");
    }
    let chosen = select(&scores, tie_break);

    let mut audit = Vec::with_capacity(g_len * trained.len() + 1);
    for g in 0..g_len {
        for (v, inner_train) in &trained {
            audit.push(AuditRecord {
                fold: t,
                held_out: ids[t].clone(),
                stage: Stage::Inner,
                hyper: ctx.grid.value(g),
                validation: Some(ids[*v].clone()),
                training_ids: inner_train.iter().map(|&i| ids[i].clone()).collect(),
                inner_score: scores[g],
            });
        }
    }

    let final_pred = ctx.fit_predict(&train, t)?[chosen];
    audit.push(AuditRecord {
        fold: t,
        held_out: ids[t].clone(),
        stage: Stage::Final,
        hyper: ctx.grid.value(chosen),
        validation: None,
        training_ids: train.iter().map(|&i| ids[i].clone()).collect(),
        inner_score: scores[chosen],
    });
    Ok(FoldResult {
        prediction: OuterPrediction {
            instrument_id: ids[t].clone(),
            truth: ctx.labels[t],
            predicted: final_pred.label,
            decision: final_pred
                .decision
                .is_finite()
                .then_some(final_pred.decision),
            chosen: ctx.grid.value(chosen),
            inner_scores: scores,
        },
        audit,
    })
}

/// Run the nested cross-validation. Outer folds run on the current rayon
/// pool; results are assembled by fold index.
pub fn nested_loocv(
    data: &FeatureMatrix,
    learner: &Learner,
    grid: &HyperGrid,
    tie_break: TieBreak,
) -> Result<LoocvRun> {
    data.validate_training()?;
    grid.validate()?;
    let labels = data.labels()?;
    let n = labels.len();
    let pos = labels.iter().filter(|l| l.is_positive()).count();
    if n < 3 || pos < 2 || n - pos < 2 {
        return Err(Error::InvalidInput(format!(
            "nested LOOCV needs n >= 3 and at least 2 instruments per class (n = {n}, reduced = {pos})"
        )));
    }
    match (learner, grid) {
        (Learner::Svm(c), HyperGrid::C(_)) => c.validate()?,
        (Learner::Tree(t), HyperGrid::Depth(_)) => t.validate()?,
        _ => {
            return Err(Error::Config(format!(
                "grid {grid:?} does not match learner {}",
                learner.describe()
            )))
        }
    }
    let rows = data.values();
    let gram = matches!(learner, Learner::Svm(_)).then(|| LinearGram::from_rows(&rows));
    let ctx = Context {
        rows,
        names: data.names(),
        labels,
        learner,
        grid,
        gram,
    };
    let ids: Vec<String> = data.rows.iter().map(|r| r.instrument_id.clone()).collect();
    let folds: Vec<FoldResult> = (0..n)
        .into_par_iter()
        .map(|t| outer_fold(&ctx, &ids, t, tie_break))
        .collect::<Result<_>>()?;

    let mut predictions = Vec::with_capacity(n);
    let mut audit = Vec::new();
    for f in folds {
        predictions.push(f.prediction);
        audit.extend(f.audit);
    }
    let truth: Vec<Label> = predictions.iter().map(|p| p.truth).collect();
    let pred: Vec<Label> = predictions.iter().map(|p| p.predicted).collect();
    let confusion = Confusion::from_labels(&truth, &pred)?;
    let (tpr, tnr) = (confusion.tpr()?, confusion.tnr()?);
    let gamma = match learner {
        Learner::Svm(c) if c.kernel == crate::classifiers::Kernel::Rbf => {
            Some(c.gamma.map_or("auto".to_string(), |g| g.to_string()))
        }
        _ => None,
    };
    Ok(LoocvRun {
        report: EvalReport {
            fingerprint: ReportFingerprint {
                feature_source: String::new(),
                resampling: None,
                normalize: false,
                model: learner.describe(),
                tie_break: tie_break.to_string(),
                grid: (0..grid.len()).map(|g| grid.value(g)).collect(),
                gamma,
            },
            predictions,
            confusion,
            tpr,
            tnr,
            balanced_accuracy: (tpr + tnr) / 2.0,
            trainings: audit.len(),
        },
        audit,
    })
}
