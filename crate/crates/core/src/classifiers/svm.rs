//! Class-weighted soft-margin SVM trained by SMO on a precomputed kernel.
//!
//! The dual is
//!   min 1/2 a'Qa - e'a   s.t.  0 <= a_i <= C_i,  y'a = 0,
//! with `Q_ij = y_i y_j K(x_i, x_j)`. Working pairs are the maximal violating
//! pair (first-order selection); the two-variable update and the bias follow
//! the usual libsvm formulas.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureVector};
use crate::label::Label;

const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf,
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kernel::Linear => "linear",
            Kernel::Rbf => "rbf",
        })
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Kernel::Linear),
            "rbf" => Ok(Kernel::Rbf),
            _ => Err(Error::InvalidInput(format!("unknown kernel {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeighting {
    /// `w(c) = n / (2 n_c)`.
    Balanced,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub kernel: Kernel,
    #[serde(rename = "C")]
    pub c: f64,
    /// RBF width; `None` means `1 / (d * mean feature variance)` of the
    /// training set.
    #[serde(default)]
    pub gamma: Option<f64>,
    pub class_weighting: ClassWeighting,
    pub tolerance: f64,
    /// Consecutive iterations without dual progress before giving up.
    /// `None` means `10 * n`.
    #[serde(default)]
    pub max_passes: Option<usize>,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            kernel: Kernel::Linear,
            c: 1.0,
            gamma: None,
            class_weighting: ClassWeighting::Balanced,
            tolerance: 1e-3,
            max_passes: None,
        }
    }
}

impl SvmConfig {
    pub fn linear(c: f64) -> Self {
        SvmConfig {
            c,
            ..Default::default()
        }
    }

    pub fn rbf(c: f64, gamma: Option<f64>) -> Self {
        SvmConfig {
            kernel: Kernel::Rbf,
            c,
            gamma,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("C must be positive, got {}", self.c)));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("gamma must be positive, got {g}")));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Per-class multipliers of C.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub reduced: f64,
    pub unreduced: f64,
}

impl ClassWeights {
    pub fn compute(labels: &[Label], weighting: ClassWeighting) -> Result<Self> {
        let n = labels.len() as f64;
        let pos = labels.iter().filter(|l| l.is_positive()).count() as f64;
        let neg = n - pos;
        if pos == 0.0 || neg == 0.0 {
            return Err(Error::InvalidInput(
                "training data must contain both classes".into(),
            ));
        }
        Ok(match weighting {
            ClassWeighting::Balanced => ClassWeights {
                reduced: n / (2.0 * pos),
                unreduced: n / (2.0 * neg),
            },
            ClassWeighting::None => ClassWeights {
                reduced: 1.0,
                unreduced: 1.0,
            },
        })
    }

    pub fn of(&self, label: Label) -> f64 {
        match label {
            Label::Reduced => self.reduced,
            Label::Unreduced => self.unreduced,
        }
    }
}

/// Symmetric matrix of plain dot products `<x_i, x_j>`. Both kernels are
/// evaluated from it, so one Gram serves every fold of a cross-validation.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearGram {
    n: usize,
    data: Vec<f64>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearGram {
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = dot(rows[i], rows[j]);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        LinearGram { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// `1 / (d * mean feature variance)` over the rows in `idx`, written in
    /// terms of dot products: the summed per-feature variance is
    /// `mean_i <x_i, x_i> - |mean_i x_i|^2`. Falls back to 1 when the
    /// rows are identical.
    pub fn auto_gamma(&self, idx: &[usize]) -> f64 {
        let m = idx.len() as f64;
        let diag: f64 = idx.iter().map(|&i| self.get(i, i)).sum::<f64>() / m;
        let all: f64 = idx
            .iter()
            .map(|&i| idx.iter().map(|&j| self.get(i, j)).sum::<f64>())
            .sum::<f64>()
            / (m * m);
        let total_var = diag - all;
        if total_var > 1e-12 * diag.abs().max(1e-300) {
            1.0 / total_var
        } else {
            1.0
        }
    }

    fn kernel(&self, kernel: Kernel, gamma: f64, i: usize, j: usize) -> f64 {
        kernel_from_dots(
            kernel,
            gamma,
            self.get(i, i),
            self.get(j, j),
            self.get(i, j),
        )
    }
}

pub(crate) fn kernel_from_dots(kernel: Kernel, gamma: f64, ii: f64, jj: f64, ij: f64) -> f64 {
    match kernel {
        Kernel::Linear => ij,
        Kernel::Rbf => (-gamma * (ii + jj - 2.0 * ij).max(0.0)).exp(),
    }
}

/// Output of the dual solver.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Decision function is `sum_i alpha_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final value of `1/2 a'Qa - e'a`.
    pub objective: f64,
}

/// SMO on a dense kernel matrix `k` (row-major, n x n) with labels `y` in
/// {+1, -1} and per-sample upper bounds.
pub fn solve_dual(
    k: &[f64],
    y: &[f64],
    upper: &[f64],
    tolerance: f64,
    max_passes: usize,
) -> DualSolution {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * k[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let objective = |alpha: &[f64], grad: &[f64]| -> f64 {
        0.5 * alpha
            .iter()
            .zip(grad)
            .map(|(a, g)| a * (g - 1.0))
            .sum::<f64>()
    };
    let max_iter = (1000 * n).max(100_000);
    let mut best = 0.0f64;
    let mut stall = 0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // Maximal violating pair.
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..n {
            let v = -y[t] * grad[t];
            let up = if y[t] > 0.0 {
                alpha[t] < upper[t]
            } else {
                alpha[t] > 0.0
            };
            let low = if y[t] > 0.0 {
                alpha[t] > 0.0
            } else {
                alpha[t] < upper[t]
            };
            if up && v > gmax {
                gmax = v;
                i = t;
            }
            if low && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (ci, cj) = (upper[i], upper[j]);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }

        let f = objective(&alpha, &grad);
        if f < best - 1e-15 * best.abs().max(1.0) {
            best = f;
            stall = 0;
        } else {
            stall += 1;
            if stall > max_passes {
                break;
            }
        }
    }
    if !converged {
        log::warn!(
            "SMO stopped after {iterations} iterations without reaching tolerance {tolerance}"
        );
    }

    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= upper[t] {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    };
    DualSolution {
        objective: objective(&alpha, &grad),
        alpha,
        rho,
        iterations,
        converged,
    }
}

/// Dual solution for the training subset `idx` of a Gram, with kernel
/// parameters resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct GramFit {
    pub idx: Vec<usize>,
    pub coef: Vec<f64>,
    pub rho: f64,
    pub gamma: f64,
    pub kernel: Kernel,
    pub weights: ClassWeights,
    pub solution: DualSolution,
}

impl GramFit {
    /// Decision value for Gram row `j`.
    pub fn decision(&self, gram: &LinearGram, j: usize) -> f64 {
        self.idx
            .iter()
            .zip(&self.coef)
            .filter(|(_, &c)| c != 0.0)
            .map(|(&i, &c)| c * gram.kernel(self.kernel, self.gamma, i, j))
            .sum::<f64>()
            - self.rho
    }
}

/// Train on rows `idx` of `gram` with the given labels (one per index).
pub fn svm_fit_gram(
    gram: &LinearGram,
    idx: &[usize],
    labels: &[Label],
    cfg: &SvmConfig,
) -> Result<GramFit> {
    cfg.validate()?;
    if idx.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: idx.len(),
            actual: labels.len(),
        });
    }
    let weights = ClassWeights::compute(labels, cfg.class_weighting)?;
    let gamma = match cfg.kernel {
        Kernel::Linear => 0.0,
        Kernel::Rbf => cfg.gamma.unwrap_or_else(|| gram.auto_gamma(idx)),
    };
    let n = idx.len();
    let mut k = vec![0.0; n * n];
    for a in 0..n {
        for b in a..n {
            let v = gram.kernel(cfg.kernel, gamma, idx[a], idx[b]);
            k[a * n + b] = v;
            k[b * n + a] = v;
        }
    }
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let upper: Vec<f64> = labels.iter().map(|&l| cfg.c * weights.of(l)).collect();
    let solution = solve_dual(
        &k,
        &y,
        &upper,
        cfg.tolerance,
        cfg.max_passes.unwrap_or(10 * n),
    );
    Ok(GramFit {
        idx: idx.to_vec(),
        coef: solution.alpha.iter().zip(&y).map(|(a, y)| a * y).collect(),
        rho: solution.rho,
        gamma,
        kernel: cfg.kernel,
        weights,
        solution,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    /// Resolved RBF width (0 for the linear kernel).
    pub gamma: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub class_weights: ClassWeights,
    pub feature_names: Vec<String>,
    /// Row index in the training matrix of each support vector.
    pub support_indices: Vec<usize>,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Decision value and predicted class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub decision: f64,
}

impl Prediction {
    /// Non-negative decision values predict the positive class.
    pub fn from_decision(decision: f64) -> Self {
        Prediction {
            label: if decision >= 0.0 {
                Label::Reduced
            } else {
                Label::Unreduced
            },
            decision,
        }
    }
}

pub fn svm_train(data: &FeatureMatrix, cfg: &SvmConfig) -> Result<SvmModel> {
    data.validate_training()?;
    let labels = data.labels()?;
    let rows = data.values();
    let gram = LinearGram::from_rows(&rows);
    let idx: Vec<usize> = (0..data.len()).collect();
    let fit = svm_fit_gram(&gram, &idx, &labels, cfg)?;
    let sv: Vec<usize> = (0..fit.coef.len())
        .filter(|&i| fit.coef[i] != 0.0)
        .collect();
    Ok(SvmModel {
        kernel: cfg.kernel,
        gamma: fit.gamma,
        c: cfg.c,
        class_weights: fit.weights,
        feature_names: data.names().to_vec(),
        support_vectors: sv.iter().map(|&i| rows[i].to_vec()).collect(),
        dual_coef: sv.iter().map(|&i| fit.coef[i]).collect(),
        support_indices: sv,
        bias: -fit.rho,
        converged: fit.solution.converged,
        iterations: fit.solution.iterations,
    })
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let xx = dot(x, x);
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(s, c)| c * kernel_from_dots(self.kernel, self.gamma, dot(s, s), xx, dot(s, x)))
            .sum::<f64>()
            + self.bias)
    }
}

pub fn svm_predict(model: &SvmModel, v: &FeatureVector) -> Result<Prediction> {
    model
        .decision_value(&v.values)
        .map(Prediction::from_decision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(points: &[(&[f64], Label)]) -> FeatureMatrix {
        FeatureMatrix::new(
            points
                .iter()
                .enumerate()
                .map(|(i, (x, l))| {
                    FeatureVector::new(
                        format!("p{i}"),
                        (0..x.len()).map(|k| format!("f{k}")).collect(),
                        x.to_vec(),
                    )
                    .with_label(*l)
                })
                .collect(),
        )
        .unwrap()
    }

    use Label::{Reduced as R, Unreduced as U};

    #[test]
    fn hard_margin_square() {
        // Separable along x; maximal margin line x = 1, margin 1.
        let m = matrix(&[
            (&[0.0, 0.0], U),
            (&[0.0, 1.0], U),
            (&[2.0, 0.0], R),
            (&[2.0, 1.0], R),
        ]);
        let cfg = SvmConfig {
            c: 1e6,
            class_weighting: ClassWeighting::None,
            tolerance: 1e-8,
            ..Default::default()
        };
        let model = svm_train(&m, &cfg).unwrap();
        let mut w = [0.0; 2];
        for (s, c) in model.support_vectors.iter().zip(&model.dual_coef) {
            w[0] += c * s[0];
            w[1] += c * s[1];
        }
        let norm = (w[0] * w[0] + w[1] * w[1]).sqrt();
        assert!((1.0 / norm - 1.0).abs() < 1e-4, "margin {}", 1.0 / norm);
        assert!((model.bias + w[0]).abs() < 1e-4);
        for r in &m.rows {
            assert_eq!(svm_predict(&model, r).unwrap().label, r.label.unwrap());
        }
    }

    #[test]
    fn xor_with_rbf() {
        let m = matrix(&[
            (&[0.0, 0.0], U),
            (&[1.0, 1.0], U),
            (&[0.0, 1.0], R),
            (&[1.0, 0.0], R),
        ]);
        for gamma in [0.1, 1.0, 10.0] {
            let model = svm_train(&m, &SvmConfig::rbf(1e4, Some(gamma))).unwrap();
            for r in &m.rows {
                assert_eq!(
                    svm_predict(&model, r).unwrap().label,
                    r.label.unwrap(),
                    "gamma {gamma}"
                );
            }
        }
    }

    #[test]
    fn free_support_vectors_sit_on_the_margin() {
        let m = matrix(&[
            (&[0.0, 0.3], U),
            (&[0.5, 1.0], U),
            (&[-1.0, 0.0], U),
            (&[2.0, 0.1], R),
            (&[2.5, 1.5], R),
            (&[1.2, 0.4], R),
        ]);
        let cfg = SvmConfig {
            c: 10.0,
            tolerance: 1e-6,
            ..Default::default()
        };
        let model = svm_train(&m, &cfg).unwrap();
        for (k, &i) in model.support_indices.iter().enumerate() {
            let bound = cfg.c * model.class_weights.of(m.rows[i].label.unwrap());
            if model.dual_coef[k].abs() < bound - 1e-9 {
                let d = model.decision_value(&m.rows[i].values).unwrap();
                assert!((d.abs() - 1.0).abs() < 1e-4, "{d}");
            }
        }
    }

    #[test]
    fn balanced_weights() {
        let l = [R, R, R, U];
        let w = ClassWeights::compute(&l, ClassWeighting::Balanced).unwrap();
        assert!((w.reduced - 4.0 / 6.0).abs() < 1e-15);
        assert!((w.unreduced - 2.0).abs() < 1e-15);
        assert!(ClassWeights::compute(&[R, R], ClassWeighting::Balanced).is_err());
    }

    #[test]
    fn auto_gamma_is_inverse_total_variance() {
        let rows: Vec<&[f64]> = vec![&[0.0, 0.0], &[2.0, 0.0], &[0.0, 4.0], &[2.0, 4.0]];
        let g = LinearGram::from_rows(&rows);
        // Per-feature variances 1 and 4.
        assert!((g.auto_gamma(&[0, 1, 2, 3]) - 1.0 / 5.0).abs() < 1e-12);
        assert_eq!(g.auto_gamma(&[0, 0]), 1.0);
    }

    #[test]
    fn dimension_mismatch() {
        let m = matrix(&[(&[0.0], U), (&[1.0], R)]);
        let model = svm_train(&m, &SvmConfig::default()).unwrap();
        let v = FeatureVector::new("x", vec!["a".into(), "b".into()], vec![0.0, 1.0]);
        assert!(matches!(
            svm_predict(&model, &v),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let m = matrix(&[(&[0.0], U), (&[1.0], R), (&[3.0], R)]);
        let model = svm_train(&m, &SvmConfig::rbf(2.0, None)).unwrap();
        let back: SvmModel = serde_json::from_str(&serde_json::to_string(&model).unwrap()).unwrap();
        assert_eq!(back, model);
    }

    proptest! {
        #[test]
        fn dual_feasible_and_deterministic(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 4..12),
            c in 0.01f64..100.0,
            rbf in any::<bool>(),
        ) {
            let n = pts.len();
            let labels: Vec<Label> = (0..n).map(|i| if i % 3 == 0 { U } else { R }).collect();
            let rows: Vec<Vec<f64>> = pts.iter().map(|&(a, b)| vec![a, b]).collect();
            let m = FeatureMatrix::new((0..n).map(|i| {
                FeatureVector::new(format!("p{i}"), vec!["a".into(), "b".into()], rows[i].clone())
                    .with_label(labels[i])
            }).collect()).unwrap();
            let cfg = if rbf { SvmConfig::rbf(c, None) } else { SvmConfig::linear(c) };
            let a = svm_train(&m, &cfg).unwrap();
            let b = svm_train(&m, &cfg).unwrap();
            prop_assert_eq!(&a, &b);
            let mut sum = 0.0;
            for (k, &i) in a.support_indices.iter().enumerate() {
                let bound = c * a.class_weights.of(labels[i]);
                prop_assert!(a.dual_coef[k].abs() <= bound * (1.0 + 1e-12));
                sum += a.dual_coef[k];
            }
            prop_assert!(sum.abs() < 1e-8);
        }
    }
}
