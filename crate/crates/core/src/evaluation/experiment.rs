//! Experiment matrices: feature sources x models x tie-break policies.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{
    ClassWeighting, Criterion, Kernel, SvmConfig, TreeConfig, PROFILE_DEPTH_RANGE,
    RAW_MAP_DEPTH_RANGE,
};
use crate::contours::{
    profile_from_map, read_profile_csv, ParameterProfile, DEFAULT_LEVEL_STEP_MM,
};
use crate::elevation::{
    absolute_global_box, compute_elevation_map, crop_zone_of_interest, flatten, normalize_heights,
    parse_grid, read_map_csv, resample, ElevationMap, ResampleMode, ResampleSpec,
};
use crate::error::{Error, Result};
use crate::features::{
    compose_feature_set, pca_fit, pca_project, FeatureMatrix, FeatureSet, MaskedMatrix,
};
use crate::label::Label;
use crate::synthgen::SyntheticCorpus;

use super::loocv::{nested_loocv, AuditRecord, EvalReport, HyperGrid, Learner, TieBreak};

/// Entry of a dataset `index.json`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub instrument_id: String,
    pub label: Option<Label>,
    pub file: String,
}

pub fn read_index(dir: &Path) -> Result<Vec<IndexEntry>> {
    let path = dir.join("index.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_index(dir: &Path, entries: &[IndexEntry]) -> Result<()> {
    let path = dir.join("index.json");
    let text = serde_json::to_string_pretty(entries)? + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Instruments with their labels and, when present, fine cropped maps and
/// parameter profiles.
///
/// On disk: `<root>/maps/` and `<root>/profiles/`, each holding `<id>.csv`
/// files and an `index.json`.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub labels: Vec<Label>,
    pub maps: Option<Vec<ElevationMap>>,
    pub profiles: Option<Vec<ParameterProfile>>,
}

impl Dataset {
    /// In-memory dataset from a synthetic corpus: cropped fine maps at
    /// `spacing` and their contour profiles at `level_step`.
    pub fn from_corpus(corpus: &SyntheticCorpus, spacing: f64, level_step: f64) -> Result<Self> {
        let pairs = corpus
            .meshes
            .par_iter()
            .map(|m| {
                let map = crop_zone_of_interest(&compute_elevation_map(m, spacing)?)?;
                let profile = profile_from_map(&map, level_step)?;
                Ok((map, profile))
            })
            .collect::<Result<Vec<_>>>()?;
        let (maps, profiles) = pairs.into_iter().unzip();
        Ok(Dataset {
            ids: corpus
                .manifest
                .entries
                .iter()
                .map(|e| e.instrument_id.clone())
                .collect(),
            labels: corpus.manifest.entries.iter().map(|e| e.label).collect(),
            maps: Some(maps),
            profiles: Some(profiles),
        })
    }

    pub fn load(root: &Path, want_maps: bool, want_profiles: bool) -> Result<Self> {
        let mut ds = Dataset::default();
        let mut load_dir = |sub: &str| -> Result<Vec<IndexEntry>> {
            let dir = root.join(sub);
            let idx = read_index(&dir)?;
            let ids: Vec<String> = idx.iter().map(|e| e.instrument_id.clone()).collect();
            let labels = idx
                .iter()
                .map(|e| {
                    e.label.ok_or_else(|| {
                        Error::InvalidInput(format!("{}: unlabeled instrument", e.instrument_id))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if ds.ids.is_empty() {
                ds.ids = ids;
                ds.labels = labels;
            } else if ds.ids != ids || ds.labels != labels {
                return Err(Error::InvalidInput(format!(
                    "{}: index differs from the other dataset directory",
                    dir.display()
                )));
            }
            Ok(idx)
        };
        if want_maps {
            let idx = load_dir("maps")?;
            let maps = idx
                .iter()
                .map(|e| {
                    let mut m = read_map_csv(root.join("maps").join(&e.file))?;
                    m.instrument_id = e.instrument_id.clone();
                    Ok(m)
                })
                .collect::<Result<Vec<_>>>()?;
            ds.maps = Some(maps);
        }
        if want_profiles {
            let idx = load_dir("profiles")?;
            let profiles = idx
                .iter()
                .map(|e| {
                    let mut p = read_profile_csv(
                        root.join("profiles").join(&e.file),
                        DEFAULT_LEVEL_STEP_MM,
                    )?;
                    p.instrument_id = e.instrument_id.clone();
                    Ok(p)
                })
                .collect::<Result<Vec<_>>>()?;
            ds.profiles = Some(profiles);
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

fn default_mode() -> ResampleMode {
    ResampleMode::Relative
}

/// Where a cell's feature vectors come from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureSource {
    /// Engineered β-profile features.
    Preset { id: String },
    /// Resampled elevation maps, `grid` as `"WxL"`.
    Resample {
        #[serde(default = "default_mode")]
        mode: ResampleMode,
        grid: String,
    },
    /// Leading principal components of resampled maps.
    Pca {
        #[serde(default = "default_mode")]
        mode: ResampleMode,
        grid: String,
        k: usize,
    },
}

impl FeatureSource {
    pub fn validate(&self) -> Result<()> {
        match self {
            FeatureSource::Preset { id } => FeatureSet::by_id(id).map(|_| ()),
            FeatureSource::Resample { grid, .. } => parse_grid(grid).map(|_| ()),
            FeatureSource::Pca { mode, grid, k } => {
                if *mode == ResampleMode::Absolute {
                    return Err(Error::Config(
                        "PCA is applied only to the relative resampled grids; \
                         PCA with absolute resampling is rejected"
                            .into(),
                    ));
                }
                if *k == 0 {
                    return Err(Error::Config("PCA needs k >= 1".into()));
                }
                parse_grid(grid).map(|_| ())
            }
        }
    }

    pub fn needs_maps(&self) -> bool {
        !matches!(self, FeatureSource::Preset { .. })
    }

    /// Report table this source belongs to.
    pub fn table(&self) -> &'static str {
        match self {
            FeatureSource::Resample {
                mode: ResampleMode::Relative,
                ..
            } => "relative",
            FeatureSource::Resample {
                mode: ResampleMode::Absolute,
                ..
            } => "absolute",
            FeatureSource::Preset { .. } => "engineered",
            FeatureSource::Pca { .. } => "pca",
        }
    }

    /// Row label in report tables.
    pub fn label(&self) -> String {
        match self {
            FeatureSource::Preset { id } => {
                FeatureSet::by_id(id).map_or(id.clone(), |s| s.label.to_string())
            }
            FeatureSource::Resample { mode, grid } => {
                let (w, l) = parse_grid(grid).unwrap_or((0, 0));
                format!("{w} × {l} {mode} grid resampling")
            }
            FeatureSource::Pca { grid, k, .. } => {
                let (w, l) = parse_grid(grid).unwrap_or((0, 0));
                format!("PCA k = {k} ({w} × {l} relative)")
            }
        }
    }

    fn resampling(&self) -> Option<String> {
        match self {
            FeatureSource::Preset { .. } => None,
            FeatureSource::Resample { mode, grid } | FeatureSource::Pca { mode, grid, .. } => {
                Some(format!("{mode} {grid}"))
            }
        }
    }
}

fn labeled(mut m: FeatureMatrix, labels: &[Label]) -> FeatureMatrix {
    for (r, &l) in m.rows.iter_mut().zip(labels) {
        r.label = Some(l);
    }
    m
}

fn resampled_maps(
    maps: &[ElevationMap],
    mode: ResampleMode,
    grid: &str,
    normalize: bool,
) -> Result<(Vec<ElevationMap>, ResampleSpec)> {
    let (w, l) = parse_grid(grid)?;
    let base: Vec<ElevationMap> = if normalize {
        maps.iter().map(normalize_heights).collect::<Result<_>>()?
    } else {
        maps.to_vec()
    };
    let spec = match mode {
        ResampleMode::Relative => ResampleSpec::relative(w, l),
        ResampleMode::Absolute => ResampleSpec::absolute(w, l, absolute_global_box(&base)?),
    };
    let out = base
        .iter()
        .map(|m| resample(m, &spec))
        .collect::<Result<_>>()?;
    Ok((out, spec))
}

/// Build the labeled feature matrix of one source. Height normalization
/// only affects map-based sources.
pub fn build_features(
    source: &FeatureSource,
    dataset: &Dataset,
    normalize: bool,
) -> Result<FeatureMatrix> {
    source.validate()?;
    let need = |what: &str| Error::Config(format!("feature source {source:?} needs {what}"));
    let m = match source {
        FeatureSource::Preset { id } => {
            let profiles = dataset.profiles.as_ref().ok_or_else(|| need("profiles"))?;
            FeatureMatrix::new(
                profiles
                    .iter()
                    .map(|p| compose_feature_set(p, id))
                    .collect::<Result<_>>()?,
            )?
        }
        FeatureSource::Resample { mode, grid } => {
            let maps = dataset.maps.as_ref().ok_or_else(|| need("maps"))?;
            let (res, _) = resampled_maps(maps, *mode, grid, normalize)?;
            FeatureMatrix::new(res.iter().map(flatten).collect())?
        }
        FeatureSource::Pca { mode, grid, k } => {
            let maps = dataset.maps.as_ref().ok_or_else(|| need("maps"))?;
            let (res, spec) = resampled_maps(maps, *mode, grid, normalize)?;
            let labels: Vec<Option<Label>> = dataset.labels.iter().map(|&l| Some(l)).collect();
            let masked = MaskedMatrix::from_maps(&res, &labels, &spec)?;
            let model = pca_fit(&masked, *k)?;
            FeatureMatrix::new(
                res.iter()
                    .map(|m| pca_project(&model, &flatten(m)))
                    .collect::<Result<_>>()?,
            )?
        }
    };
    Ok(labeled(m, &dataset.labels))
}

/// Model family of an experiment column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelSpec {
    Svm {
        kernel: Kernel,
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default = "balanced")]
        class_weighting: ClassWeighting,
    },
    Tree {
        criterion: Criterion,
        /// Defaults to 1..=3 for profile/PCA features and 1..=5 for raw maps.
        #[serde(default)]
        depth_range: Option<(usize, usize)>,
        #[serde(default)]
        weighted: bool,
    },
}

fn balanced() -> ClassWeighting {
    ClassWeighting::Balanced
}

impl ModelSpec {
    fn learner_and_grid(&self, source: &FeatureSource, c_grid: &[f64]) -> (Learner, HyperGrid) {
        match self {
            ModelSpec::Svm {
                kernel,
                gamma,
                class_weighting,
            } => (
                Learner::Svm(SvmConfig {
                    kernel: *kernel,
                    gamma: *gamma,
                    class_weighting: *class_weighting,
                    ..Default::default()
                }),
                HyperGrid::C(c_grid.to_vec()),
            ),
            ModelSpec::Tree {
                criterion,
                depth_range,
                weighted,
            } => {
                let range = depth_range.unwrap_or(match source {
                    FeatureSource::Resample { .. } => RAW_MAP_DEPTH_RANGE,
                    _ => PROFILE_DEPTH_RANGE,
                });
                (
                    Learner::Tree(TreeConfig {
                        criterion: *criterion,
                        max_depth: range.1,
                        depth_range: range,
                        weighted: *weighted,
                    }),
                    HyperGrid::depths(range.0, range.1),
                )
            }
        }
    }

    /// Column label in report tables, e.g. `"linear min C"`.
    pub fn column(&self, tie: TieBreak) -> String {
        match self {
            ModelSpec::Svm { kernel, .. } => format!("{kernel} {tie} C"),
            ModelSpec::Tree { criterion, .. } => format!("{criterion} {tie} Depth"),
        }
    }
}

/// Experiment file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Directory with `maps/` and/or `profiles/`.
    pub dataset: PathBuf,
    pub feature_sources: Vec<FeatureSource>,
    pub models: Vec<ModelSpec>,
    pub tie_breaks: Vec<TieBreak>,
    #[serde(default)]
    pub normalize: bool,
    /// Defaults to the decade grid `10^-4 .. 10^4`.
    #[serde(default)]
    pub c_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; defaults to all cores.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if cfg.dataset.is_relative() {
            if let Some(parent) = path.parent() {
                cfg.dataset = parent.join(&cfg.dataset);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_sources.is_empty() || self.models.is_empty() || self.tie_breaks.is_empty() {
            return Err(Error::Config(
                "experiment needs at least one feature source, model and tie-break".into(),
            ));
        }
        for s in &self.feature_sources {
            s.validate()?;
        }
        HyperGrid::C(self.c_grid()).validate()?;
        Ok(())
    }

    pub fn c_grid(&self) -> Vec<f64> {
        self.c_grid
            .clone()
            .unwrap_or_else(|| super::C_GRID.to_vec())
    }

    /// Cells in report order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for (si, s) in self.feature_sources.iter().enumerate() {
            for (mi, m) in self.models.iter().enumerate() {
                for &t in &self.tie_breaks {
                    out.push(Cell {
                        index: out.len(),
                        source_index: si,
                        model_index: mi,
                        table: s.table().to_string(),
                        features: s.label(),
                        column: m.column(t),
                        tie_break: t,
                    });
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub source_index: usize,
    pub model_index: usize,
    pub table: String,
    pub features: String,
    pub column: String,
    pub tie_break: TieBreak,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: Cell,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

/// Audit record tagged with its cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellAudit {
    pub cell: usize,
    #[serde(flatten)]
    pub record: AuditRecord,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub results: Vec<CellResult>,
    pub audit: Vec<CellAudit>,
}

/// Evaluate every cell. A failing cell is recorded and the run continues.
pub fn run_experiment_matrix(
    cfg: &ExperimentConfig,
    dataset: &Dataset,
) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let c_grid = cfg.c_grid();
    let cells = cfg.cells();
    let mut features: BTreeMap<usize, Result<FeatureMatrix, String>> = BTreeMap::new();
    let mut results = Vec::with_capacity(cells.len());
    let mut audit = Vec::new();
    for cell in cells {
        let source = &cfg.feature_sources[cell.source_index];
        let data = features.entry(cell.source_index).or_insert_with(|| {
            pool.install(|| build_features(source, dataset, cfg.normalize))
                .map_err(|e| e.to_string())
        });
        let model = &cfg.models[cell.model_index];
        let (learner, grid) = model.learner_and_grid(source, &c_grid);
        let outcome = match data {
            Ok(m) => pool
                .install(|| nested_loocv(m, &learner, &grid, cell.tie_break))
                .map_err(|e| e.to_string()),
            Err(e) => Err(e.clone()),
        };
        match outcome {
            Ok(mut run) => {
                run.report.fingerprint.feature_source = cell.features.clone();
                run.report.fingerprint.resampling = source.resampling();
                run.report.fingerprint.normalize = cfg.normalize && source.needs_maps();
                log::info!(
                    "{} | {} | {}: balanced accuracy {:.4}",
                    cell.table,
                    cell.features,
                    cell.column,
                    run.report.balanced_accuracy
                );
                audit.extend(run.audit.into_iter().map(|record| CellAudit {
                    cell: cell.index,
                    record,
                }));
                results.push(CellResult {
                    cell,
                    report: Some(run.report),
                    error: None,
                });
            }
            Err(e) => {
                log::warn!(
                    "{} | {} | {} failed: {e}",
                    cell.table,
                    cell.features,
                    cell.column
                );
                results.push(CellResult {
                    cell,
                    report: None,
                    error: Some(e),
                });
            }
        }
    }
    Ok(ExperimentOutput { results, audit })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_are_the_cartesian_product() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{
                "dataset": "d",
                "feature_sources": [
                    {"kind": "preset", "id": "lin2"},
                    {"kind": "resample", "mode": "relative", "grid": "5x10"}
                ],
                "models": [
                    {"family": "svm", "kernel": "linear"},
                    {"family": "svm", "kernel": "rbf"}
                ],
                "tie_breaks": ["min", "max"]
            }"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        let cells = cfg.cells();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[0].column, "linear min C");
        assert_eq!(cells[7].features, "5 × 10 relative grid resampling");
    }

    #[test]
    fn pca_with_absolute_resampling_is_rejected() {
        let s = FeatureSource::Pca {
            mode: ResampleMode::Absolute,
            grid: "100x250".into(),
            k: 5,
        };
        let err = s.validate().unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("relative"));
    }

    #[test]
    fn tree_depth_defaults_follow_the_source() {
        let tree = ModelSpec::Tree {
            criterion: Criterion::Gini,
            depth_range: None,
            weighted: false,
        };
        let raw = FeatureSource::Resample {
            mode: ResampleMode::Relative,
            grid: "5x10".into(),
        };
        let (_, g) = tree.learner_and_grid(&raw, &[]);
        assert_eq!(g, HyperGrid::depths(1, 5));
        let (_, g) = tree.learner_and_grid(&FeatureSource::Preset { id: "lin2".into() }, &[]);
        assert_eq!(g, HyperGrid::depths(1, 3));
    }
}
