//! Command-line front end. Stages exchange files only; every output
//! directory receives a `fingerprint.json` describing how it was produced.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::classifiers::{ClassWeighting, Criterion, Kernel};
use crate::contours::{profile_from_map, write_profile_csv, DEFAULT_LEVEL_STEP_MM};
use crate::elevation::{
    absolute_global_box, compute_elevation_map, crop_zone_of_interest, normalize_heights,
    parse_grid, read_map_csv, resample, write_map_csv, ElevationMap, ResampleMode, ResampleSpec,
    DEFAULT_SPACING_MM,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    build_features, read_index, read_results, run_experiment_matrix, write_audit_jsonl,
    write_index, write_reports, Dataset, ExperimentConfig, FeatureSource, IndexEntry, ModelSpec,
    TieBreak,
};
use crate::features::{pca_fit, pca_project, FeatureMatrix, MaskedMatrix, PcaModel, FEATURE_SETS};
use crate::label::Label;
use crate::mesh_io::{load_mesh, MeshFormat};
use crate::synthgen::{generate_corpus_with, write_corpus, CorpusOptions, Manifest};

fn feature_set_help() -> String {
    let mut s = String::from("Feature set presets (--set / {\"kind\": \"preset\"}):\n");
    for f in &FEATURE_SETS {
        s.push_str(&format!("  {:<22} {}\n", f.id, f.label));
    }
    s
}

#[derive(Debug, Parser, Serialize)]
#[command(name = "soundboard", version, about = "Width-reduction detection for violin sound boards", after_help = feature_set_help())]
pub struct Cli {
    /// Print the feature set presets and exit.
    #[arg(long, global = true)]
    pub list_feature_sets: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Generate a labeled synthetic corpus of meshes.
    Synth(SynthArgs),
    /// Rasterise meshes into elevation maps (crop, optional resample/normalize).
    Elevmap(ElevmapArgs),
    /// Fit contour lines of fine maps into parameter profiles.
    Contours(ContoursArgs),
    /// Build a feature matrix CSV from profiles or maps.
    Features(FeaturesArgs),
    /// Fit PCA on resampled maps (or apply a saved model) and project.
    Pca(PcaArgs),
    /// Run a nested leave-one-out experiment matrix.
    Eval(EvalArgs),
    /// Re-render report tables from reports.json.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    pub reduced: usize,
    #[arg(long, default_value_t = 5)]
    pub unreduced: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Surface noise amplitude, mm.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, value_enum, default_value_t = FormatArg::Obj)]
    pub format: FormatArg,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Obj,
    Ply,
}

impl From<FormatArg> for MeshFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Obj => MeshFormat::Obj,
            FormatArg::Ply => MeshFormat::PlyAscii,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Relative,
    Absolute,
}

impl From<ModeArg> for ResampleMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Relative => ResampleMode::Relative,
            ModeArg::Absolute => ResampleMode::Absolute,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ElevmapArgs {
    /// Corpus directory (with manifest.json) or directory of .obj/.ply files.
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SPACING_MM)]
    pub spacing: f64,
    /// Keep the whole board instead of the zone below the widest row.
    #[arg(long)]
    pub no_crop: bool,
    /// Resample to a `WxL` grid.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, value_enum, default_value_t = ModeArg::Relative)]
    pub mode: ModeArg,
    /// Standardise heights of each map.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ContoursArgs {
    /// Directory of fine maps with index.json.
    #[arg(short, long)]
    pub maps: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_LEVEL_STEP_MM)]
    pub level_step: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct FeaturesArgs {
    /// Dataset directory with maps/ and/or profiles/.
    #[arg(short, long)]
    pub dataset: PathBuf,
    /// Engineered preset id.
    #[arg(long, conflicts_with = "grid")]
    pub set: Option<String>,
    /// Resampled map features on a `WxL` grid.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, value_enum, default_value_t = ModeArg::Relative)]
    pub mode: ModeArg,
    #[arg(long)]
    pub normalize: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PcaArgs {
    #[arg(short, long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "100x250")]
    pub grid: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Relative)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long)]
    pub normalize: bool,
    /// Apply this saved model instead of fitting one.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Experiment JSON file.
    #[arg(short, long, required_unless_present = "dataset")]
    pub config: Option<PathBuf>,
    /// Dataset directory; used with --source/--model instead of --config.
    #[arg(long, conflicts_with = "config")]
    pub dataset: Option<PathBuf>,
    /// `preset:<id>`, `resample:<mode>:<WxL>` or `pca:<mode>:<WxL>:<k>`.
    #[arg(long = "source")]
    pub sources: Vec<String>,
    /// `svm:<kernel>` or `tree:<criterion>`.
    #[arg(long = "model")]
    pub models: Vec<String>,
    #[arg(long = "tie-break", value_enum)]
    pub tie_breaks: Vec<TieArg>,
    #[arg(long)]
    pub normalize: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TieArg {
    Min,
    Max,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Directory holding reports.json from `eval`.
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output directory (default: the input directory).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Serialize)]
struct Fingerprint<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    stage: &'a str,
    threads: Option<usize>,
    args: &'a T,
}

fn write_fingerprint<T: Serialize>(
    dir: &Path,
    stage: &str,
    threads: Option<usize>,
    args: &T,
) -> Result<()> {
    let fp = Fingerprint {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        stage,
        threads,
        args,
    };
    let path = dir.join("fingerprint.json");
    let text = serde_json::to_string_pretty(&fp)? + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Parse, run and map the outcome onto an exit code: 0 success,
/// 1 validation error (including bad flags), 2 runtime failure.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if cli.list_feature_sets {
        print!("{}", feature_set_help());
        return Ok(());
    }
    let Some(cmd) = &cli.command else {
        return Err(Error::InvalidInput(
            "no subcommand given; see --help".into(),
        ));
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cmd {
        Command::Synth(a) => synth(a, cli.threads),
        Command::Elevmap(a) => elevmap(a, cli.threads),
        Command::Contours(a) => contours(a, cli.threads),
        Command::Features(a) => features(a, cli.threads),
        Command::Pca(a) => pca(a, cli.threads),
        Command::Eval(a) => eval(a, cli.threads),
        Command::Report(a) => report(a),
    })
}

fn synth(a: &SynthArgs, threads: Option<usize>) -> Result<()> {
    let opts = CorpusOptions {
        noise_mm: a.noise,
        format: a.format.into(),
        ..Default::default()
    };
    let corpus = generate_corpus_with(a.reduced, a.unreduced, a.seed, &opts)?;
    write_corpus(&corpus, &a.output)?;
    write_fingerprint(&a.output, "synth", threads, a)?;
    println!(
        "wrote {} meshes ({} reduced) to {}",
        corpus.meshes.len(),
        a.reduced,
        a.output.display()
    );
    Ok(())
}

/// Mesh files with labels: from manifest.json when present, else every
/// .obj/.ply file (unlabeled) in name order.
fn mesh_inputs(dir: &Path) -> Result<Vec<(PathBuf, String, Option<Label>)>> {
    let manifest = dir.join("manifest.json");
    if manifest.exists() {
        let m = Manifest::read(&manifest)?;
        return Ok(m
            .entries
            .into_iter()
            .map(|e| (dir.join(&e.file), e.instrument_id, Some(e.label)))
            .collect());
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| MeshFormat::from_path(p).is_ok())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no meshes in {}",
            dir.display()
        )));
    }
    Ok(files
        .into_iter()
        .map(|p| {
            let id = p
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("mesh")
                .to_string();
            (p, id, None)
        })
        .collect())
}

fn elevmap(a: &ElevmapArgs, threads: Option<usize>) -> Result<()> {
    let grid = a.grid.as_deref().map(parse_grid).transpose()?;
    let inputs = mesh_inputs(&a.input)?;
    let maps: Vec<ElevationMap> = inputs
        .par_iter()
        .map(|(path, id, _)| {
            let mut mesh = load_mesh(path, MeshFormat::from_path(path)?)?;
            mesh.instrument_id = id.clone();
            let mut map = compute_elevation_map(&mesh, a.spacing)?;
            if !a.no_crop {
                map = crop_zone_of_interest(&map)?;
            }
            if a.normalize {
                map = normalize_heights(&map)?;
            }
            Ok(map)
        })
        .collect::<Result<_>>()?;
    let maps = match grid {
        None => maps,
        Some((w, l)) => {
            let spec = match a.mode {
                ModeArg::Relative => ResampleSpec::relative(w, l),
                ModeArg::Absolute => ResampleSpec::absolute(w, l, absolute_global_box(&maps)?),
            };
            maps.iter()
                .map(|m| resample(m, &spec))
                .collect::<Result<_>>()?
        }
    };
    create_dir(&a.output)?;
    let mut index = Vec::with_capacity(maps.len());
    for (m, (_, id, label)) in maps.iter().zip(&inputs) {
        let file = format!("{id}.csv");
        write_map_csv(m, a.output.join(&file))?;
        index.push(IndexEntry {
            instrument_id: id.clone(),
            label: *label,
            file,
        });
    }
    write_index(&a.output, &index)?;
    write_fingerprint(&a.output, "elevmap", threads, a)?;
    println!("wrote {} maps to {}", maps.len(), a.output.display());
    Ok(())
}

fn contours(a: &ContoursArgs, threads: Option<usize>) -> Result<()> {
    let index = read_index(&a.maps)?;
    let profiles = index
        .par_iter()
        .map(|e| {
            let mut map = read_map_csv(a.maps.join(&e.file))?;
            map.instrument_id = e.instrument_id.clone();
            profile_from_map(&map, a.level_step)
        })
        .collect::<Result<Vec<_>>>()?;
    create_dir(&a.output)?;
    for (p, e) in profiles.iter().zip(&index) {
        write_profile_csv(p, a.output.join(&e.file))?;
    }
    write_index(&a.output, &index)?;
    write_fingerprint(&a.output, "contours", threads, a)?;
    println!(
        "wrote {} profiles to {}",
        profiles.len(),
        a.output.display()
    );
    Ok(())
}

fn features(a: &FeaturesArgs, threads: Option<usize>) -> Result<()> {
    let source = match (&a.set, &a.grid) {
        (Some(id), None) => FeatureSource::Preset { id: id.clone() },
        (None, Some(grid)) => FeatureSource::Resample {
            mode: a.mode.into(),
            grid: grid.clone(),
        },
        _ => return Err(Error::Config("give exactly one of --set or --grid".into())),
    };
    source.validate()?;
    let ds = Dataset::load(&a.dataset, source.needs_maps(), !source.needs_maps())?;
    let m = build_features(&source, &ds, a.normalize)?;
    create_dir(&a.output)?;
    m.write_csv(a.output.join("features.csv"))?;
    write_fingerprint(&a.output, "features", threads, a)?;
    println!(
        "wrote {} x {} features to {}",
        m.len(),
        m.dim(),
        a.output.display()
    );
    Ok(())
}

fn pca(a: &PcaArgs, threads: Option<usize>) -> Result<()> {
    if a.mode == ModeArg::Absolute {
        return Err(Error::Config(
            "PCA is applied only to the relative resampled grids; \
             PCA with absolute resampling is rejected"
                .into(),
        ));
    }
    let (w, l) = parse_grid(&a.grid)?;
    let ds = Dataset::load(&a.dataset, true, false)?;
    let spec = ResampleSpec::relative(w, l);
    let maps = ds
        .maps
        .as_ref()
        .expect("maps requested")
        .iter()
        .map(|m| {
            let m = if a.normalize {
                normalize_heights(m)?
            } else {
                m.clone()
            };
            resample(&m, &spec)
        })
        .collect::<Result<Vec<_>>>()?;
    let model: PcaModel = match &a.model {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text)?
        }
        None => {
            let labels: Vec<Option<Label>> = ds.labels.iter().map(|&l| Some(l)).collect();
            pca_fit(&MaskedMatrix::from_maps(&maps, &labels, &spec)?, a.k)?
        }
    };
    let rows = maps
        .iter()
        .zip(&ds.labels)
        .map(|(m, &l)| Ok(pca_project(&model, &crate::elevation::flatten(m))?.with_label(l)))
        .collect::<Result<Vec<_>>>()?;
    create_dir(&a.output)?;
    let path = a.output.join("pca_model.json");
    std::fs::write(&path, serde_json::to_string_pretty(&model)? + "\n")
        .map_err(|e| Error::io(&path, e))?;
    FeatureMatrix::new(rows)?.write_csv(a.output.join("features.csv"))?;
    write_fingerprint(&a.output, "pca", threads, a)?;
    println!("wrote PCA (k = {}) to {}", model.k, a.output.display());
    Ok(())
}

fn parse_source(s: &str) -> Result<FeatureSource> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Config(format!("bad --source {s:?}"));
    let src = match parts.as_slice() {
        ["preset", id] => FeatureSource::Preset { id: id.to_string() },
        ["resample", mode, grid] => FeatureSource::Resample {
            mode: mode.parse()?,
            grid: grid.to_string(),
        },
        ["pca", mode, grid, k] => FeatureSource::Pca {
            mode: mode.parse()?,
            grid: grid.to_string(),
            k: k.parse().map_err(|_| bad())?,
        },
        _ => return Err(bad()),
    };
    src.validate()?;
    Ok(src)
}

fn parse_model(s: &str) -> Result<ModelSpec> {
    match s.split_once(':') {
        Some(("svm", k)) => Ok(ModelSpec::Svm {
            kernel: k.parse::<Kernel>()?,
            gamma: None,
            class_weighting: ClassWeighting::Balanced,
        }),
        Some(("tree", c)) => Ok(ModelSpec::Tree {
            criterion: c.parse::<Criterion>()?,
            depth_range: None,
            weighted: false,
        }),
        _ => Err(Error::Config(format!("bad --model {s:?}"))),
    }
}

fn eval(a: &EvalArgs, threads: Option<usize>) -> Result<()> {
    let mut cfg = match (&a.config, &a.dataset) {
        (Some(path), _) => ExperimentConfig::from_file(path)?,
        (None, Some(ds)) => ExperimentConfig {
            dataset: ds.clone(),
            feature_sources: a
                .sources
                .iter()
                .map(|s| parse_source(s))
                .collect::<Result<_>>()?,
            models: if a.models.is_empty() {
                vec![parse_model("svm:linear")?]
            } else {
                a.models
                    .iter()
                    .map(|m| parse_model(m))
                    .collect::<Result<_>>()?
            },
            tie_breaks: if a.tie_breaks.is_empty() {
                vec![TieBreak::Min]
            } else {
                a.tie_breaks
                    .iter()
                    .map(|t| match t {
                        TieArg::Min => TieBreak::Min,
                        TieArg::Max => TieBreak::Max,
                    })
                    .collect()
            },
            normalize: a.normalize,
            c_grid: None,
            seed: 0,
            threads: None,
        },
        (None, None) => return Err(Error::Config("give --config or --dataset".into())),
    };
    if threads.is_some() {
        cfg.threads = threads;
    }
    cfg.validate()?;
    let need_maps = cfg.feature_sources.iter().any(FeatureSource::needs_maps);
    let need_profiles = cfg.feature_sources.iter().any(|s| !s.needs_maps());
    let ds = Dataset::load(&cfg.dataset, need_maps, need_profiles)?;
    let out = run_experiment_matrix(&cfg, &ds)?;
    create_dir(&a.output)?;
    write_reports(&a.output, &out.results, &cfg.c_grid())?;
    write_audit_jsonl(&a.output.join("audit.jsonl"), &out.audit)?;
    write_fingerprint(&a.output, "eval", threads, &cfg)?;
    let failed = out.results.iter().filter(|r| r.report.is_none()).count();
    print!(
        "{}",
        crate::evaluation::render_text(&out.results, &cfg.c_grid())
    );
    if failed > 0 {
        eprintln!("{failed} cell(s) failed; see reports.json");
    }
    Ok(())
}

fn report(a: &ReportArgs) -> Result<()> {
    let results = read_results(&a.input.join("reports.json"))?;
    let grid = results
        .iter()
        .find_map(|r| r.report.as_ref())
        .map(|r| r.fingerprint.grid.clone())
        .unwrap_or_default();
    let out = a.output.clone().unwrap_or_else(|| a.input.clone());
    create_dir(&out)?;
    write_reports(&out, &results, &grid)?;
    write_fingerprint(&out, "report", None, a)?;
    print!("{}", crate::evaluation::render_text(&results, &grid));
    Ok(())
}
