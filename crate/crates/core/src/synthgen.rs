//! Synthetic sound boards with known ground truth.
//!
//! An unreduced board is the height field
//! `z = arch_height * plan(y) * (1 - |x / halfwidth(y)|^p)`.
//! Below the widest point (`y <= y_w`) `plan(y) = y / y_w` and
//! `halfwidth(y) = (W/2) (y / y_w)^(1/p)`, so every contour there is exactly
//! `y = y_w (l / H + |x / (W/2)|^p)`: a power law with exponent `p`.
//! Above `y_w` the board closes with `plan = 1 - s^2` and
//! `halfwidth = (W/2) sqrt(1 - s^2)`, `s = (y - y_w) / (L - y_w)`.
//!
//! A reduced board of width `W` is an unreduced board of width
//! `W + slice` with the strip `|x| < slice / 2` removed and the halves pushed
//! together: `z(x, y) = z_wide(|x| + slice / 2, y)`. The seam leaves a crease
//! along `x = 0` and the contours open up like a V.

use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;
use crate::mesh_io::{MeshFormat, TriangleMesh};

/// Arch exponent of an unjittered board.
pub const DEFAULT_ARCH_EXPONENT: f64 = 2.6;
/// Observed spread of length/width ratios.
pub const RATIO_RANGE: (f64, f64) = (2.266, 2.765);

const ROW_STEP_MM: f64 = 1.0;
const MIN_HALF_WIDTH_MM: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoardSpec {
    pub length: f64,
    pub width: f64,
    pub arch_height: f64,
    pub arch_exponent: f64,
    /// Position of the widest row as a fraction of the length.
    pub widest_fraction: f64,
    /// Width of the removed central strip; 0 for an unreduced board.
    pub reduction_slice: f64,
    pub noise_mm: f64,
    pub seed: u64,
}

impl Default for BoardSpec {
    fn default() -> Self {
        BoardSpec {
            length: 250.0,
            width: 100.0,
            arch_height: 16.0,
            arch_exponent: DEFAULT_ARCH_EXPONENT,
            widest_fraction: 0.38,
            reduction_slice: 0.0,
            noise_mm: 0.0,
            seed: 0,
        }
    }
}

impl BoardSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(format!("degenerate board spec: {m}")));
        if !(self.length > 0.0 && self.width > 0.0 && self.arch_height > 0.0) {
            return bad("length, width and arch_height must be positive".into());
        }
        if !(self.arch_exponent > 0.0) {
            return bad(format!(
                "arch_exponent {} must be positive",
                self.arch_exponent
            ));
        }
        if !(self.widest_fraction > 0.2 && self.widest_fraction < 0.8) {
            return bad(format!(
                "widest_fraction {} outside (0.2, 0.8)",
                self.widest_fraction
            ));
        }
        if !(self.reduction_slice >= 0.0 && self.reduction_slice < self.width / 2.0) {
            return bad(format!(
                "reduction_slice {} must be in [0, width/2)",
                self.reduction_slice
            ));
        }
        if !(self.noise_mm >= 0.0 && self.noise_mm.is_finite()) {
            return bad("noise_mm must be non-negative".into());
        }
        Ok(())
    }

    pub fn label(&self) -> Label {
        if self.reduction_slice > 0.0 {
            Label::Reduced
        } else {
            Label::Unreduced
        }
    }

    pub fn ratio(&self) -> f64 {
        self.length / self.width
    }

    fn y_widest(&self) -> f64 {
        self.widest_fraction * self.length
    }

    /// Half-width and plan factor of the wide (pre-reduction) board.
    fn wide_section(&self, y: f64) -> (f64, f64) {
        let half = (self.width + self.reduction_slice) / 2.0;
        let (yw, p) = (self.y_widest(), self.arch_exponent);
        if y <= yw {
            let t = (y / yw).max(0.0);
            (half * t.powf(1.0 / p), t)
        } else {
            let s = ((y - yw) / (self.length - yw)).min(1.0);
            let q = 1.0 - s * s;
            (half * q.sqrt(), q)
        }
    }

    /// Noise-free height at `(x, y)`; 0 outside the board.
    pub fn height(&self, x: f64, y: f64) -> f64 {
        let (hw, plan) = self.wide_section(y);
        let xw = x.abs() + self.reduction_slice / 2.0;
        if hw <= 0.0 || xw > hw {
            return 0.0;
        }
        (self.arch_height * plan * (1.0 - (xw / hw).powf(self.arch_exponent))).max(0.0)
    }

    /// Half-width of the final board at `y`.
    pub fn half_width(&self, y: f64) -> f64 {
        (self.wide_section(y).0 - self.reduction_slice / 2.0).max(0.0)
    }

    /// `y` range where the final board has positive width.
    fn y_span(&self) -> (f64, f64) {
        let a = self.reduction_slice / 2.0;
        let half = (self.width + self.reduction_slice) / 2.0;
        let r = a / half;
        let yw = self.y_widest();
        let y0 = yw * r.powf(self.arch_exponent);
        let y1 = yw + (1.0 - r * r).sqrt() * (self.length - yw);
        (y0, y1)
    }
}

fn row_positions(y0: f64, y1: f64, yw: f64) -> Vec<f64> {
    let mut ys = Vec::new();
    let mut segment = |a: f64, b: f64, last: bool| {
        let k = ((b - a) / ROW_STEP_MM).ceil().max(1.0) as usize;
        let end = if last { k + 1 } else { k };
        for i in 0..end {
            ys.push(a + (b - a) * i as f64 / k as f64);
        }
    };
    if yw > y0 && yw < y1 {
        segment(y0, yw, false);
        segment(yw, y1, true);
    } else {
        segment(y0, y1, true);
    }
    ys
}

/// Triangulated board: rows about 1 mm apart (one exactly at the widest
/// point), an odd number of columns so that one column lies on `x = 0`.
pub fn generate_board(id: impl Into<String>, spec: &BoardSpec) -> Result<TriangleMesh> {
    spec.validate()?;
    let (y0, y1) = spec.y_span();
    let ys = row_positions(y0, y1, spec.y_widest());
    let half_cols = (spec.width / 2.0 / ROW_STEP_MM).round().max(1.0) as usize;
    let ncols = 2 * half_cols + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut vertices = Vec::with_capacity(ys.len() * ncols);
    for (r, &y) in ys.iter().enumerate() {
        let hw = spec.half_width(y).max(MIN_HALF_WIDTH_MM);
        for c in 0..ncols {
            let u = 2.0 * c as f64 / (ncols - 1) as f64 - 1.0;
            let x = if c == half_cols { 0.0 } else { hw * u };
            let mut z = spec.height(x, y);
            let interior = r > 0 && r + 1 < ys.len() && c > 0 && c + 1 < ncols;
            if interior && spec.noise_mm > 0.0 {
                z += rng.gen_range(-spec.noise_mm..=spec.noise_mm);
            }
            vertices.push([x, y, z]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * (ys.len() - 1) * (ncols - 1));
    for r in 0..ys.len() - 1 {
        for c in 0..ncols - 1 {
            let v00 = (r * ncols + c) as u32;
            let v01 = v00 + 1;
            let v10 = v00 + ncols as u32;
            let v11 = v10 + 1;
            triangles.push([v00, v01, v11]);
            triangles.push([v00, v11, v10]);
        }
    }
    TriangleMesh::new(id, vertices, triangles)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub instrument_id: String,
    pub label: Label,
    /// Mesh file, relative to the manifest.
    pub file: String,
    pub ratio: f64,
    pub spec: BoardSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub n_reduced: usize,
    pub n_unreduced: usize,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub meshes: Vec<TriangleMesh>,
    pub manifest: Manifest,
}

/// Ranges of the per-board jitter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusOptions {
    pub width: (f64, f64),
    pub ratio: (f64, f64),
    pub arch_height: (f64, f64),
    pub arch_exponent: (f64, f64),
    pub widest_fraction: (f64, f64),
    pub reduction_slice: (f64, f64),
    pub noise_mm: f64,
    pub format: MeshFormat,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            width: (95.0, 105.0),
            ratio: RATIO_RANGE,
            arch_height: (14.0, 18.0),
            arch_exponent: (2.45, 2.75),
            widest_fraction: (0.35, 0.41),
            reduction_slice: (10.0, 18.0),
            noise_mm: 0.05,
            format: MeshFormat::Obj,
        }
    }
}

/// Draw board specs: reduced boards first, ids `board-01`, `board-02`, ...
pub fn corpus_specs(
    n_reduced: usize,
    n_unreduced: usize,
    seed: u64,
    opts: &CorpusOptions,
) -> Result<Manifest> {
    if n_reduced == 0 || n_unreduced == 0 {
        return Err(Error::InvalidInput(
            "corpus needs at least one board per class".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |(lo, hi): (f64, f64)| if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    let n = n_reduced + n_unreduced;
    let digits = n.to_string().len().max(2);
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let width = draw(opts.width);
        let ratio = draw(opts.ratio);
        let arch_height = draw(opts.arch_height);
        let arch_exponent = draw(opts.arch_exponent);
        let widest_fraction = draw(opts.widest_fraction);
        let slice = draw(opts.reduction_slice);
        let board_seed = draw((0.0, 1.0)).to_bits();
        let reduced = i < n_reduced;
        let spec = BoardSpec {
            length: ratio * width,
            width,
            arch_height,
            arch_exponent,
            widest_fraction,
            reduction_slice: if reduced { slice } else { 0.0 },
            noise_mm: opts.noise_mm,
            seed: board_seed,
        };
        spec.validate()?;
        let id = format!("board-{:0digits$}", i + 1);
        entries.push(ManifestEntry {
            file: format!("{id}.{}", opts.format.extension()),
            instrument_id: id,
            label: spec.label(),
            ratio,
            spec,
        });
    }
    Ok(Manifest {
        seed,
        n_reduced,
        n_unreduced,
        entries,
    })
}

/// Generate a labeled corpus; meshes are built in parallel.
pub fn generate_corpus(n_reduced: usize, n_unreduced: usize, seed: u64) -> Result<SyntheticCorpus> {
    generate_corpus_with(n_reduced, n_unreduced, seed, &CorpusOptions::default())
}

pub fn generate_corpus_with(
    n_reduced: usize,
    n_unreduced: usize,
    seed: u64,
    opts: &CorpusOptions,
) -> Result<SyntheticCorpus> {
    let manifest = corpus_specs(n_reduced, n_unreduced, seed, opts)?;
    let meshes = manifest
        .entries
        .par_iter()
        .map(|e| generate_board(&e.instrument_id, &e.spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticCorpus { meshes, manifest })
}

/// Write every mesh and `manifest.json` into `dir`.
pub fn write_corpus(corpus: &SyntheticCorpus, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    corpus
        .meshes
        .par_iter()
        .zip(&corpus.manifest.entries)
        .try_for_each(|(m, e)| {
            let path = dir.join(&e.file);
            write_mesh(m, &path, MeshFormat::from_path(&path)?)
        })?;
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&corpus.manifest)? + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Write OBJ (1-based faces) or ASCII PLY. Coordinates use the shortest
/// representation that parses back to the same `f64`.
pub fn write_mesh(mesh: &TriangleMesh, path: &Path, format: MeshFormat) -> Result<()> {
    let io = |e| Error::io(path, e);
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    match format {
        MeshFormat::Obj => {
            writeln!(w, "# {}", mesh.instrument_id).map_err(io)?;
            for v in &mesh.vertices {
                writeln!(w, "v {} {} {}", v[0], v[1], v[2]).map_err(io)?;
            }
            for t in &mesh.triangles {
                writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).map_err(io)?;
            }
        }
        MeshFormat::PlyAscii => {
            write!(
                w,
                "ply\nformat ascii 1.0\ncomment {}\nelement vertex {}\n\
                 property double x\nproperty double y\nproperty double z\n\
                 element face {}\nproperty list uchar int vertex_indices\nend_header\n",
                mesh.instrument_id,
                mesh.vertices.len(),
                mesh.triangles.len()
            )
            .map_err(io)?;
            for v in &mesh.vertices {
                writeln!(w, "{} {} {}", v[0], v[1], v[2]).map_err(io)?;
            }
            for t in &mesh.triangles {
                writeln!(w, "3 {} {} {}", t[0], t[1], t[2]).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}
