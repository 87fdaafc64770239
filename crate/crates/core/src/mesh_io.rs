//! Triangle mesh parsing (OBJ, ASCII PLY) and basic geometric queries.
//!
//! Coordinates are read verbatim and assumed to be millimetres in the
//! [`AlignmentFrame`] convention.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinate convention shared by every module.
///
/// Meshes are assumed pre-aligned: the symmetry plane of the sound board is
/// `x = 0`, the zero-elevation reference plane is `z = 0`, the long axis runs
/// along `y` (bottom of the instrument at low `y`) and heights are measured
/// along `z`. All lengths are millimetres.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AlignmentFrame;

impl AlignmentFrame {
    pub const SYMMETRY_PLANE_X: f64 = 0.0;
    pub const REFERENCE_PLANE_Z: f64 = 0.0;
    pub const UNITS: &'static str = "mm";
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Obj,
    #[serde(rename = "ply")]
    PlyAscii,
}

impl MeshFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MeshFormat::Obj => "obj",
            MeshFormat::PlyAscii => "ply",
        }
    }

    /// Guess the format from a file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("ply") => Ok(MeshFormat::PlyAscii),
            _ => Err(Error::UnsupportedFormat(format!(
                "cannot infer mesh format from {}",
                path.display()
            ))),
        }
    }
}

impl fmt::Display for MeshFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "ply" | "ply-ascii" => Ok(MeshFormat::PlyAscii),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

/// Indexed triangle surface of a sound board.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub instrument_id: String,
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    /// Build a mesh and check its invariants.
    pub fn new(
        instrument_id: impl Into<String>,
        vertices: Vec<[f64; 3]>,
        triangles: Vec<[u32; 3]>,
    ) -> Result<Self> {
        let mesh = TriangleMesh {
            instrument_id: instrument_id.into(),
            vertices,
            triangles,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertices.len() < 3 {
            return Err(Error::EmptyMesh(format!(
                "{} vertices (need at least 3)",
                self.vertices.len()
            )));
        }
        if self.triangles.is_empty() {
            return Err(Error::EmptyMesh("no triangles".into()));
        }
        let n = self.vertices.len();
        for tri in &self.triangles {
            for &i in tri {
                if i as usize >= n {
                    return Err(Error::IndexOutOfRange {
                        index: i64::from(i),
                        count: n,
                    });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidInput(format!(
                    "triangle {tri:?} repeats a vertex index"
                )));
            }
        }
        if self
            .vertices
            .iter()
            .any(|v| v.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::InvalidInput("non-finite vertex coordinate".into()));
        }
        Ok(())
    }

    pub fn triangle(&self, t: usize) -> [[f64; 3]; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Copy of the mesh shifted by `offset`.
    pub fn translated(&self, offset: [f64; 3]) -> TriangleMesh {
        TriangleMesh {
            instrument_id: self.instrument_id.clone(),
            vertices: self
                .vertices
                .iter()
                .map(|v| [v[0] + offset[0], v[1] + offset[1], v[2] + offset[2]])
                .collect(),
            triangles: self.triangles.clone(),
        }
    }
}

/// Axis-aligned box in 3D, millimetres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb3 {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb3 {
    pub fn extent(&self) -> [f64; 3] {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }

    pub fn translated(&self, t: [f64; 3]) -> Aabb3 {
        Aabb3 {
            min: [self.min[0] + t[0], self.min[1] + t[1], self.min[2] + t[2]],
            max: [self.max[0] + t[0], self.max[1] + t[1], self.max[2] + t[2]],
        }
    }
}

pub fn mesh_bbox(mesh: &TriangleMesh) -> Aabb3 {
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for v in &mesh.vertices {
        for k in 0..3 {
            min[k] = min[k].min(v[k]);
            max[k] = max[k].max(v[k]);
        }
    }
    Aabb3 { min, max }
}

/// Load and validate a mesh. The instrument id is taken from the file stem.
pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if format == MeshFormat::PlyAscii && is_binary_ply(&text) {
        return Err(Error::UnsupportedFormat(format!(
            "{}: binary PLY is not supported, convert to ASCII PLY",
            path.display()
        )));
    }
    let text = String::from_utf8(text).map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: "file is not valid UTF-8 text".into(),
    })?;
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("mesh")
        .to_string();
    let parsed = match format {
        MeshFormat::Obj => parse_obj(&text),
        MeshFormat::PlyAscii => parse_ply(&text),
    };
    let (vertices, triangles) = parsed.map_err(|(line, message)| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    })?;
    TriangleMesh::new(id, vertices, triangles)
}

fn is_binary_ply(bytes: &[u8]) -> bool {
    let head = &bytes[..bytes.len().min(512)];
    let head = String::from_utf8_lossy(head);
    head.lines()
        .take_while(|l| l.trim() != "end_header")
        .any(|l| l.trim_start().starts_with("format binary"))
}

type Parsed = (Vec<[f64; 3]>, Vec<[u32; 3]>);
type ParseError = (usize, String);

fn parse_f64(tok: Option<&str>, line: usize, what: &str) -> Result<f64, ParseError> {
    tok.ok_or_else(|| (line, format!("missing {what}")))?
        .parse::<f64>()
        .map_err(|e| (line, format!("bad {what}: {e}")))
}

/// Parse OBJ text: `v x y z` and `f i j k ...` records (1-based, polygons
/// fan-triangulated, `i/t/n` references accepted, negative indices relative).
pub fn parse_obj(text: &str) -> Result<Parsed, ParseError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    // Face indices are validated after all vertices are known, so faces are
    // collected with their source line first.
    let mut faces: Vec<(usize, Vec<i64>)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = parse_f64(toks.next(), line, "x")?;
                let y = parse_f64(toks.next(), line, "y")?;
                let z = parse_f64(toks.next(), line, "z")?;
                vertices.push([x, y, z]);
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in toks {
                    let first = t.split('/').next().unwrap_or("");
                    let i: i64 = first
                        .parse()
                        .map_err(|_| (line, format!("bad face index {t:?}")))?;
                    // Negative indices count back from the vertices seen so far.
                    let i = if i < 0 {
                        vertices.len() as i64 + i + 1
                    } else {
                        i
                    };
                    idx.push(i);
                }
                if idx.len() < 3 {
                    return Err((line, "face with fewer than 3 vertices".into()));
                }
                faces.push((line, idx));
            }
            _ => {}
        }
    }
    let n = vertices.len();
    for (line, idx) in faces {
        for &i in &idx {
            if i < 1 || i as usize > n {
                return Err((
                    line,
                    format!("index out of range: {i} (OBJ indices are 1-based, {n} vertices)"),
                ));
            }
        }
        for j in 1..idx.len() - 1 {
            triangles.push([
                (idx[0] - 1) as u32,
                (idx[j] - 1) as u32,
                (idx[j + 1] - 1) as u32,
            ]);
        }
    }
    Ok((vertices, triangles))
}

/// Parse ASCII PLY 1.0 with a `vertex` element (x, y, z float properties)
/// and a `face` element with a `vertex_indices` (or `vertex_index`) list.
pub fn parse_ply(text: &str) -> Result<Parsed, ParseError> {
    struct Element {
        name: String,
        count: usize,
        props: Vec<String>,
    }

    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err((1, "missing 'ply' magic".into())),
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    loop {
        let (line, l) = lines
            .next()
            .ok_or_else(|| (0, "unexpected end of header".to_string()))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks.first().copied() {
            Some("format") => {
                if toks.get(1) != Some(&"ascii") {
                    return Err((line, format!("unsupported PLY format {:?}", toks.get(1))));
                }
                saw_format = true;
            }
            Some("element") => {
                let name = toks.get(1).ok_or((line, "element without name".into()))?;
                let count = toks
                    .get(2)
                    .and_then(|c| c.parse().ok())
                    .ok_or((line, "element without count".to_string()))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or((line, "property before element".to_string()))?;
                let name = toks
                    .last()
                    .ok_or((line, "property without name".to_string()))?;
                if toks.get(1) == Some(&"list") {
                    el.props.push(format!("list:{name}"));
                } else {
                    el.props.push(name.to_string());
                }
            }
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => return Err((line, format!("unknown header keyword {other:?}"))),
        }
    }
    if !saw_format {
        return Err((1, "missing format line".into()));
    }

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for el in &elements {
        for _ in 0..el.count {
            let (line, l) = lines
                .next()
                .ok_or_else(|| (0, format!("unexpected end of {} data", el.name)))?;
            let toks: Vec<&str> = l.split_whitespace().collect();
            match el.name.as_str() {
                "vertex" => {
                    let get = |name: &str| -> Result<f64, ParseError> {
                        let pos = el
                            .props
                            .iter()
                            .position(|p| p == name)
                            .ok_or((line, format!("vertex has no {name} property")))?;
                        parse_f64(toks.get(pos).copied(), line, name)
                    };
                    vertices.push([get("x")?, get("y")?, get("z")?]);
                }
                "face" => {
                    // Only the first list property is used; scalar properties
                    // before it shift the token offset.
                    let pos = el
                        .props
                        .iter()
                        .position(|p| p.starts_with("list:"))
                        .ok_or((line, "face has no vertex index list".to_string()))?;
                    let cnt: usize = toks
                        .get(pos)
                        .and_then(|t| t.parse().ok())
                        .ok_or((line, "bad face list count".to_string()))?;
                    let idx: Vec<i64> = toks
                        .iter()
                        .skip(pos + 1)
                        .take(cnt)
                        .map(|t| t.parse::<i64>())
                        .collect::<Result<_, _>>()
                        .map_err(|e| (line, format!("bad face index: {e}")))?;
                    if idx.len() != cnt || cnt < 3 {
                        return Err((line, "malformed face record".into()));
                    }
                    let n = vertices.len();
                    for &i in &idx {
                        if i < 0 || i as usize >= n {
                            return Err((line, format!("index out of range: {i} ({n} vertices)")));
                        }
                    }
                    for j in 1..cnt - 1 {
                        triangles.push([idx[0] as u32, idx[j] as u32, idx[j + 1] as u32]);
                    }
                }
                _ => {}
            }
        }
    }
    Ok((vertices, triangles))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_triangle() -> TriangleMesh {
        TriangleMesh::new(
            "t",
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn single_triangle_obj() {
        let (v, t) = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(t, vec![[0, 1, 2]]);
    }

    #[test]
    fn obj_zero_index_is_out_of_range() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n").unwrap_err();
        assert_eq!(err.0, 4);
        assert!(err.1.contains("index out of range"), "{}", err.1);
    }

    #[test]
    fn obj_quad_is_fan_triangulated() {
        let (_, t) =
            parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3 4/4/4\n").unwrap();
        assert_eq!(t, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn obj_bad_coordinate_reports_line() {
        let err = parse_obj("# header\nv 0 0 zero\n").unwrap_err();
        assert_eq!(err.0, 2);
    }

    #[test]
    fn ply_ascii_parses() {
        let text = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n\
                    property float z\nelement face 1\nproperty list uchar int vertex_indices\n\
                    end_header\n0 0 0\n1 0 0\n0 1 2.5\n3 0 1 2\n";
        let (v, t) = parse_ply(text).unwrap();
        assert_eq!(v[2], [0.0, 1.0, 2.5]);
        assert_eq!(t, vec![[0, 1, 2]]);
    }

    #[test]
    fn binary_ply_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.ply");
        std::fs::write(
            &p,
            b"ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n",
        )
        .unwrap();
        let err = load_mesh(&p, MeshFormat::PlyAscii).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat(_)), "{err}");
    }

    #[test]
    fn empty_mesh_is_rejected() {
        let err = TriangleMesh::new("e", vec![[0.0; 3]; 3], vec![]).unwrap_err();
        assert!(matches!(err, Error::EmptyMesh(_)));
    }

    #[test]
    fn repeated_index_is_rejected() {
        assert!(TriangleMesh::new("e", vec![[0.0; 3]; 3], vec![[0, 0, 1]]).is_err());
    }

    #[test]
    fn bbox_of_unit_triangle() {
        let b = mesh_bbox(&unit_triangle());
        assert_eq!(b.min, [0.0, 0.0, 0.0]);
        assert_eq!(b.max, [1.0, 1.0, 0.0]);
    }

    #[test]
    fn bbox_follows_translation() {
        let m = unit_triangle();
        let b = mesh_bbox(&m.translated([10.0, 0.0, 0.0]));
        assert_eq!(b, mesh_bbox(&m).translated([10.0, 0.0, 0.0]));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn bbox_translation_equivariant(
                pts in proptest::collection::vec((-50.0..50.0f64, -50.0..50.0f64, -5.0..5.0f64), 3..20),
                t in (-100.0..100.0f64, -100.0..100.0f64, -10.0..10.0f64),
            ) {
                let vertices: Vec<[f64; 3]> = pts.iter().map(|&(x, y, z)| [x, y, z]).collect();
                let m = TriangleMesh::new("p", vertices, vec![[0, 1, 2]]).unwrap();
                let t = [t.0, t.1, t.2];
                let a = mesh_bbox(&m.translated(t));
                let b = mesh_bbox(&m).translated(t);
                for k in 0..3 {
                    prop_assert!((a.min[k] - b.min[k]).abs() < 1e-9);
                    prop_assert!((a.max[k] - b.max[k]).abs() < 1e-9);
                }
                for v in &m.vertices {
                    prop_assert!(mesh_bbox(&m).contains(*v));
                }
            }
        }
    }
}
