use crate::error::{Error, Result};
use crate::mesh_io::{mesh_bbox, TriangleMesh};

use super::ElevationMap;

/// Grid spacing of the fine elevation maps, in millimetres.
pub const DEFAULT_SPACING_MM: f64 = 0.25;

/// Barycentric slack for nodes lying on triangle edges.
const EDGE_EPS: f64 = 1e-9;

/// Rasterise the mesh surface as seen from above.
///
/// Grid nodes are aligned to integer multiples of `spacing` and cover the
/// mesh bounding box in `(x, y)`. Each node receives the highest `z` among the
/// triangles its vertical line crosses; nodes crossing no triangle stay
/// undefined with height zero.
pub fn compute_elevation_map(mesh: &TriangleMesh, spacing: f64) -> Result<ElevationMap> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "spacing must be > 0, got {spacing}"
        )));
    }
    mesh.validate()?;
    let bbox = mesh_bbox(mesh);
    let x0 = (bbox.min[0] / spacing).floor() * spacing;
    let y0 = (bbox.min[1] / spacing).floor() * spacing;
    let cols = ((bbox.max[0] - x0) / spacing).ceil() as usize + 1;
    let rows = ((bbox.max[1] - y0) / spacing).ceil() as usize + 1;

    let mut best = vec![f64::NEG_INFINITY; rows * cols];
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.triangle(t);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        // Vertical or collapsed triangles have no area in the projection.
        if det.abs() < 1e-14 {
            continue;
        }
        let tx0 = a[0].min(b[0]).min(c[0]);
        let tx1 = a[0].max(b[0]).max(c[0]);
        let ty0 = a[1].min(b[1]).min(c[1]);
        let ty1 = a[1].max(b[1]).max(c[1]);
        let c_lo = (((tx0 - x0) / spacing) - 1e-9).ceil().max(0.0) as usize;
        let c_hi = ((((tx1 - x0) / spacing) + 1e-9).floor() as usize).min(cols - 1);
        let r_lo = (((ty0 - y0) / spacing) - 1e-9).ceil().max(0.0) as usize;
        let r_hi = ((((ty1 - y0) / spacing) + 1e-9).floor() as usize).min(rows - 1);
        if c_lo > c_hi || r_lo > r_hi {
            continue;
        }
        for r in r_lo..=r_hi {
            let py = y0 + r as f64 * spacing;
            for col in c_lo..=c_hi {
                let px = x0 + col as f64 * spacing;
                let wb = ((px - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (py - a[1])) / det;
                let wc = ((b[0] - a[0]) * (py - a[1]) - (px - a[0]) * (b[1] - a[1])) / det;
                if 1.0 - wb - wc < -EDGE_EPS || wb < -EDGE_EPS || wc < -EDGE_EPS {
                    continue;
                }
                let z = a[2] + wb * (b[2] - a[2]) + wc * (c[2] - a[2]);
                let i = r * cols + col;
                if z > best[i] {
                    best[i] = z;
                }
            }
        }
    }

    let mut map = ElevationMap::undefined(
        mesh.instrument_id.clone(),
        [x0, y0],
        [spacing, spacing],
        rows,
        cols,
    );
    for (i, z) in best.into_iter().enumerate() {
        if z > f64::NEG_INFINITY {
            map.heights[i] = z;
            map.defined[i] = true;
        }
    }
    if map.defined_count() == 0 {
        return Err(Error::Degenerate(format!(
            "{}: no grid node intersects the mesh (check alignment)",
            mesh.instrument_id
        )));
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plate(z: f64) -> TriangleMesh {
        TriangleMesh::new(
            "plate",
            vec![
                [0.0, 0.0, z],
                [10.0, 0.0, z],
                [10.0, 10.0, z],
                [0.0, 10.0, z],
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn square_plate_is_flat_and_fully_defined() {
        let m = compute_elevation_map(&plate(7.0), 1.0).unwrap();
        assert_eq!((m.rows, m.cols), (11, 11));
        assert!(m.defined.iter().all(|&d| d));
        assert!(m.heights.iter().all(|&h| h == 7.0));
    }

    #[test]
    fn nodes_outside_footprint_are_zero_and_undefined() {
        // Single triangle: the upper-left half of the grid is outside.
        let mesh = TriangleMesh::new(
            "tri",
            vec![[0.0, 0.0, 3.0], [4.0, 0.0, 3.0], [4.0, 4.0, 3.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let m = compute_elevation_map(&mesh, 1.0).unwrap();
        assert_eq!(m.get(0, 4), Some(3.0));
        assert_eq!(m.get(4, 0), None);
        assert_eq!(m.heights[m.index(4, 0)], 0.0);
        m.validate().unwrap();
    }

    #[test]
    fn overlapping_shells_keep_highest_surface() {
        let mut mesh = plate(2.0);
        let base = mesh.vertices.len() as u32;
        for v in plate(5.0).vertices {
            mesh.vertices.push(v);
        }
        mesh.triangles.push([base, base + 1, base + 2]);
        mesh.triangles.push([base, base + 2, base + 3]);
        let m = compute_elevation_map(&mesh, 2.5).unwrap();
        assert!(m.heights.iter().all(|&h| h == 5.0));
    }

    #[test]
    fn sloped_triangle_is_interpolated() {
        let mesh = TriangleMesh::new(
            "slope",
            vec![[0.0, 0.0, 0.0], [8.0, 0.0, 8.0], [0.0, 8.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let m = compute_elevation_map(&mesh, 0.5).unwrap();
        for r in 0..m.rows {
            for c in 0..m.cols {
                if let Some(h) = m.get(r, c) {
                    let (x, _) = m.node_xy(r, c);
                    assert!((h - x).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn rejects_non_positive_spacing() {
        assert!(compute_elevation_map(&plate(1.0), 0.0).is_err());
    }
}
