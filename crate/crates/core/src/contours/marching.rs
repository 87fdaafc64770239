use std::collections::BTreeMap;

use crate::elevation::ElevationMap;

use super::{ContourLine, ContourSet, SkippedLevel, MIN_CONTOUR_POINTS};

/// Crossing point of the iso-line with a grid edge, keyed by the edge so that
/// cells sharing an edge share the point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum EdgeKey {
    /// Edge from node (r, c) to (r, c + 1).
    Horizontal(usize, usize),
    /// Edge from node (r, c) to (r + 1, c).
    Vertical(usize, usize),
}

/// Iso-line segments at `level`, each segment a pair of edge crossings.
///
/// Standard marching squares over cells whose four corners are defined.
/// Corners at or above the level count as inside. Saddle cells are resolved
/// with the mean of the four corners.
pub fn iso_segments(map: &ElevationMap, level: f64) -> Vec<[(f64, f64); 2]> {
    let (points, segments) = march(map, level);
    segments
        .into_iter()
        .map(|(a, b)| [points[&a], points[&b]])
        .collect()
}

fn march(
    map: &ElevationMap,
    level: f64,
) -> (BTreeMap<EdgeKey, (f64, f64)>, Vec<(EdgeKey, EdgeKey)>) {
    let mut points = BTreeMap::new();
    let mut segments = Vec::new();
    if map.rows < 2 || map.cols < 2 {
        return (points, segments);
    }
    let crossing = |ra: usize, ca: usize, rb: usize, cb: usize| -> (f64, f64) {
        let va = map.heights[map.index(ra, ca)];
        let vb = map.heights[map.index(rb, cb)];
        let t = ((level - va) / (vb - va)).clamp(0.0, 1.0);
        let (xa, ya) = map.node_xy(ra, ca);
        let (xb, yb) = map.node_xy(rb, cb);
        (xa + t * (xb - xa), ya + t * (yb - ya))
    };
    for r in 0..map.rows - 1 {
        for c in 0..map.cols - 1 {
            let idx = [
                map.index(r, c),
                map.index(r, c + 1),
                map.index(r + 1, c + 1),
                map.index(r + 1, c),
            ];
            if idx.iter().any(|&i| !map.defined[i]) {
                continue;
            }
            let v = idx.map(|i| map.heights[i]);
            let inside = v.map(|h| h >= level);
            let case = inside
                .iter()
                .enumerate()
                .fold(0u8, |acc, (k, &b)| acc | ((b as u8) << k));
            if case == 0 || case == 15 {
                continue;
            }
            // Edges of the cell, in corner order: bottom (0-1), right (1-2),
            // top (3-2), left (0-3).
            let edges = [
                EdgeKey::Horizontal(r, c),
                EdgeKey::Vertical(r, c + 1),
                EdgeKey::Horizontal(r + 1, c),
                EdgeKey::Vertical(r, c),
            ];
            let ends = [
                ((r, c), (r, c + 1)),
                ((r, c + 1), (r + 1, c + 1)),
                ((r + 1, c), (r + 1, c + 1)),
                ((r, c), (r + 1, c)),
            ];
            let mut crossed = Vec::with_capacity(4);
            for (e, &((ra, ca), (rb, cb))) in ends.iter().enumerate() {
                let ia = map.defined[map.index(ra, ca)] && map.heights[map.index(ra, ca)] >= level;
                let ib = map.defined[map.index(rb, cb)] && map.heights[map.index(rb, cb)] >= level;
                if ia != ib {
                    points
                        .entry(edges[e])
                        .or_insert_with(|| crossing(ra, ca, rb, cb));
                    crossed.push(e);
                }
            }
            match crossed.len() {
                2 => segments.push((edges[crossed[0]], edges[crossed[1]])),
                4 => {
                    // Saddle: corners 0 and 2 share a state, as do 1 and 3.
                    let centre_inside = v.iter().sum::<f64>() / 4.0 >= level;
                    if centre_inside == inside[0] {
                        // Corner 0's region connects through the centre, so
                        // corners 1 and 3 are cut off.
                        segments.push((edges[0], edges[1]));
                        segments.push((edges[2], edges[3]));
                    } else {
                        segments.push((edges[3], edges[0]));
                        segments.push((edges[1], edges[2]));
                    }
                }
                _ => {}
            }
        }
    }
    (points, segments)
}

/// Extract the bottom arcs of the iso-lines at `level_step, 2*level_step, ...`
/// up to the map's maximum height.
///
/// For each level the full set of crossings gives the contour width
/// `lambda = max x - min x`. The y of the widest point is the mean y of the
/// extreme-x crossings; points strictly below it form the bottom arc, ordered
/// by x. Arcs with fewer than five points are skipped and logged.
pub fn extract_contours(map: &ElevationMap, level_step: f64) -> ContourSet {
    let mut set = ContourSet::default();
    let Some(max_h) = map.max_height() else {
        return set;
    };
    if !(level_step > 0.0) {
        return set;
    }
    let mut k = 1usize;
    loop {
        let level = k as f64 * level_step;
        if level > max_h {
            break;
        }
        k += 1;
        let (points, _) = march(map, level);
        let pts: Vec<(f64, f64)> = points.into_values().collect();
        if pts.is_empty() {
            set.skipped.push(SkippedLevel {
                level,
                reason: "no crossing at this level".into(),
            });
            continue;
        }
        let xmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let xmax = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let lambda = xmax - xmin;
        let mean_y_at = |x: f64| {
            let ys: Vec<f64> = pts
                .iter()
                .filter(|p| (p.0 - x).abs() <= 1e-9)
                .map(|p| p.1)
                .collect();
            ys.iter().sum::<f64>() / ys.len() as f64
        };
        let widest_y = 0.5 * (mean_y_at(xmin) + mean_y_at(xmax));
        let mut arc: Vec<(f64, f64)> = pts.into_iter().filter(|p| p.1 < widest_y).collect();
        arc.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        if arc.len() < MIN_CONTOUR_POINTS || !(lambda > 0.0) {
            set.skipped.push(SkippedLevel {
                level,
                reason: format!("bottom arc has {} points", arc.len()),
            });
            continue;
        }
        set.lines.push(ContourLine {
            level,
            points: arc,
            lambda,
        });
    }
    set
}
