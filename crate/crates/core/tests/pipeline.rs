//! End-to-end library pipeline on generated boards.

use soundboard::contours::profile_from_map;
use soundboard::elevation::{
    compute_elevation_map, crop_zone_of_interest, read_map_csv, resample, write_map_csv,
    ResampleSpec,
};
use soundboard::evaluation::{build_features, Dataset, FeatureSource};
use soundboard::features::compose_feature_set;
use soundboard::mesh_io::{load_mesh, MeshFormat};
use soundboard::synthgen::{generate_board, write_mesh, BoardSpec};

fn profile(spec: &BoardSpec) -> soundboard::contours::ParameterProfile {
    let mesh = generate_board("b", spec).unwrap();
    let map = crop_zone_of_interest(&compute_elevation_map(&mesh, 0.25).unwrap()).unwrap();
    profile_from_map(&map, 1.0).unwrap()
}

#[test]
fn unreduced_beta_matches_the_arch_exponent() {
    for p in [2.45, 2.6, 2.75] {
        let spec = BoardSpec {
            arch_exponent: p,
            ..Default::default()
        };
        let prof = profile(&spec);
        let n = prof.len();
        assert!(n >= 10);
        for &b in &prof.beta[n / 4..3 * n / 4] {
            assert!((b - p).abs() <= 0.05 * p, "beta {b} vs exponent {p}");
        }
    }
}

#[test]
fn reduction_lowers_beta_at_every_shared_level() {
    let plain = BoardSpec::default();
    let reduced = BoardSpec {
        reduction_slice: 12.0,
        ..plain.clone()
    };
    let (a, b) = (profile(&plain), profile(&reduced));
    let mut shared = 0;
    for (i, level) in a.levels.iter().enumerate() {
        if let Some(j) = b.levels.iter().position(|l| l == level) {
            assert!(b.beta[j] < a.beta[i], "level {level}");
            shared += 1;
        }
    }
    assert!(shared >= 10);
    let lin_a = compose_feature_set(&a, "lin2").unwrap();
    let lin_b = compose_feature_set(&b, "lin2").unwrap();
    assert!(
        lin_b.values[0] < lin_a.values[0],
        "reduced boards have the steeper beta decline"
    );
}

#[test]
fn meshes_survive_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = generate_board("b", &BoardSpec::default()).unwrap();
    let reference = compute_elevation_map(&mesh, 1.0).unwrap();
    for fmt in [MeshFormat::Obj, MeshFormat::PlyAscii] {
        let path = dir.path().join(format!("b.{}", fmt.extension()));
        write_mesh(&mesh, &path, fmt).unwrap();
        let back = load_mesh(&path, fmt).unwrap();
        assert_eq!(back.triangles, mesh.triangles);
        let map = compute_elevation_map(&back, 1.0).unwrap();
        assert_eq!(map.defined, reference.defined);
        for (x, y) in map.heights.iter().zip(&reference.heights) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn map_csv_round_trip_after_resampling() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = generate_board("b", &BoardSpec::default()).unwrap();
    let map = crop_zone_of_interest(&compute_elevation_map(&mesh, 0.5).unwrap()).unwrap();
    let coarse = resample(&map, &ResampleSpec::relative(25, 40)).unwrap();
    assert_eq!((coarse.rows, coarse.cols), (40, 25));
    let path = dir.path().join("m.csv");
    write_map_csv(&coarse, &path).unwrap();
    let back = read_map_csv(&path).unwrap();
    assert_eq!(back.defined, coarse.defined);
    for (x, y) in back.heights.iter().zip(&coarse.heights) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn corpus_features_line_up_with_labels() {
    let corpus = soundboard::synthgen::generate_corpus(3, 2, 9).unwrap();
    let ds = Dataset::from_corpus(&corpus, 0.5, 1.0).unwrap();
    let m = build_features(&FeatureSource::Preset { id: "all13".into() }, &ds, false).unwrap();
    assert_eq!((m.len(), m.dim()), (5, 13));
    for (row, e) in m.rows.iter().zip(&corpus.manifest.entries) {
        assert_eq!(row.instrument_id, e.instrument_id);
        assert_eq!(row.label, Some(e.label));
    }
}
