//! Run a small experiment matrix end to end on files and print the tables.
//!
//! cargo run --release --example experiment_matrix -- [work_dir]

use std::path::PathBuf;

use soundboard::cli::cli_main;

fn main() {
    let work = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("soundboard-matrix"));
    let w = |p: &str| work.join(p).display().to_string();
    let steps: Vec<Vec<String>> = vec![
        vec![
            "synth",
            "--reduced",
            "20",
            "--unreduced",
            "5",
            "--seed",
            "1",
            "-o",
            &w("corpus"),
        ],
        vec!["elevmap", "-i", &w("corpus"), "-o", &w("data/maps")],
        vec!["contours", "-m", &w("data/maps"), "-o", &w("data/profiles")],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    for step in steps {
        let code = cli_main(std::iter::once("soundboard".to_string()).chain(step));
        assert_eq!(code, 0);
    }
    let config = serde_json::json!({
        "dataset": "data",
        "feature_sources": [
            {"kind": "preset", "id": "lin2"},
            {"kind": "preset", "id": "count3"},
            {"kind": "resample", "mode": "relative", "grid": "20x50"},
            {"kind": "pca", "mode": "relative", "grid": "20x50", "k": 5}
        ],
        "models": [
            {"family": "svm", "kernel": "linear"},
            {"family": "svm", "kernel": "rbf"},
            {"family": "tree", "criterion": "gini"}
        ],
        "tie_breaks": ["min", "max"]
    });
    let cfg_path = work.join("experiment.json");
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    let code = cli_main([
        "soundboard".to_string(),
        "eval".into(),
        "-c".into(),
        cfg_path.display().to_string(),
        "-o".into(),
        w("results"),
    ]);
    std::process::exit(code);
}
