//! Fit a depth-2 Gini tree on beta-threshold counts and print it.

use soundboard::classifiers::{tree_train, Criterion, TreeConfig};
use soundboard::evaluation::{build_features, Dataset, FeatureSource};
use soundboard::synthgen::generate_corpus;

fn main() -> soundboard::Result<()> {
    let ds = Dataset::from_corpus(&generate_corpus(10, 5, 4)?, 0.25, 1.0)?;
    let data = build_features(
        &FeatureSource::Preset {
            id: "count3".into(),
        },
        &ds,
        false,
    )?;
    let model = tree_train(&data, &TreeConfig::new(Criterion::Gini, 2))?;
    for node in &model.nodes {
        let pad = "  ".repeat(node.depth);
        match &node.split {
            Some(s) => println!(
                "{pad}{} <= {:.2}  (gain {:.3}, counts {:?})",
                model.feature_names[s.feature], s.threshold, s.gain, node.counts
            ),
            None => println!("{pad}-> {} {:?}", node.label, node.counts),
        }
    }
    Ok(())
}
