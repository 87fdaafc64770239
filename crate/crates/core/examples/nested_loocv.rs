//! Nested leave-one-out for one feature set, both tie-break policies.

use soundboard::classifiers::SvmConfig;
use soundboard::evaluation::{
    build_features, nested_loocv, Dataset, FeatureSource, HyperGrid, Learner, TieBreak,
};
use soundboard::synthgen::generate_corpus;

fn main() -> soundboard::Result<()> {
    let ds = Dataset::from_corpus(&generate_corpus(20, 5, 1)?, 0.25, 1.0)?;
    let data = build_features(
        &FeatureSource::Preset {
            id: "count3".into(),
        },
        &ds,
        false,
    )?;
    let learner = Learner::Svm(SvmConfig::default());
    for tie in [TieBreak::Min, TieBreak::Max] {
        let run = nested_loocv(&data, &learner, &HyperGrid::c_decades(), tie)?;
        let r = &run.report;
        println!(
            "{tie} C: balanced accuracy {:.3} (TPR {:.3}, TNR {:.3}), {} trainings",
            r.balanced_accuracy, r.tpr, r.tnr, r.trainings
        );
        for p in r.predictions.iter().filter(|p| p.predicted != p.truth) {
            println!(
                "  missed {} ({}), chosen C {}",
                p.instrument_id, p.truth, p.chosen
            );
        }
    }
    Ok(())
}
