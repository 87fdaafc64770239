//! Train linear and RBF SVMs on the linear-fit features.

use soundboard::classifiers::{svm_predict, svm_train, Kernel, SvmConfig};
use soundboard::evaluation::{build_features, Dataset, FeatureSource};
use soundboard::synthgen::generate_corpus;

fn main() -> soundboard::Result<()> {
    let ds = Dataset::from_corpus(&generate_corpus(10, 5, 2)?, 0.25, 1.0)?;
    let data = build_features(&FeatureSource::Preset { id: "lin2".into() }, &ds, false)?;
    for kernel in [Kernel::Linear, Kernel::Rbf] {
        let cfg = SvmConfig {
            kernel,
            c: 10.0,
            ..Default::default()
        };
        let model = svm_train(&data, &cfg)?;
        let correct = data
            .rows
            .iter()
            .filter(|v| {
                svm_predict(&model, v)
                    .map(|p| Some(p.label) == v.label)
                    .unwrap_or(false)
            })
            .count();
        println!(
            "{kernel}: {} support vectors, {} SMO iterations, training accuracy {}/{}",
            model.support_indices.len(),
            model.iterations,
            correct,
            data.len()
        );
    }
    Ok(())
}
