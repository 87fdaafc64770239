//! PCA on relative-resampled maps of a synthetic corpus.

use soundboard::elevation::{resample, ResampleSpec};
use soundboard::evaluation::Dataset;
use soundboard::features::{pca_fit, pca_project, MaskedMatrix};
use soundboard::synthgen::generate_corpus;

fn main() -> soundboard::Result<()> {
    let corpus = generate_corpus(8, 4, 11)?;
    let ds = Dataset::from_corpus(&corpus, 0.5, 1.0)?;
    let spec = ResampleSpec::relative(40, 100);
    let maps = ds
        .maps
        .as_ref()
        .unwrap()
        .iter()
        .map(|m| resample(m, &spec))
        .collect::<soundboard::Result<Vec<_>>>()?;
    let labels: Vec<_> = ds.labels.iter().map(|&l| Some(l)).collect();
    let data = MaskedMatrix::from_maps(&maps, &labels, &spec)?;
    let model = pca_fit(&data, 3)?;
    let total: f64 = model.explained_variance.iter().sum();
    println!(
        "{} of {} cells defined on every board; explained variance ratio {:?}",
        model.kept_dim(),
        data.dim(),
        model
            .explained_variance_ratio(total)
            .iter()
            .take(model.k)
            .map(|r| format!("{r:.3}"))
            .collect::<Vec<_>>()
    );
    for (m, l) in maps.iter().zip(&ds.labels) {
        let z = pca_project(&model, &soundboard::elevation::flatten(m))?;
        println!(
            "{:<9} {:<9} {:>8.2} {:>8.2} {:>8.2}",
            m.instrument_id, l, z.values[0], z.values[1], z.values[2]
        );
    }
    Ok(())
}
