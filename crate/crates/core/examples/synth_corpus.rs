//! Generate a small labeled corpus and write it to disk.
//!
//! cargo run --example synth_corpus -- [out_dir]

use std::path::PathBuf;

use soundboard::synthgen::{generate_corpus, write_corpus};

fn main() -> soundboard::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("soundboard-corpus"));
    let corpus = generate_corpus(4, 2, 7)?;
    write_corpus(&corpus, &out)?;
    for (mesh, e) in corpus.meshes.iter().zip(&corpus.manifest.entries) {
        println!(
            "{}  {:<9}  L/W {:.3}  p {:.2}  slice {:>4.1} mm  {} triangles",
            e.instrument_id,
            e.label,
            e.ratio,
            e.spec.arch_exponent,
            e.spec.reduction_slice,
            mesh.triangles.len()
        );
    }
    println!("written to {}", out.display());
    Ok(())
}
