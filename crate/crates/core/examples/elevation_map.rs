//! Rasterise one board, crop it below the widest row and resample it.

use soundboard::elevation::{
    compute_elevation_map, crop_zone_of_interest, normalize_heights, resample, ResampleSpec,
};
use soundboard::synthgen::{generate_board, BoardSpec};

fn main() -> soundboard::Result<()> {
    let spec = BoardSpec {
        reduction_slice: 12.0,
        ..Default::default()
    };
    let mesh = generate_board("demo", &spec)?;
    let fine = compute_elevation_map(&mesh, 0.25)?;
    let cropped = crop_zone_of_interest(&fine)?;
    println!(
        "fine map {}x{} ({} defined), cropped {}x{}, max height {:.2} mm",
        fine.rows,
        fine.cols,
        fine.defined_count(),
        cropped.rows,
        cropped.cols,
        cropped.max_height().unwrap_or(0.0)
    );

    let coarse = resample(
        &normalize_heights(&cropped)?,
        &ResampleSpec::relative(20, 10),
    )?;
    // Coarse rows printed top-down so the picture looks like the board.
    for r in (0..coarse.rows).rev() {
        let line: String = (0..coarse.cols)
            .map(|c| match coarse.get(r, c) {
                None => ' ',
                Some(h) if h > 1.0 => '#',
                Some(h) if h > 0.0 => '+',
                Some(h) if h > -1.0 => '.',
                Some(_) => '_',
            })
            .collect();
        println!("|{line}|");
    }
    Ok(())
}
