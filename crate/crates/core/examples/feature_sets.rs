//! Compose every engineered feature preset for one reduced board.

use soundboard::contours::profile_from_map;
use soundboard::elevation::{compute_elevation_map, crop_zone_of_interest};
use soundboard::features::{compose_feature_set, FEATURE_SETS};
use soundboard::synthgen::{generate_board, BoardSpec};

fn main() -> soundboard::Result<()> {
    let spec = BoardSpec {
        reduction_slice: 10.0,
        noise_mm: 0.05,
        seed: 3,
        ..Default::default()
    };
    let map = crop_zone_of_interest(&compute_elevation_map(&generate_board("b", &spec)?, 0.25)?)?;
    let profile = profile_from_map(&map, 1.0)?;
    for set in &FEATURE_SETS {
        let v = compose_feature_set(&profile, set.id)?;
        let shown: Vec<String> = v
            .names
            .iter()
            .zip(&v.values)
            .take(4)
            .map(|(n, x)| format!("{n}={x:.3}"))
            .collect();
        let more = if v.len() > 4 { " ..." } else { "" };
        println!("{:<20} [{:>2}] {}{more}", set.id, v.len(), shown.join(" "));
    }
    Ok(())
}
