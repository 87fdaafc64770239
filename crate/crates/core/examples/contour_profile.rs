//! Fit contour lines of a plain and a width-reduced board and compare beta.

use soundboard::contours::{extract_contours, fit_contour, profile_from_map};
use soundboard::elevation::{compute_elevation_map, crop_zone_of_interest};
use soundboard::synthgen::{generate_board, BoardSpec};

fn main() -> soundboard::Result<()> {
    let plain = BoardSpec::default();
    let reduced = BoardSpec {
        reduction_slice: 14.0,
        ..plain.clone()
    };
    let mut profiles = Vec::new();
    for (name, spec) in [("plain", &plain), ("reduced", &reduced)] {
        let map =
            crop_zone_of_interest(&compute_elevation_map(&generate_board(name, spec)?, 0.25)?)?;
        profiles.push(profile_from_map(&map, 1.0)?);
        if name == "plain" {
            let set = extract_contours(&map, 1.0);
            let line = &set.lines[set.lines.len() / 2];
            let fit = fit_contour(line)?;
            println!(
                "level {:.0} mm: {} points, alpha {:.3} beta {:.3} gamma {:.3} delta {:.3} rss {:.2e}",
                fit.level,
                line.points.len(),
                fit.alpha,
                fit.beta,
                fit.gamma,
                fit.delta,
                fit.rss
            );
        }
    }
    println!("level   beta(plain)  beta(reduced)");
    for (i, level) in profiles[0].levels.iter().enumerate() {
        let other = profiles[1]
            .levels
            .iter()
            .position(|l| l == level)
            .map(|j| format!("{:.3}", profiles[1].beta[j]))
            .unwrap_or_else(|| "-".into());
        println!("{level:>5.1}   {:>11.3}  {other:>13}", profiles[0].beta[i]);
    }
    Ok(())
}
