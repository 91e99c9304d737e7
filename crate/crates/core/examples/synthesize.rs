//! Prints a noise-free observation series generated from the Peruvian
//! parameters, in the CSV layout read by `ObservationSeries::from_csv`.
//!
//! cargo run -p viability --example synthesize > observations.csv

use viability::estimation::synthesize_observations;
use viability::LotkaVolterraParams;

fn main() -> viability::Result<()> {
    let efforts: Vec<(f64, f64)> = (0..11)
        .map(|t| {
            let t = t as f64;
            (0.45 + 0.25 * (0.9 * t).sin(), 0.12 + 0.08 * (0.7 * t).cos())
        })
        .collect();
    let obs = synthesize_observations(&LotkaVolterraParams::peru(), (1.6e7, 4e5), &efforts, 1971)?;
    obs.write_csv(std::io::stdout().lock())
}
