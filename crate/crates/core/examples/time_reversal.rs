//! Time-reversal reconstruction of the desk phantom, written as PNG.

use patmg::config::{ExperimentConfig, DESK_2D};
use patmg::evaluation::{render, save_png, time_reversal};
use patmg::experiment::Experiment;

fn main() -> patmg::Result<()> {
    let exp = Experiment::new(ExperimentConfig::from_toml(DESK_2D)?)?;
    let (clean, _) = exp.simulate()?;
    let image = time_reversal(&exp.fine_operator()?, &clean)?;
    println!("relative error {:.2}%", exp.relative_error(&image)?);
    let hi = image.iter().fold(0.0f64, |m, &v| m.max(v));
    let path = std::env::temp_dir().join("patmg-time-reversal.png");
    save_png(&render(&image, 0.0, hi)?, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}
