//! Simulates the bundled desk experiment and reconstructs it with time
//! reversal and each proximal-gradient variant.
//!
//! ```text
//! cargo run --release --example reconstruct_desk -- [max-iters]
//! ```
//! A full run takes several minutes per solver on one core.

use patmg::config::{ExperimentConfig, DESK_2D};
use patmg::experiment::{Algorithm, Experiment, Reconstruction};
use patmg::optim::StepKind;

fn main() -> patmg::Result<()> {
    let max_iters = std::env::args().nth(1).map(|s| s.parse().expect("max-iters must be an integer"));
    let exp = Experiment::new(ExperimentConfig::from_toml(DESK_2D)?)?;
    let (_, noisy) = exp.simulate()?;
    let truth = exp.phantom.clone();
    let mut rec = Reconstruction::new(exp, noisy.expect("desk config adds noise"), Some(truth), None)?;

    println!("{:<9} {:>6} {:>10} {:>8} {:>9} {:>9}", "algorithm", "iters", "F", "RE %", "seconds", "recursive");
    for algo in Algorithm::ALL {
        let run = rec.run(algo, max_iters, None)?;
        let last = run.records.last().unwrap();
        let recursive = run.records.iter().filter(|r| r.kind == StepKind::Recursive).count();
        println!(
            "{:<9} {:>6} {:>10.4} {:>8.2} {:>9.1} {:>9}",
            algo.name(),
            last.k,
            last.f,
            last.re.unwrap_or(f64::NAN),
            last.cpu_seconds,
            recursive
        );
    }
    Ok(())
}
