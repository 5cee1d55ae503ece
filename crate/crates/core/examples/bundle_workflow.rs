//! The file-based workflow behind the `patmg` binary: simulate a data
//! bundle, reconstruct it twice and compare the runs.

use patmg::config::{ExperimentConfig, DESK_2D};
use patmg::experiment::{cmd_compare, cmd_reconstruct, cmd_simulate, Algorithm};

fn main() -> patmg::Result<()> {
    let root = std::env::temp_dir().join("patmg-bundle-example");
    let mut cfg = ExperimentConfig::from_toml(DESK_2D)?;
    cfg.optimizer.lipschitz_iters = 10;

    let data = root.join("data");
    let m = cmd_simulate(&cfg, &data)?;
    println!("simulated {} (data sha256 {})", data.display(), &m.data_hash[..12]);

    let mut runs = Vec::new();
    for algo in [Algorithm::Fista, Algorithm::MgFista] {
        let out = root.join(algo.name());
        cmd_reconstruct(&cfg, &data, algo, Some(10), &out)?;
        runs.push(out);
    }
    let summary = cmd_compare(&runs, &root.join("compare"))?;
    println!("target F {:.4}", summary.target_f);
    for row in &summary.rows {
        let speedup = row.speedup.map_or("-".to_string(), |s| format!("{s:.2}"));
        println!("{:<10} F {:.4}  speedup {speedup}", row.run, row.final_f);
    }
    println!("outputs in {}", root.display());
    Ok(())
}
