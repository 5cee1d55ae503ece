//! Measures plane-wave attenuation at a few frequencies and fits a power law.

use patmg::harness::{fit_power_law, plane_wave_absorption};

fn main() -> patmg::Result<()> {
    let probes = plane_wave_absorption(0.75, 1.5, &[1e6, 2e6, 3e6])?;
    for p in &probes {
        println!(
            "{:.1} MHz: measured {:.3} Np/m, expected {:.3} Np/m",
            p.frequency / 1e6,
            p.measured,
            p.target
        );
    }
    let (y, a) = fit_power_law(&probes);
    println!("fitted exponent {y:.3}, prefactor {a:.3e}");
    Ok(())
}
