//! Propagates a disc-shaped initial pressure through a lossy homogeneous
//! medium and prints what a ring of sensors records.

use ndarray::{ArrayD, IxDyn};
use patmg::{ForwardOperator, Grid, Medium, SensorArray, WaveOptions};

fn main() -> patmg::Result<()> {
    let h = 1e-4;
    let dt = Grid::cfl_dt(&[h, h], 1500.0, 0.3);
    let grid = Grid::new(vec![96, 96], vec![h, h], 12, 2.0, dt, 300, 1500.0)?;
    let medium = Medium::homogeneous(&grid, 1500.0, 1000.0, 0.75, 1.5)?;
    let sensors = SensorArray::arc(32, 3.0e-3, 0.0, std::f64::consts::TAU);
    let op = ForwardOperator::new(grid.clone(), medium, sensors, WaveOptions::default())?;

    let n = grid.interior_dims();
    let c = (n[0] as f64 - 1.0) / 2.0;
    let p0 = ArrayD::from_shape_fn(IxDyn(&n), |ix| {
        let r = ((ix[0] as f64 - c).powi(2) + (ix[1] as f64 - c).powi(2)).sqrt();
        if r < 8.0 { 1.0 } else { 0.0 }
    });
    let data = op.forward(&p0)?;
    println!("{} sensors x {} samples, dt = {:.3e} s", data.num_sensors(), data.nt(), data.dt);
    let trace = data.samples.row(0);
    let (peak_at, peak) = trace
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(i, m), (j, &v)| if v.abs() > m { (j, v.abs()) } else { (i, m) });
    println!("sensor 0 peaks at t = {:.2} us with |p| = {peak:.4}", peak_at as f64 * data.dt * 1e6);
    Ok(())
}
