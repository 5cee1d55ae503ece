use std::collections::BTreeMap;

use ndarray::{ArrayD, Zip};

use super::{AcousticState, Propagator};
use crate::error::{PatError, Result};
use crate::sensors::SensorData;

impl Propagator {
    /// Re-emits `data` in reversed time order as a Dirichlet condition on the
    /// nodes of the sensor stencils, with the absorption term sign-flipped,
    /// and returns the final pressure on the interior.
    pub fn time_reversal(&self, data: &SensorData) -> Result<ArrayD<f64>> {
        let grid = &self.grid;
        data.check_against(&self.sensors, grid)?;
        // node -> [(sensor, weight)], normalised so each node gets a weighted
        // average of the detectors that touch it
        let mut touch: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
        for (s, st) in self.stencils.iter().enumerate() {
            for &(node, w) in &st.nodes {
                touch.entry(node).or_default().push((s, w));
            }
        }
        let nodes: Vec<(usize, Vec<(usize, f64)>)> = touch
            .into_iter()
            .map(|(node, list)| {
                let total: f64 = list.iter().map(|e| e.1).sum();
                (node, list.into_iter().map(|(s, w)| (s, w / total)).collect())
            })
            .collect();
        let d = grid.ndim() as f64;
        let c2: Vec<f64> = self.medium.c0.iter().map(|c| c * c).collect();
        let impose = |st: &mut AcousticState, t: usize| {
            let p = st.p.as_slice_mut().unwrap();
            let mut vals = Vec::with_capacity(nodes.len());
            for (node, list) in &nodes {
                let v: f64 = list.iter().map(|&(s, w)| w * data.samples[[s, t]]).sum();
                p[*node] = v;
                vals.push((*node, v));
            }
            for rho in st.rho.iter_mut() {
                let r = rho.as_slice_mut().unwrap();
                for &(node, v) in &vals {
                    r[node] = v / (d * c2[node]);
                }
            }
        };
        let mut st = AcousticState::zeros(grid);
        let last = grid.nt - 1;
        impose(&mut st, last);
        for m in 1..grid.nt {
            self.momentum(&mut st);
            let div = self.continuity(&mut st, 1.0);
            let rate = Zip::from(&div)
                .and(&self.medium.rho0)
                .map_collect(|&dv, &r| -r * dv);
            self.pressure(&mut st, &rate, -1.0);
            if !st.is_finite() {
                return Err(PatError::Divergence { step: m });
            }
            impose(&mut st, last - m);
        }
        grid.extract(&st.p)
    }
}
