//! Experiment configuration: one TOML file fully determines an experiment.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};
use crate::grid::Grid;
use crate::measurement::{MediumSpec, PhantomSpec, Primitive, Region, Tissue};
use crate::multigrid::MgConfig;
use crate::optim::ObjectiveConfig;
use crate::sensors::SensorArray;

pub const DESK_2D: &str = include_str!("../configs/2d-desk.toml");
pub const PAPER_SHAPE_2D: &str = include_str!("../configs/2d-paper-shape.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dims: Vec<usize>,
    /// Meters per axis.
    pub spacing: Vec<f64>,
    pub pml_thickness: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub nt: usize,
    /// Courant number used when `dt` is not given; applied to the finest
    /// spacing of both grids.
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_pml_alpha")]
    pub pml_alpha_max: f64,
}

fn default_cfl() -> f64 {
    0.3
}

fn default_pml_alpha() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    /// Per-map noise level on sound speed and density, dB.
    #[serde(default)]
    pub awgn_db: Option<f64>,
    /// Inward shift of labelled interfaces as a fraction of the sensor radius.
    #[serde(default)]
    pub interface_shift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumConfig {
    pub y: f64,
    pub background: Tissue,
    #[serde(default)]
    pub regions: Vec<Region>,
    /// Tissue painted under every phantom vessel.
    #[serde(default)]
    pub vessel_tissue: Option<Tissue>,
    /// Anti-aliasing filter on the sound speed and density maps.
    #[serde(default)]
    pub smooth: bool,
    /// Data-generation medium; omitted means data and reconstruction share
    /// the medium description.
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhantomConfig {
    VesselNetwork {
        /// Radius of the disc holding the network, meters.
        extent: f64,
        amplitude: f64,
        /// Trunk radius, meters.
        thickness: f64,
        #[serde(default)]
        seed: u64,
    },
    Primitives {
        primitives: Vec<Primitive>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub count: usize,
    pub radius: f64,
    /// First detector angle, radians.
    #[serde(default = "default_start")]
    pub start: f64,
    /// Angular coverage, radians.
    #[serde(default = "default_span")]
    pub span: f64,
}

fn default_start() -> f64 {
    PI / 2.0
}

fn default_span() -> f64 {
    PI
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub snr_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lambda: f64,
    pub prox_iters: usize,
    /// Step as a multiple of `1/L_f` for ISTA-based runs.
    pub ista_step_scale: f64,
    /// Step as a multiple of `1/L_f` for FISTA-based runs.
    pub fista_step_scale: f64,
    pub max_iters: usize,
    pub eps_d: f64,
    pub divergence_factor: f64,
    pub lipschitz_iters: usize,
    pub lipschitz_seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            prox_iters: 20,
            ista_step_scale: 1.0,
            fista_step_scale: 1.0,
            max_iters: 100,
            eps_d: 1e-3,
            divergence_factor: 10.0,
            lipschitz_iters: 30,
            lipschitz_seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn objective(&self, accelerated: bool, rho_tv: f64) -> ObjectiveConfig {
        ObjectiveConfig {
            lambda: self.lambda,
            nonneg: true,
            rho_tv,
            prox_iters: self.prox_iters,
            step_scale: if accelerated {
                self.fista_step_scale
            } else {
                self.ista_step_scale
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub simulation: GridSpec,
    pub reconstruction: GridSpec,
    pub time: TimeSpec,
    pub medium: MediumConfig,
    pub phantom: PhantomConfig,
    pub sensors: SensorConfig,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub multigrid: MgConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| PatError::Config(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Largest sound speed any tissue of the description can take.
    pub fn c_max(&self) -> f64 {
        let m = &self.medium;
        std::iter::once(m.background.c0)
            .chain(m.regions.iter().map(|r| r.tissue.c0))
            .chain(m.vessel_tissue.iter().map(|t| t.c0))
            .fold(f64::MIN, f64::max)
    }

    pub fn dt(&self) -> f64 {
        self.time.dt.unwrap_or_else(|| {
            let h = self
                .simulation
                .spacing
                .iter()
                .chain(&self.reconstruction.spacing)
                .cloned()
                .fold(f64::INFINITY, f64::min);
            self.time.cfl * h / self.c_max()
        })
    }

    fn grid(&self, spec: &GridSpec) -> Result<Grid> {
        Grid::new(
            spec.dims.clone(),
            spec.spacing.clone(),
            spec.pml_thickness,
            self.time.pml_alpha_max,
            self.dt(),
            self.time.nt,
            self.c_max(),
        )
    }

    pub fn simulation_grid(&self) -> Result<Grid> {
        self.grid(&self.simulation)
    }

    pub fn reconstruction_grid(&self) -> Result<Grid> {
        self.grid(&self.reconstruction)
    }

    pub fn sensor_array(&self) -> SensorArray {
        let s = &self.sensors;
        SensorArray::arc(s.count, s.radius, s.start, s.span)
    }

    pub fn phantom_spec(&self) -> PhantomSpec {
        match &self.phantom {
            PhantomConfig::VesselNetwork {
                extent,
                amplitude,
                thickness,
                seed,
            } => PhantomSpec::vessel_network(*seed, *extent, *amplitude, *thickness),
            PhantomConfig::Primitives { primitives } => PhantomSpec {
                primitives: primitives.clone(),
            },
        }
    }

    /// The labelled medium, with phantom vessels painted last when a vessel
    /// tissue is configured.
    pub fn medium_spec(&self) -> MediumSpec {
        let m = &self.medium;
        let mut regions = m.regions.clone();
        if let Some(t) = m.vessel_tissue {
            regions.extend(self.phantom_spec().primitives.into_iter().map(|p| Region {
                shape: p.shape,
                tissue: t,
                interface: false,
            }));
        }
        MediumSpec {
            background: m.background,
            y: m.y,
            regions,
        }
    }

    /// Checks every constraint and reports all violations together.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let sim = self.simulation_grid();
        let rec = self.reconstruction_grid();
        if let Err(e) = &sim {
            errs.push(format!("simulation grid: {e}"));
        }
        if let Err(e) = &rec {
            errs.push(format!("reconstruction grid: {e}"));
        }
        if self.simulation.dims == self.reconstruction.dims && self.simulation.spacing == self.reconstruction.spacing {
            errs.push("simulation and reconstruction grids are identical (inverse crime)".into());
        }
        if let (Ok(s), Ok(r)) = (&sim, &rec) {
            if !s.same_extent(r) {
                errs.push("simulation and reconstruction interiors differ in extent".into());
            }
            if let Err(e) = r.coarsen() {
                errs.push(format!("reconstruction grid has no coarse level: {e}"));
            }
            let sensors = self.sensor_array();
            for (name, g) in [("simulation", s), ("reconstruction", r)] {
                if let Err(e) = sensors.stencils(g) {
                    errs.push(format!("{name} grid: {e}"));
                }
            }
            if let Ok(c) = r.coarsen() {
                if let Err(e) = sensors.stencils(&c) {
                    errs.push(format!("coarse grid: {e}"));
                }
            }
            if let Err(e) = crate::measurement::make_phantom(s, &self.phantom_spec()) {
                errs.push(format!("phantom: {e}"));
            }
        }
        if self.sensors.count == 0 {
            errs.push("at least one sensor is required".into());
        }
        if !(self.medium.y > 1.0 && self.medium.y < 3.0) {
            errs.push(format!("power-law exponent must satisfy 1 < y < 3, got {}", self.medium.y));
        }
        let tissues = std::iter::once(&self.medium.background)
            .chain(self.medium.regions.iter().map(|r| &r.tissue))
            .chain(self.medium.vessel_tissue.iter());
        for t in tissues {
            if !(t.c0 > 0.0 && t.rho0 > 0.0 && t.alpha0 >= 0.0) {
                errs.push(format!("tissue {t:?} needs c0 > 0, rho0 > 0, alpha0 >= 0"));
            }
        }
        if let Some(p) = &self.medium.perturbation {
            if !(p.interface_shift >= 0.0 && p.interface_shift < 1.0) {
                errs.push(format!("interface_shift must lie in [0, 1), got {}", p.interface_shift));
            }
        }
        if let Some(n) = &self.noise {
            if n.snr_db.is_nan() {
                errs.push("noise snr_db must be a number".into());
            }
        }
        let o = &self.optimizer;
        if !(o.lambda > 0.0) {
            errs.push(format!("optimizer lambda must be positive, got {}", o.lambda));
        }
        if !(o.ista_step_scale > 0.0 && o.ista_step_scale <= 2.0) {
            errs.push(format!("ista_step_scale must lie in (0, 2], got {}", o.ista_step_scale));
        }
        if !(o.fista_step_scale > 0.0 && o.fista_step_scale <= 1.0) {
            errs.push(format!("fista_step_scale must lie in (0, 1], got {}", o.fista_step_scale));
        }
        if o.lipschitz_iters < 10 {
            errs.push("lipschitz_iters must be at least 10".into());
        }
        if let Err(PatError::Config(mut v)) = self.multigrid.validate() {
            errs.append(&mut v);
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(PatError::Config(errs))
        }
    }
}

/// Tissue constants used by the shipped configurations.
pub mod tissues {
    use crate::measurement::Tissue;

    pub const WATER: Tissue = Tissue { c0: 1500.0, rho0: 1000.0, alpha0: 2e-3 };
    pub const SKIN: Tissue = Tissue { c0: 1730.0, rho0: 1150.0, alpha0: 0.75 };
    pub const FAT: Tissue = Tissue { c0: 1450.0, rho0: 950.0, alpha0: 0.75 };
    pub const BLOOD: Tissue = Tissue { c0: 1575.0, rho0: 1055.0, alpha0: 0.75 };
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_configs_parse_and_validate() {
        let desk = ExperimentConfig::from_toml(DESK_2D).unwrap();
        assert_eq!(desk.reconstruction.dims, vec![128, 128]);
        let r = desk.reconstruction_grid().unwrap();
        assert_eq!(r.coarsen().unwrap().dims, vec![64, 64]);
        assert!(desk.simulation_grid().unwrap().same_extent(&r));
        let paper = ExperimentConfig::from_toml(PAPER_SHAPE_2D).unwrap();
        assert_eq!(paper.reconstruction.dims, vec![328, 328]);
        assert_eq!(paper.sensors.count, 200);
    }

    #[test]
    fn every_violation_is_reported() {
        let mut cfg = ExperimentConfig::from_toml(DESK_2D).unwrap();
        cfg.reconstruction = cfg.simulation.clone();
        cfg.optimizer.lambda = -1.0;
        cfg.multigrid.vartheta = 2.0;
        cfg.sensors.count = 0;
        match cfg.validate() {
            Err(PatError::Config(v)) => {
                assert!(v.len() >= 4, "{v:?}");
                assert!(v.iter().any(|m| m.contains("inverse crime")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn toml_roundtrip() {
        let cfg = ExperimentConfig::from_toml(DESK_2D).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
