//! Experiment pipeline: data generation, reconstruction runs and comparison
//! of finished runs. Every output directory carries a manifest with enough
//! information to redo it exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use ndarray::{ArrayD, Ix2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{PatError, Result};
use crate::evaluation::{plot_curves, relative_error, save_png, visualize, Curve, PALETTE};
use crate::field_io::{read_field, write_field, FieldMeta};
use crate::grid::Grid;
use crate::measurement::{add_awgn, make_phantom, perturb_medium};
use crate::medium::Medium;
use crate::multigrid::restrict_data;
use crate::multigrid::{mg_solve, LevelPair, RecursionLog};
use crate::optim::{cache_dir_from_env, lipschitz_cached, LipschitzEstimate};
use crate::optim::{
    proximal_gradient, read_records, records_to_csv, write_records, Callbacks, IterationRecord, Momentum, Problem,
    SolverOptions, StepKind, StopReason,
};
use crate::sensors::{SensorArray, SensorData};
use crate::wave::{ForwardOperator, WaveOptions};

/// Threshold used for the rendered images.
pub const DISPLAY_THRESHOLD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Tr,
    Ista,
    Fista,
    MgIsta,
    MgFista,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [Self::Tr, Self::Ista, Self::Fista, Self::MgIsta, Self::MgFista];

    pub fn name(self) -> &'static str {
        match self {
            Self::Tr => "tr",
            Self::Ista => "ista",
            Self::Fista => "fista",
            Self::MgIsta => "mg-ista",
            Self::MgFista => "mg-fista",
        }
    }

    pub fn accelerated(self) -> bool {
        matches!(self, Self::Fista | Self::MgFista)
    }

    pub fn multigrid(self) -> bool {
        matches!(self, Self::MgIsta | Self::MgFista)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = PatError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| PatError::InvalidArgument(format!("unknown algorithm {s:?}; expected tr|ista|fista|mg-ista|mg-fista")))
    }
}

/// Everything derived from a configuration before any wave is simulated.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub simulation_grid: Grid,
    pub reconstruction_grid: Grid,
    pub coarse_grid: Grid,
    pub sensors: SensorArray,
    /// Ground truth on the simulation grid interior.
    pub phantom: ArrayD<f64>,
    pub reconstruction_medium: Medium,
    pub data_medium: Medium,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let simulation_grid = config.simulation_grid()?;
        let reconstruction_grid = config.reconstruction_grid()?;
        let coarse_grid = reconstruction_grid.coarsen()?;
        let sensors = config.sensor_array();
        let phantom = make_phantom(&simulation_grid, &config.phantom_spec())?;
        let spec = config.medium_spec();
        let reconstruction_medium = spec.build(&reconstruction_grid)?;
        let data_medium = match &config.medium.perturbation {
            Some(p) => perturb_medium(
                &spec,
                &simulation_grid,
                p.awgn_db,
                p.interface_shift * config.sensors.radius,
                config.seed.wrapping_add(1),
            )?,
            None => spec.build(&simulation_grid)?,
        };
        Ok(Self {
            config,
            simulation_grid,
            reconstruction_grid,
            coarse_grid,
            sensors,
            phantom,
            reconstruction_medium,
            data_medium,
        })
    }

    pub fn wave_options(&self) -> WaveOptions {
        WaveOptions {
            smooth_medium: self.config.medium.smooth,
            ..WaveOptions::default()
        }
    }

    pub fn simulation_operator(&self) -> Result<ForwardOperator> {
        ForwardOperator::new(
            self.simulation_grid.clone(),
            self.data_medium.clone(),
            self.sensors.clone(),
            self.wave_options(),
        )
    }

    pub fn fine_operator(&self) -> Result<ForwardOperator> {
        ForwardOperator::new(
            self.reconstruction_grid.clone(),
            self.reconstruction_medium.clone(),
            self.sensors.clone(),
            self.wave_options(),
        )
    }

    /// Coarse-level operator: block-averaged medium on the coarsened grid with
    /// twice the time step and half the steps.
    pub fn coarse_operator(&self) -> Result<ForwardOperator> {
        ForwardOperator::new(
            self.coarse_grid.clone(),
            self.reconstruction_medium.coarsen()?,
            self.sensors.clone(),
            WaveOptions {
                source_filter_scale: 2.0,
                ..self.wave_options()
            },
        )
    }

    /// Clean and, when a noise section exists, noisy sensor data.
    pub fn simulate(&self) -> Result<(SensorData, Option<SensorData>)> {
        let clean = self.simulation_operator()?.forward(&self.phantom)?;
        let noisy = match &self.config.noise {
            Some(n) => Some(add_awgn(&clean, n.snr_db, self.config.seed.wrapping_add(2))?),
            None => None,
        };
        Ok((clean, noisy))
    }

    /// Relative error (percent) of a reconstruction-grid image.
    pub fn relative_error(&self, x: &ArrayD<f64>) -> Result<f64> {
        relative_error(x, &self.reconstruction_grid, &self.phantom, &self.simulation_grid)
    }
}

/// JSON has no infinities; `F` of an infeasible image is written as a string.
mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Hex sha256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn file_hash(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzInfo {
    pub fine: f64,
    #[serde(default)]
    pub coarse: Option<f64>,
    /// True when every estimate came from the cache.
    pub cache_hit: bool,
    pub iterations: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub algorithm: Algorithm,
    pub max_iters: usize,
    pub iterations: usize,
    pub stop: Option<StopReason>,
    pub lipschitz: Option<LipschitzInfo>,
    pub recursive_steps: usize,
    pub min_iterate: f64,
    #[serde(with = "extended_f64")]
    pub final_f: f64,
    pub final_res: f64,
    pub final_re: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub version: String,
    pub name: String,
    pub seed: u64,
    pub config_hash: String,
    /// Hash of the data file reconstructions are computed from.
    pub data_hash: String,
    /// The full configuration the output was produced with.
    pub config: String,
    pub files: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunInfo>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path)
            .map_err(|e| PatError::InvalidArgument(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

fn config_hash(cfg: &ExperimentConfig) -> String {
    sha256_hex(cfg.to_toml().as_bytes())
}

fn data_to_array(d: &SensorData) -> ArrayD<f64> {
    d.samples.clone().into_dyn()
}

fn data_meta(d: &SensorData, what: &str) -> FieldMeta {
    FieldMeta {
        spacing: vec![],
        dt: Some(d.dt),
        units: "Pa".into(),
        description: format!("{what}; rows are sensors, columns time samples"),
    }
}

fn grid_meta(g: &Grid, units: &str, what: &str) -> FieldMeta {
    FieldMeta {
        spacing: g.spacing.clone(),
        dt: None,
        units: units.into(),
        description: what.into(),
    }
}

/// Writes a data bundle for `cfg` into `out`.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    let exp = Experiment::new(cfg.clone())?;
    let (clean, noisy) = exp.simulate()?;
    fs::create_dir_all(out)?;
    let mut written: Vec<(&str, ArrayD<f64>, FieldMeta)> = vec![
        (
            "phantom.bin",
            exp.phantom.clone(),
            grid_meta(&exp.simulation_grid, "Pa", "initial pressure on the simulation grid interior"),
        ),
        (
            "medium_recon_c0.bin",
            exp.reconstruction_medium.c0.clone(),
            grid_meta(&exp.reconstruction_grid, "m/s", "sound speed assumed by the reconstruction"),
        ),
        (
            "medium_recon_rho0.bin",
            exp.reconstruction_medium.rho0.clone(),
            grid_meta(&exp.reconstruction_grid, "kg/m^3", "density assumed by the reconstruction"),
        ),
        (
            "medium_data_c0.bin",
            exp.data_medium.c0.clone(),
            grid_meta(&exp.simulation_grid, "m/s", "sound speed used to generate the data"),
        ),
        (
            "medium_data_rho0.bin",
            exp.data_medium.rho0.clone(),
            grid_meta(&exp.simulation_grid, "kg/m^3", "density used to generate the data"),
        ),
        ("data_clean.bin", data_to_array(&clean), data_meta(&clean, "noise-free sensor data")),
    ];
    if let Some(n) = &noisy {
        written.push(("data_noisy.bin", data_to_array(n), data_meta(n, "noisy sensor data")));
    }
    let mut files = BTreeMap::new();
    for (name, field, meta) in &written {
        let path = out.join(name);
        write_field(&path, field, meta)?;
        files.insert(name.to_string(), file_hash(&path)?);
    }
    let config_text = cfg.to_toml();
    fs::write(out.join("config.toml"), &config_text)?;
    files.insert("config.toml".into(), sha256_hex(config_text.as_bytes()));
    let data_file = if noisy.is_some() { "data_noisy.bin" } else { "data_clean.bin" };
    let manifest = Manifest {
        kind: "simulate".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        name: cfg.name.clone(),
        seed: cfg.seed,
        config_hash: config_hash(cfg),
        data_hash: files[data_file].clone(),
        config: config_text,
        files,
        run: None,
    };
    manifest.write(out)?;
    Ok(manifest)
}

/// Sensor data and ground truth loaded from a bundle.
pub struct Bundle {
    pub manifest: Manifest,
    pub data: SensorData,
    pub truth: Option<ArrayD<f64>>,
}

impl Bundle {
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = Manifest::read(dir)?;
        if manifest.kind != "simulate" {
            return Err(PatError::InvalidArgument(format!("{} is not a data bundle", dir.display())));
        }
        let name = if manifest.files.contains_key("data_noisy.bin") {
            "data_noisy.bin"
        } else {
            "data_clean.bin"
        };
        let path = dir.join(name);
        if file_hash(&path)? != manifest.data_hash {
            return Err(PatError::Format(format!("{} does not match the manifest hash", path.display())));
        }
        let (field, meta) = read_field(&path)?;
        let samples = field
            .into_dimensionality::<Ix2>()
            .map_err(|e| PatError::Format(format!("sensor data: {e}")))?;
        let data = SensorData {
            samples,
            dt: meta.dt.ok_or_else(|| PatError::Format("sensor data lacks a time step".into()))?,
        };
        let truth_path = dir.join("phantom.bin");
        let truth = if truth_path.exists() {
            Some(read_field(&truth_path)?.0)
        } else {
            None
        };
        Ok(Self { manifest, data, truth })
    }
}

/// Operators, data and Lipschitz constants for repeated runs on one
/// experiment.
pub struct Reconstruction {
    pub experiment: Experiment,
    pub data: SensorData,
    pub coarse_data: SensorData,
    pub truth: Option<ArrayD<f64>>,
    pub fine: ForwardOperator,
    pub coarse: ForwardOperator,
    pub cache_dir: Option<PathBuf>,
    fine_l: Option<LipschitzEstimate>,
    coarse_l: Option<LipschitzEstimate>,
}

/// Outcome of one reconstruction run.
pub struct RunOutput {
    pub algorithm: Algorithm,
    pub image: ArrayD<f64>,
    pub records: Vec<IterationRecord>,
    pub recursions: Vec<RecursionLog>,
    pub stop: Option<StopReason>,
    pub min_iterate: f64,
    pub lipschitz: Option<LipschitzInfo>,
}

impl Reconstruction {
    /// `truth` is on the simulation grid interior.
    pub fn new(
        experiment: Experiment,
        data: SensorData,
        truth: Option<ArrayD<f64>>,
        cache_dir: Option<PathBuf>,
    ) -> Result<Self> {
        let fine = experiment.fine_operator()?;
        let coarse = experiment.coarse_operator()?;
        data.check_against(&experiment.sensors, &experiment.reconstruction_grid)?;
        if (data.dt - experiment.reconstruction_grid.dt).abs() > 1e-9 * data.dt {
            return Err(PatError::ShapeMismatch(format!(
                "data sampled at dt = {:e}, configuration expects {:e}",
                data.dt, experiment.reconstruction_grid.dt
            )));
        }
        if let Some(t) = &truth {
            experiment.simulation_grid.check_interior(t)?;
        }
        let coarse_data = restrict_data(&data)?;
        Ok(Self {
            experiment,
            data,
            coarse_data,
            truth,
            fine,
            coarse,
            cache_dir,
            fine_l: None,
            coarse_l: None,
        })
    }

    fn estimate(&self, op: &ForwardOperator) -> Result<LipschitzEstimate> {
        let o = &self.experiment.config.optimizer;
        lipschitz_cached(op, o.lipschitz_iters, o.lipschitz_seed, self.cache_dir.as_deref())
    }

    pub fn fine_lipschitz(&mut self) -> Result<LipschitzEstimate> {
        if self.fine_l.is_none() {
            self.fine_l = Some(self.estimate(&self.fine)?);
        }
        Ok(self.fine_l.clone().unwrap())
    }

    pub fn coarse_lipschitz(&mut self) -> Result<LipschitzEstimate> {
        if self.coarse_l.is_none() {
            self.coarse_l = Some(self.estimate(&self.coarse)?);
        }
        Ok(self.coarse_l.clone().unwrap())
    }

    pub fn relative_error(&self, x: &ArrayD<f64>) -> Option<f64> {
        let t = self.truth.as_ref()?;
        relative_error(x, &self.experiment.reconstruction_grid, t, &self.experiment.simulation_grid).ok()
    }

    pub fn solver_options(&self, max_iters: Option<usize>) -> SolverOptions {
        let o = &self.experiment.config.optimizer;
        SolverOptions {
            max_iters: max_iters.unwrap_or(o.max_iters),
            eps_d: o.eps_d,
            divergence_factor: o.divergence_factor,
        }
    }

    /// Runs `algorithm`, forwarding every iterate to `on_iterate`.
    pub fn run(
        &mut self,
        algorithm: Algorithm,
        max_iters: Option<usize>,
        on_iterate: Option<&mut dyn FnMut(&IterationRecord, &ArrayD<f64>)>,
    ) -> Result<RunOutput> {
        if algorithm == Algorithm::Tr {
            return self.run_time_reversal();
        }
        let cfg = self.experiment.config.clone();
        let fine_l = self.fine_lipschitz()?;
        let coarse_l = if algorithm.multigrid() {
            Some(self.coarse_lipschitz()?)
        } else {
            None
        };
        let lipschitz = Some(LipschitzInfo {
            fine: fine_l.value,
            coarse: coarse_l.as_ref().map(|l| l.value),
            cache_hit: fine_l.cache_hit && coarse_l.as_ref().is_none_or(|l| l.cache_hit),
            iterations: cfg.optimizer.lipschitz_iters,
            seed: cfg.optimizer.lipschitz_seed,
        });
        let objective = cfg.optimizer.objective(algorithm.accelerated(), cfg.multigrid.rho_tv);
        let fine = Problem {
            op: &self.fine,
            data: &self.data,
            lipschitz: fine_l.value,
            objective: objective.clone(),
        };
        let options = self.solver_options(max_iters);
        let momentum = if algorithm.accelerated() {
            Momentum::Nesterov
        } else {
            Momentum::None
        };
        let re = |x: &ArrayD<f64>| self.relative_error(x).unwrap_or(f64::NAN);
        let re_ref: Option<&dyn Fn(&ArrayD<f64>) -> f64> = self.truth.as_ref().map(|_| &re as _);
        let mut on_iterate = on_iterate;
        let mut min_iterate = 0.0f64;
        let mut track = |r: &IterationRecord, x: &ArrayD<f64>| {
            min_iterate = x.iter().cloned().fold(min_iterate, f64::min);
            if let Some(f) = on_iterate.as_mut() {
                f(r, x);
            }
        };
        let mut callbacks = Callbacks {
            relative_error: re_ref,
            on_iterate: Some(&mut track),
        };
        let (result, recursions) = if let Some(cl) = coarse_l {
            let pair = LevelPair {
                fine,
                coarse: Problem {
                    op: &self.coarse,
                    data: &self.coarse_data,
                    lipschitz: cl.value,
                    objective,
                },
            };
            let mg = mg_solve(&pair, None, &cfg.multigrid, &options, momentum, &mut callbacks)?;
            (mg.result, mg.recursions)
        } else {
            (proximal_gradient(&fine, None, &options, momentum, &mut callbacks)?, Vec::new())
        };
        drop(callbacks);
        Ok(RunOutput {
            algorithm,
            image: result.x,
            records: result.records,
            recursions,
            stop: Some(result.stop),
            min_iterate,
            lipschitz,
        })
    }

    fn run_time_reversal(&self) -> Result<RunOutput> {
        let clock = Instant::now();
        let image = self.fine.propagator().time_reversal(&self.data)?;
        let hx = self.fine.forward(&image)?;
        let lambda = self.experiment.config.optimizer.lambda;
        let r = SensorData {
            samples: &hx.samples - &self.data.samples,
            dt: hx.dt,
        };
        let record = IterationRecord {
            k: 0,
            kind: StepKind::Direct,
            cpu_seconds: clock.elapsed().as_secs_f64(),
            f: crate::optim::composite_value(&r, &image, lambda),
            res: r.norm(),
            re: self.relative_error(&image),
        };
        Ok(RunOutput {
            algorithm: Algorithm::Tr,
            min_iterate: image.iter().cloned().fold(f64::INFINITY, f64::min),
            image,
            records: vec![record],
            recursions: Vec::new(),
            stop: None,
            lipschitz: None,
        })
    }
}

/// Default location of the Lipschitz cache for a bundle.
pub fn default_cache_dir(bundle: &Path) -> PathBuf {
    cache_dir_from_env().unwrap_or_else(|| bundle.join("cache"))
}

/// Reconstructs from a bundle and writes image, history and manifest to `out`.
pub fn cmd_reconstruct(
    cfg: &ExperimentConfig,
    bundle_dir: &Path,
    algorithm: Algorithm,
    max_iters: Option<usize>,
    out: &Path,
) -> Result<Manifest> {
    let bundle = Bundle::load(bundle_dir)?;
    check_geometry(cfg, &bundle.manifest)?;
    let experiment = Experiment::new(cfg.clone())?;
    let mut rec = Reconstruction::new(experiment, bundle.data, bundle.truth, Some(default_cache_dir(bundle_dir)))?;
    let run = rec.run(algorithm, max_iters, None)?;
    fs::create_dir_all(out)?;
    let grid = &rec.experiment.reconstruction_grid;
    visualize(
        &run.image,
        DISPLAY_THRESHOLD,
        out,
        "image",
        &grid_meta(grid, "Pa", &format!("{algorithm} reconstruction")),
    )?;
    write_records(&out.join("history.csv"), &run.records)?;
    if !run.recursions.is_empty() {
        fs::write(out.join("recursions.json"), serde_json::to_string_pretty(&run.recursions)?)?;
    }
    let mut files = BTreeMap::new();
    for name in ["image.bin", "history.csv", "recursions.json"] {
        let p = out.join(name);
        if p.exists() {
            files.insert(name.to_string(), file_hash(&p)?);
        }
    }
    let last = run.records.last().expect("at least one record");
    let config_text = cfg.to_toml();
    fs::write(out.join("config.toml"), &config_text)?;
    let manifest = Manifest {
        kind: "reconstruct".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        name: cfg.name.clone(),
        seed: cfg.seed,
        config_hash: config_hash(cfg),
        data_hash: bundle.manifest.data_hash.clone(),
        config: config_text,
        files,
        run: Some(RunInfo {
            algorithm,
            max_iters: rec.solver_options(max_iters).max_iters,
            iterations: last.k,
            stop: run.stop,
            lipschitz: run.lipschitz.clone(),
            recursive_steps: run.records.iter().filter(|r| r.kind == StepKind::Recursive).count(),
            min_iterate: run.min_iterate,
            final_f: last.f,
            final_res: last.res,
            final_re: last.re,
        }),
    };
    manifest.write(out)?;
    Ok(manifest)
}

/// Rejects a configuration whose acquisition geometry differs from the one
/// the bundle was simulated with.
fn check_geometry(cfg: &ExperimentConfig, bundle: &Manifest) -> Result<()> {
    let theirs = ExperimentConfig::from_toml(&bundle.config)?;
    let mut diffs = Vec::new();
    if theirs.sensors != cfg.sensors {
        diffs.push("sensor array");
    }
    if theirs.time.nt != cfg.time.nt || theirs.dt() != cfg.dt() {
        diffs.push("time axis");
    }
    if theirs.simulation != cfg.simulation || theirs.reconstruction != cfg.reconstruction {
        diffs.push("grids");
    }
    if diffs.is_empty() {
        Ok(())
    } else {
        Err(PatError::ShapeMismatch(format!(
            "bundle and configuration disagree on: {}",
            diffs.join(", ")
        )))
    }
}

/// Time at which a history first reaches `target`.
pub fn time_to_target(records: &[IterationRecord], target: f64) -> Option<f64> {
    records.iter().find(|r| r.f <= target).map(|r| r.cpu_seconds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub run: String,
    pub algorithm: Option<Algorithm>,
    #[serde(with = "extended_f64")]
    pub final_f: f64,
    pub final_re: Option<f64>,
    pub seconds_to_target: Option<f64>,
    /// Baseline time to target divided by this run's.
    pub speedup: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Final objective of the first run; every run is timed to reach it.
    #[serde(with = "extended_f64")]
    pub target_f: f64,
    pub rows: Vec<ComparisonRow>,
    pub notices: Vec<String>,
}

/// Merges the histories of finished runs and plots F, RES and RE against CPU
/// time. The first directory is the baseline for the time-to-target ratios.
pub fn cmd_compare(dirs: &[PathBuf], out: &Path) -> Result<Comparison> {
    if dirs.len() < 2 {
        return Err(PatError::InvalidArgument("compare needs at least two result directories".into()));
    }
    let mut runs = Vec::new();
    for d in dirs {
        let m = Manifest::read(d)?;
        let records = read_records(&d.join("history.csv"))?;
        if records.is_empty() {
            return Err(PatError::Format(format!("{} has an empty history", d.display())));
        }
        runs.push((d, m, records));
    }
    let hash = &runs[0].1.data_hash;
    if let Some((d, _, _)) = runs.iter().find(|r| &r.1.data_hash != hash) {
        return Err(PatError::InvalidArgument(format!(
            "{} was reconstructed from different data than {}",
            d.display(),
            runs[0].0.display()
        )));
    }
    fs::create_dir_all(out)?;
    let label = |d: &Path| d.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut merged = String::from("run,");
    merged.push_str(crate::optim::CSV_HEADER);
    merged.push('\n');
    for (d, _, records) in &runs {
        for line in records_to_csv(records).lines().skip(1) {
            merged.push_str(&format!("{},{line}\n", label(d)));
        }
    }
    fs::write(out.join("comparison.csv"), merged)?;

    let mut notices = Vec::new();
    let curves = |metric: &dyn Fn(&IterationRecord) -> Option<f64>| -> Vec<Curve> {
        runs.iter()
            .enumerate()
            .map(|(i, (_, _, records))| {
                let kept: Vec<&IterationRecord> = records.iter().filter(|r| metric(r).is_some_and(f64::is_finite)).collect();
                Curve {
                    points: kept.iter().map(|r| (r.cpu_seconds, metric(r).unwrap())).collect(),
                    marked: kept.iter().map(|r| r.kind == StepKind::Recursive).collect(),
                    colour: PALETTE[i % PALETTE.len()],
                }
            })
            .collect()
    };
    save_png(&plot_curves(&curves(&|r| Some(r.f)), true, 800, 500), &out.join("F.png"))?;
    save_png(&plot_curves(&curves(&|r| Some(r.res)), true, 800, 500), &out.join("RES.png"))?;
    if runs.iter().all(|(_, _, rs)| rs.iter().all(|r| r.re.is_some())) {
        save_png(&plot_curves(&curves(&|r| r.re), false, 800, 500), &out.join("RE.png"))?;
    } else {
        notices.push("RE plot skipped: at least one run has no relative-error column".into());
    }

    let target_f = runs[0].2.last().unwrap().f;
    let base = time_to_target(&runs[0].2, target_f);
    let rows: Vec<ComparisonRow> = runs
        .iter()
        .map(|(d, m, records)| {
            let t = time_to_target(records, target_f);
            let last = records.last().unwrap();
            ComparisonRow {
                run: label(d),
                algorithm: m.run.as_ref().map(|r| r.algorithm),
                final_f: last.f,
                final_re: last.re,
                seconds_to_target: t,
                speedup: match (base, t) {
                    (Some(b), Some(t)) if t > 0.0 => Some(b / t),
                    _ => None,
                },
            }
        })
        .collect();
    let cmp = Comparison {
        target_f,
        rows,
        notices,
    };
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&cmp)? + "\n")?;
    Ok(cmp)
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "target F = {:.6e} (final F of the first run)", self.target_f)?;
        writeln!(f, "{:<20} {:>14} {:>10} {:>12} {:>9}", "run", "final F", "RE %", "t_target s", "speedup")?;
        let opt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |v| format!("{v:.p$}"));
        for r in &self.rows {
            writeln!(
                f,
                "{:<20} {:>14.6e} {:>10} {:>12} {:>9}",
                r.run,
                r.final_f,
                opt(r.final_re, 2),
                opt(r.seconds_to_target, 2),
                opt(r.speedup, 2)
            )?;
        }
        for n in &self.notices {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}
