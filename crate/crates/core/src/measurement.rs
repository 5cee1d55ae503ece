//! Phantoms, layered media, noise and grid-to-grid resampling used to
//! generate experiment data.

use ndarray::{ArrayD, IxDyn, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};
use crate::grid::Grid;
use crate::medium::Medium;
use crate::sensors::SensorData;

/// A geometric primitive in physical coordinates (meters).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    /// Disc in 2D, ball in 3D.
    Disc { center: Vec<f64>, radius: f64 },
    /// Capsule around the segment `start..end`.
    Vessel {
        start: Vec<f64>,
        end: Vec<f64>,
        radius: f64,
    },
}

impl Shape {
    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            Shape::Disc { center, radius } => dist2(p, center) <= radius * radius,
            Shape::Vessel { start, end, radius } => {
                let seg: Vec<f64> = end.iter().zip(start).map(|(e, s)| e - s).collect();
                let len2: f64 = seg.iter().map(|v| v * v).sum();
                let t = if len2 > 0.0 {
                    (p.iter().zip(start).zip(&seg).map(|((p, s), d)| (p - s) * d).sum::<f64>() / len2)
                        .clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let closest: Vec<f64> = start.iter().zip(&seg).map(|(s, d)| s + t * d).collect();
                dist2(p, &closest) <= radius * radius
            }
        }
    }

    fn points(&self) -> Vec<&Vec<f64>> {
        match self {
            Shape::Disc { center, .. } => vec![center],
            Shape::Vessel { start, end, .. } => vec![start, end],
        }
    }

    fn radius(&self) -> f64 {
        match self {
            Shape::Disc { radius, .. } | Shape::Vessel { radius, .. } => *radius,
        }
    }

    /// Rejects shapes whose extent leaves the interior of `grid`.
    fn check_inside(&self, grid: &Grid) -> Result<()> {
        for p in self.points() {
            if p.len() != grid.ndim() {
                return Err(PatError::InvalidArgument(format!(
                    "shape point {p:?} has wrong dimension for a {}-D grid",
                    grid.ndim()
                )));
            }
            for (ax, &x) in p.iter().enumerate() {
                if x.abs() + self.radius() > grid.interior_half_extent(ax) + 1e-12 {
                    return Err(PatError::InvalidArgument(format!(
                        "shape at {p:?} with radius {} leaves the interior",
                        self.radius()
                    )));
                }
            }
        }
        Ok(())
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn node_coords(grid: &Grid, ix: &IxDyn, offset: usize) -> Vec<f64> {
    (0..grid.ndim()).map(|ax| grid.coord(ax, ix[ax] + offset)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    #[serde(flatten)]
    pub shape: Shape,
    pub amplitude: f64,
}

/// Initial-pressure phantom as a list of primitives; overlapping primitives
/// take the largest amplitude.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    #[serde(default)]
    pub primitives: Vec<Primitive>,
}

impl PhantomSpec {
    /// A branching vessel network inside a disc of radius `extent`, with
    /// trunk amplitude `amplitude` and thinner, weaker branches.
    pub fn vessel_network(seed: u64, extent: f64, amplitude: f64, thickness: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut primitives = Vec::new();
        let trunks = 3;
        for t in 0..trunks {
            let mut angle = rng.random_range(0.0..std::f64::consts::TAU);
            let start_r = extent * rng.random_range(0.55..0.8);
            let mut pos = vec![start_r * angle.cos(), start_r * angle.sin()];
            // head roughly toward the centre
            angle += std::f64::consts::PI + rng.random_range(-0.5..0.5);
            let segments = 5 + t % 2;
            let seg_len = extent * 0.22;
            for s in 0..segments {
                angle += rng.random_range(-0.45..0.45);
                let next = vec![pos[0] + seg_len * angle.cos(), pos[1] + seg_len * angle.sin()];
                if next[0].hypot(next[1]) > extent {
                    break;
                }
                primitives.push(Primitive {
                    shape: Shape::Vessel {
                        start: pos.clone(),
                        end: next.clone(),
                        radius: thickness,
                    },
                    amplitude,
                });
                if s % 2 == 1 {
                    let b = angle + rng.random_range(0.6..1.1) * if rng.random::<bool>() { 1.0 } else { -1.0 };
                    let bl = seg_len * rng.random_range(0.6..1.0);
                    let end = vec![next[0] + bl * b.cos(), next[1] + bl * b.sin()];
                    if end[0].hypot(end[1]) <= extent {
                        primitives.push(Primitive {
                            shape: Shape::Vessel {
                                start: next.clone(),
                                end,
                                radius: thickness * 0.7,
                            },
                            amplitude: amplitude * rng.random_range(0.5..0.9),
                        });
                    }
                }
                pos = next;
            }
        }
        Self { primitives }
    }
}

/// Rasterises a phantom onto the interior of `grid` by point sampling.
pub fn make_phantom(grid: &Grid, spec: &PhantomSpec) -> Result<ArrayD<f64>> {
    for p in &spec.primitives {
        p.shape.check_inside(grid)?;
        if !(p.amplitude >= 0.0 && p.amplitude.is_finite()) {
            return Err(PatError::InvalidArgument("phantom amplitudes must be non-negative".into()));
        }
    }
    let pml = grid.pml_thickness;
    Ok(ArrayD::from_shape_fn(IxDyn(&grid.interior_dims()), |ix| {
        let x = node_coords(grid, &ix, pml);
        spec.primitives
            .iter()
            .filter(|p| p.shape.contains(&x))
            .map(|p| p.amplitude)
            .fold(0.0, f64::max)
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tissue {
    pub c0: f64,
    pub rho0: f64,
    /// dB·MHz^-y·cm^-1.
    pub alpha0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub shape: Shape,
    pub tissue: Tissue,
    /// Marks a labelled interface that data-generation perturbs.
    #[serde(default)]
    pub interface: bool,
}

/// A piecewise-constant medium: a background tissue overpainted by regions
/// in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MediumSpec {
    pub background: Tissue,
    pub y: f64,
    #[serde(default)]
    pub regions: Vec<Region>,
}

impl MediumSpec {
    pub fn build(&self, grid: &Grid) -> Result<Medium> {
        self.build_shifted(grid, 0.0)
    }

    fn build_shifted(&self, grid: &Grid, shift: f64) -> Result<Medium> {
        let mut regions = self.regions.clone();
        for r in regions.iter_mut().filter(|r| r.interface) {
            if let Shape::Disc { radius, .. } = &mut r.shape {
                if shift >= *radius {
                    return Err(PatError::InvalidArgument(format!(
                        "interface shift {shift} exceeds region radius {radius}"
                    )));
                }
                *radius -= shift;
            }
        }
        let dims = IxDyn(&grid.dims);
        let tissue_at = |ix: IxDyn| -> Tissue {
            let x = node_coords(grid, &ix, 0);
            regions
                .iter()
                .rev()
                .find(|r| r.shape.contains(&x))
                .map(|r| r.tissue)
                .unwrap_or(self.background)
        };
        let tissues = ArrayD::from_shape_fn(dims, tissue_at);
        Medium::new(
            tissues.mapv(|t| t.c0),
            tissues.mapv(|t| t.rho0),
            tissues.mapv(|t| t.alpha0),
            self.y,
        )
    }
}

/// Builds the data-generation medium: interfaces marked in `spec` move toward
/// the centre by `shift` meters, then the sound-speed and density maps get
/// additive white Gaussian noise at `awgn_db` relative to each map's power.
pub fn perturb_medium(
    spec: &MediumSpec,
    grid: &Grid,
    awgn_db: Option<f64>,
    shift: f64,
    seed: u64,
) -> Result<Medium> {
    let extent = (0..grid.ndim())
        .map(|ax| grid.dims[ax] as f64 * grid.spacing[ax] / 2.0)
        .fold(f64::INFINITY, f64::min);
    if !(shift >= 0.0) || shift > extent {
        return Err(PatError::InvalidArgument(format!(
            "interface shift {shift} m outside [0, {extent}]"
        )));
    }
    let mut medium = spec.build_shifted(grid, shift)?;
    if let Some(db) = awgn_db {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        add_noise_to_map(&mut medium.c0, db, &mut rng)?;
        add_noise_to_map(&mut medium.rho0, db, &mut rng)?;
        medium = medium.derive_loss_coefficients()?;
    }
    Ok(medium)
}

fn add_noise_to_map(map: &mut ArrayD<f64>, snr_db: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    let power = map.iter().map(|v| v * v).sum::<f64>() / map.len() as f64;
    let std = noise_std(power, snr_db)?;
    let normal = Normal::new(0.0, std).map_err(|e| PatError::InvalidArgument(e.to_string()))?;
    map.iter_mut().for_each(|v| *v += normal.sample(rng));
    Ok(())
}

fn noise_std(power: f64, snr_db: f64) -> Result<f64> {
    if power <= 0.0 {
        return Err(PatError::InvalidArgument("signal power is zero, SNR undefined".into()));
    }
    if snr_db.is_nan() {
        return Err(PatError::InvalidArgument("SNR must not be NaN".into()));
    }
    Ok((power / 10f64.powf(snr_db / 10.0)).sqrt())
}

/// Adds white Gaussian noise at `snr_db` relative to the mean signal power.
/// `f64::INFINITY` returns the data unchanged.
pub fn add_awgn(data: &SensorData, snr_db: f64, seed: u64) -> Result<SensorData> {
    let power = data.samples.iter().map(|v| v * v).sum::<f64>() / data.samples.len() as f64;
    if power <= 0.0 {
        return Err(PatError::InvalidArgument("signal power is zero, SNR undefined".into()));
    }
    if snr_db == f64::INFINITY {
        return Ok(data.clone());
    }
    let std = noise_std(power, snr_db)?;
    let normal = Normal::new(0.0, std).map_err(|e| PatError::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = data.clone();
    out.samples.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    Ok(out)
}

/// Multilinear interpolation of an interior image between two grids that
/// cover the same physical extent. Points beyond the outermost source nodes
/// take the edge values.
pub fn resample_image(image: &ArrayD<f64>, from: &Grid, to: &Grid) -> Result<ArrayD<f64>> {
    from.check_interior(image)?;
    if !from.same_extent(to) {
        return Err(PatError::ShapeMismatch("grids cover different extents".into()));
    }
    if from.interior_dims() == to.interior_dims() {
        return Ok(image.clone());
    }
    let d = from.ndim();
    let src = from.interior_dims();
    // per axis: for each target index, (lower source index, fraction)
    let tables: Vec<Vec<(usize, f64)>> = (0..d)
        .map(|ax| {
            let n_to = to.interior_dims()[ax];
            (0..n_to)
                .map(|j| {
                    let x = to.coord(ax, j + to.pml_thickness);
                    let f = from.index_of(ax, x) - from.pml_thickness as f64;
                    let f = f.clamp(0.0, (src[ax] - 1) as f64);
                    let i0 = (f.floor() as usize).min(src[ax].saturating_sub(2));
                    (i0, f - i0 as f64)
                })
                .collect()
        })
        .collect();
    Ok(ArrayD::from_shape_fn(IxDyn(&to.interior_dims()), |ix| {
        let mut acc = 0.0;
        let mut at = vec![0usize; d];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            for ax in 0..d {
                let (i0, fr) = tables[ax][ix[ax]];
                let bit = (corner >> ax) & 1;
                at[ax] = i0 + bit;
                w *= if bit == 1 { fr } else { 1.0 - fr };
            }
            if w != 0.0 {
                acc += w * image[IxDyn(&at)];
            }
        }
        acc
    }))
}

/// Empirical SNR (dB) of `noisy` against `clean`.
pub fn measured_snr_db(clean: &SensorData, noisy: &SensorData) -> f64 {
    let mut sig = 0.0;
    let mut err = 0.0;
    Zip::from(&clean.samples).and(&noisy.samples).for_each(|&c, &n| {
        sig += c * c;
        err += (n - c) * (n - c);
    });
    10.0 * (sig / err).log10()
}
