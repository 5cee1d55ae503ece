//! Reconstruction metrics, the time-reversal baseline and image output.

use std::path::Path;

use image::{Rgb, RgbImage};
use ndarray::{ArrayD, Axis, Ix2};

use crate::error::{PatError, Result};
use crate::field_io::{write_field, FieldMeta};
use crate::grid::Grid;
use crate::measurement::resample_image;
use crate::operator::LinearOperator;
use crate::optim::composite_value;
use crate::sensors::SensorData;
use crate::wave::ForwardOperator;

/// `100 ‖x − truth‖ / ‖truth‖` after interpolating `x` onto the truth grid.
pub fn relative_error(x: &ArrayD<f64>, x_grid: &Grid, truth: &ArrayD<f64>, truth_grid: &Grid) -> Result<f64> {
    let on_truth = resample_image(x, x_grid, truth_grid)?;
    let tn = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    if tn == 0.0 {
        return Err(PatError::InvalidArgument("ground truth is identically zero".into()));
    }
    let en = on_truth
        .iter()
        .zip(truth.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(100.0 * en / tn)
}

/// `‖Hx − p̂‖`.
pub fn residual_norm(op: &dyn LinearOperator, x: &ArrayD<f64>, data: &SensorData) -> Result<f64> {
    let hx = op.apply(x)?;
    Ok((&hx.samples - &data.samples).iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// `½‖Hx − p̂‖² + λ TV(x)`, `+∞` for infeasible `x`.
pub fn objective(op: &dyn LinearOperator, x: &ArrayD<f64>, data: &SensorData, lambda: f64) -> Result<f64> {
    let hx = op.apply(x)?;
    let r = SensorData {
        samples: &hx.samples - &data.samples,
        dt: hx.dt,
    };
    Ok(composite_value(&r, x, lambda))
}

/// Time-reversal reconstruction: the measured traces are re-emitted in
/// reverse order as a pressure condition at the sensors, absorption flipped.
pub fn time_reversal(op: &ForwardOperator, data: &SensorData) -> Result<ArrayD<f64>> {
    op.propagator().time_reversal(data)
}

/// `thres(2x/‖x‖∞, a)`: rescale so the peak magnitude is 2, then zero every
/// entry below `a`.
pub fn threshold_rescale(x: &ArrayD<f64>, a: f64) -> Result<ArrayD<f64>> {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(PatError::InvalidArgument("cannot rescale an all-zero image".into()));
    }
    Ok(x.mapv(|v| {
        let s = 2.0 * v / peak;
        if s >= a {
            s
        } else {
            0.0
        }
    }))
}

/// Maximum-intensity projection along `axis`.
pub fn max_intensity_projection(x: &ArrayD<f64>, axis: usize) -> ArrayD<f64> {
    x.fold_axis(Axis(axis), f64::NEG_INFINITY, |m, &v| m.max(v))
}

/// The "hot" colormap on `[0, 1]`.
pub fn hot(t: f64) -> Rgb<u8> {
    let t = t.clamp(0.0, 1.0);
    let r = (t * 3.0).min(1.0);
    let g = (t * 3.0 - 1.0).clamp(0.0, 1.0);
    let b = (t * 3.0 - 2.0).clamp(0.0, 1.0);
    Rgb([(r * 255.0).round() as u8, (g * 255.0).round() as u8, (b * 255.0).round() as u8])
}

/// Renders a 2-D field with the hot colormap over `[lo, hi]`; axis 0 runs
/// left to right, axis 1 bottom to top.
pub fn render(field: &ArrayD<f64>, lo: f64, hi: f64) -> Result<RgbImage> {
    let f = field
        .view()
        .into_dimensionality::<Ix2>()
        .map_err(|_| PatError::ShapeMismatch(format!("cannot render shape {:?}", field.shape())))?;
    let (nx, ny) = f.dim();
    let span = if hi > lo { hi - lo } else { 1.0 };
    Ok(RgbImage::from_fn(nx as u32, ny as u32, |i, j| {
        hot((f[[i as usize, ny - 1 - j as usize]] - lo) / span)
    }))
}

pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| PatError::Image(e.to_string()))
}

/// Writes the thresholded image as `<stem>.png` plus the raw field as
/// `<stem>.bin`; 3-D fields get one maximum-intensity projection per axis.
pub fn visualize(x: &ArrayD<f64>, a: f64, dir: &Path, stem: &str, meta: &FieldMeta) -> Result<ArrayD<f64>> {
    let shown = threshold_rescale(x, a)?;
    write_field(&dir.join(format!("{stem}.bin")), x, meta)?;
    match x.ndim() {
        2 => save_png(&render(&shown, 0.0, 2.0)?, &dir.join(format!("{stem}.png")))?,
        3 => {
            for ax in 0..3 {
                let mip = max_intensity_projection(&shown, ax);
                save_png(&render(&mip, 0.0, 2.0)?, &dir.join(format!("{stem}-mip{ax}.png")))?;
            }
        }
        d => return Err(PatError::ShapeMismatch(format!("cannot visualise {d}-D fields"))),
    }
    Ok(shown)
}

/// One curve of a line plot; `marked` points get a star marker.
pub struct Curve {
    pub points: Vec<(f64, f64)>,
    pub marked: Vec<bool>,
    pub colour: Rgb<u8>,
}

pub const PALETTE: [Rgb<u8>; 6] = [
    Rgb([31, 119, 180]),
    Rgb([214, 39, 40]),
    Rgb([44, 160, 44]),
    Rgb([148, 103, 189]),
    Rgb([255, 127, 14]),
    Rgb([23, 190, 207]),
];

/// Draws curves on a white canvas with a frame; `log_y` plots log10(y).
pub fn plot_curves(curves: &[Curve], log_y: bool, width: u32, height: u32) -> RgbImage {
    let mut img = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
    let margin = 30.0;
    let ty = |y: f64| if log_y { y.max(f64::MIN_POSITIVE).log10() } else { y };
    let pts = curves.iter().flat_map(|c| c.points.iter()).filter(|p| p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(ty(y));
        y1 = y1.max(ty(y));
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let (w, h) = (width as f64 - 2.0 * margin, height as f64 - 2.0 * margin);
    let map = |x: f64, y: f64| (margin + (x - x0) / (x1 - x0) * w, margin + (1.0 - (ty(y) - y0) / (y1 - y0)) * h);
    let black = Rgb([0, 0, 0]);
    let (l, r, t, b) = (margin, margin + w, margin, margin + h);
    for (a, c) in [((l, t), (r, t)), ((r, t), (r, b)), ((r, b), (l, b)), ((l, b), (l, t))] {
        line(&mut img, a, c, black);
    }
    for c in curves {
        let px: Vec<(f64, f64)> = c.points.iter().filter(|p| p.1.is_finite()).map(|&(x, y)| map(x, y)).collect();
        for w in px.windows(2) {
            line(&mut img, w[0], w[1], c.colour);
        }
        for (p, &m) in c.points.iter().zip(&c.marked) {
            if m && p.1.is_finite() {
                star(&mut img, map(p.0, p.1), c.colour);
            }
        }
    }
    img
}

fn put(img: &mut RgbImage, x: f64, y: f64, c: Rgb<u8>) {
    let (x, y) = (x.round(), y.round());
    if x >= 0.0 && y >= 0.0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

fn line(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), c: Rgb<u8>) {
    let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil().max(1.0) as usize;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        put(img, a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1), c);
    }
}

/// Six-pointed star marker.
fn star(img: &mut RgbImage, p: (f64, f64), c: Rgb<u8>) {
    for k in 0..6 {
        let ang = std::f64::consts::PI / 3.0 * k as f64 + std::f64::consts::FRAC_PI_2;
        line(img, p, (p.0 + 5.0 * ang.cos(), p.1 - 5.0 * ang.sin()), c);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::MatrixOperator;
    use ndarray::IxDyn;

    fn grid() -> Grid {
        Grid::new(vec![16, 16], vec![1e-4; 2], 2, 2.0, 1e-8, 4, 1500.0).unwrap()
    }

    #[test]
    fn relative_error_reference_points() {
        let g = grid();
        let t = ArrayD::from_shape_fn(IxDyn(&g.interior_dims()), |ix| (ix[0] * ix[1]) as f64 + 1.0);
        assert_eq!(relative_error(&t, &g, &t, &g).unwrap(), 0.0);
        assert!((relative_error(&g.interior_zeros(), &g, &t, &g).unwrap() - 100.0).abs() < 1e-12);
        assert!((relative_error(&(&t * 2.0), &g, &t, &g).unwrap() - 100.0).abs() < 1e-12);
        assert!(relative_error(&t, &g, &g.interior_zeros(), &g).is_err());
    }

    #[test]
    fn objective_reference_points() {
        let op = MatrixOperator::identity(vec![3, 3]);
        let zero = ArrayD::zeros(IxDyn(&[3, 3]));
        let data0 = op.apply(&zero).unwrap();
        assert_eq!(objective(&op, &zero, &data0, 0.5).unwrap(), 0.0);
        let x = ArrayD::from_shape_fn(IxDyn(&[3, 3]), |ix| ix[0] as f64);
        let data = op.apply(&ArrayD::from_elem(IxDyn(&[3, 3]), 0.5)).unwrap();
        let res = residual_norm(&op, &x, &data).unwrap();
        assert!((objective(&op, &x, &data, 0.0).unwrap() - 0.5 * res * res).abs() < 1e-14);
        assert!((residual_norm(&op, &zero, &data).unwrap() - data.norm()).abs() < 1e-15);
        let neg = x.mapv(|v| v - 1.0);
        assert_eq!(objective(&op, &neg, &data, 0.1).unwrap(), f64::INFINITY);
    }

    #[test]
    fn threshold_rescale_peak_and_cut() {
        let x = ArrayD::from_shape_vec(IxDyn(&[2, 2]), vec![5.0, 0.2, 1.0, -1.0]).unwrap();
        let v = threshold_rescale(&x, 0.1).unwrap();
        assert_eq!(v.iter().cloned().fold(f64::MIN, f64::max), 2.0);
        assert_eq!(v[[0, 1]], 0.0);
        assert_eq!(v[[1, 0]], 0.4);
        assert_eq!(v[[1, 1]], 0.0);
        assert!(threshold_rescale(&ArrayD::zeros(IxDyn(&[2, 2])), 0.1).is_err());
    }

    #[test]
    fn mip_keeps_bright_voxel() {
        let mut x = ArrayD::zeros(IxDyn(&[4, 5, 6]));
        x[[1, 2, 3]] = 7.0;
        assert_eq!(max_intensity_projection(&x, 0)[[2, 3]], 7.0);
        assert_eq!(max_intensity_projection(&x, 1)[[1, 3]], 7.0);
        assert_eq!(max_intensity_projection(&x, 2)[[1, 2]], 7.0);
    }
}
