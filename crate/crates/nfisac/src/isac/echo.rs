//! Echo model of the sensing subcarriers and the arc-point angle estimator.
//!
//! Subcarrier `m` illuminates its focal point on the arc. A target at
//! `(θ_t, r_t)` returns `y_m = β G_m √p_m + n_m` with the one-way beam gain
//! `G_m = |w_mᴴ a_m(θ_t, r_t)|`. The estimator picks the arc point with the
//! strongest normalized echo and refines it with a parabola through three
//! neighbouring arc points.

use num_complex::Complex64;

use crate::array::{near_field_steering, ArrayGeometry, CarrierGrid, PolarPoint};
use crate::codebook::Beamformer;
use crate::error::{Error, Result};
use crate::squint::SquintTrajectory;

/// Received echo on one sensing subcarrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Echo {
    pub m: usize,
    pub amplitude: Complex64,
    pub power_w: f64,
}

/// One-way amplitude gain `|wᴴ a_m(target)|`.
pub fn echo_gain(
    geom: &ArrayGeometry,
    grid: &CarrierGrid,
    w: &Beamformer,
    m: usize,
    target: &PolarPoint,
) -> Result<f64> {
    let a = near_field_steering(geom, target, grid, m)?;
    Ok(w.gain(&a.values).sqrt())
}

/// `β G √p + n`.
pub fn echo_sample(gain: f64, reflectivity: f64, power_w: f64, noise: Complex64) -> Complex64 {
    Complex64::new(reflectivity * gain * power_w.sqrt(), 0.0) + noise
}

/// Vertex of the parabola through the peak sample and its neighbours.
///
/// `xs` must be strictly increasing with at least three entries. At the ends of
/// the axis the window shifts inward; the vertex is kept within one spacing of
/// the window. A non-concave fit returns the peak sample position.
pub fn parabolic_peak(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() < 3 || xs.len() != ys.len() {
        return Err(Error::Domain("need at least three samples".into()));
    }
    let i = ys
        .iter()
        .enumerate()
        .fold(0, |b, (k, &v)| if v > ys[b] { k } else { b });
    let j = i.clamp(1, xs.len() - 2);
    let (x0, x1, x2) = (xs[j - 1], xs[j], xs[j + 1]);
    let (y0, y1, y2) = (ys[j - 1], ys[j], ys[j + 1]);
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    if !(a < 0.0) {
        return Ok(xs[i]);
    }
    let v = -b / (2.0 * a);
    Ok(v.clamp(x0 - (x1 - x0), x2 + (x2 - x1)))
}

/// Angle estimate from echoes whose arc points are the trajectory focal angles.
pub fn sense_from_echoes(traj: &SquintTrajectory, echoes: &[Echo]) -> Result<f64> {
    let mut samples = echoes
        .iter()
        .map(|e| {
            let fp = traj
                .for_subcarrier(e.m)
                .ok_or_else(|| Error::Index(format!("subcarrier {} not on the trajectory", e.m)))?;
            Ok((fp.point.angle_rad, e))
        })
        .collect::<Result<Vec<_>>>()?;
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ys = samples
        .iter()
        .map(|(_, e)| {
            if e.power_w > 0.0 {
                Ok(e.amplitude.norm() / e.power_w.sqrt())
            } else {
                Err(Error::Domain(format!("sensing subcarrier {} has no power", e.m)))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    estimate_on_arc(&xs, &ys)
}

/// Argmax of normalized echo amplitude over arc angles with parabolic refinement.
pub fn estimate_on_arc(arc_angles: &[f64], amplitudes: &[f64]) -> Result<f64> {
    if arc_angles.len() < 3 {
        return Err(Error::Domain("need at least three sensing subcarriers".into()));
    }
    if arc_angles.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("arc angles must be distinct".into()));
    }
    if amplitudes.iter().all(|&a| a == 0.0) {
        return Err(Error::NoDetection("all echoes are zero".into()));
    }
    parabolic_peak(arc_angles, amplitudes)
}
