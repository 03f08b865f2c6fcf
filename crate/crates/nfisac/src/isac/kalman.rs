//! Constant-velocity Kalman tracking of a target from polar position fixes,
//! and the predicted sensing arc for the next slot.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};

use crate::array::PolarPoint;
use crate::error::{Error, Result};
use crate::isac::allocation::Arc;

/// State `(x, y, vx, vy)` in m and m/s with its covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackState {
    pub state: Vector4<f64>,
    pub covariance: Matrix4<f64>,
}

/// Measurement noise of a polar fix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarNoise {
    pub sigma_range_m: f64,
    pub sigma_angle_rad: f64,
}

impl TrackState {
    pub fn new(state: Vector4<f64>, covariance: Matrix4<f64>) -> Result<Self> {
        let ts = Self { state, covariance };
        ts.check_psd()?;
        Ok(ts)
    }

    pub fn position(&self) -> (f64, f64) {
        (self.state[0], self.state[1])
    }

    /// Symmetric with eigenvalues above `-1e-9 · max`.
    pub fn check_psd(&self) -> Result<()> {
        let p = &self.covariance;
        let scale = p.abs().max().max(f64::MIN_POSITIVE);
        if (p - p.transpose()).abs().max() > 1e-9 * scale {
            return Err(Error::Domain("track covariance is not symmetric".into()));
        }
        let eig = p.symmetric_eigen();
        let max = eig.eigenvalues.max().max(0.0);
        if eig.eigenvalues.min() < -1e-9 * max.max(f64::MIN_POSITIVE) {
            return Err(Error::Domain("track covariance is not positive semidefinite".into()));
        }
        Ok(())
    }
}

fn transition(dt: f64) -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

/// White-acceleration process noise with spectral density `q` (m²/s³) per axis.
fn process_noise(dt: f64, q: f64) -> Matrix4<f64> {
    let (a, b, c) = (dt.powi(3) / 3.0, dt.powi(2) / 2.0, dt);
    let mut m = Matrix4::zeros();
    for (i, j) in [(0, 2), (1, 3)] {
        m[(i, i)] = a * q;
        m[(i, j)] = b * q;
        m[(j, i)] = b * q;
        m[(j, j)] = c * q;
    }
    m
}

fn symmetrize(p: Matrix4<f64>) -> Matrix4<f64> {
    (p + p.transpose()) * 0.5
}

/// Predict over `dt`, then update with an optional polar fix converted to
/// Cartesian coordinates with linearized noise.
pub fn kalman_predict_update(
    ts: &TrackState,
    dt: f64,
    measurement: Option<&PolarPoint>,
    process_noise_q: f64,
    meas_noise: &PolarNoise,
) -> Result<TrackState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("time step must be positive, got {dt} s")));
    }
    if !(process_noise_q >= 0.0) {
        return Err(Error::Domain("process noise density must be nonnegative".into()));
    }
    ts.check_psd()?;
    let f = transition(dt);
    let x = f * ts.state;
    let p = symmetrize(f * ts.covariance * f.transpose() + process_noise(dt, process_noise_q));
    let Some(z) = measurement else {
        return Ok(TrackState {
            state: x,
            covariance: p,
        });
    };
    let (zx, zy) = z.to_cartesian();
    let (c, s) = (z.angle_rad.cos(), z.angle_rad.sin());
    let jac = Matrix2::new(c, -z.range_m * s, s, z.range_m * c);
    let d = Matrix2::new(
        meas_noise.sigma_range_m.powi(2),
        0.0,
        0.0,
        meas_noise.sigma_angle_rad.powi(2),
    );
    let r = jac * d * jac.transpose();
    let h = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
    let innovation = Vector2::new(zx, zy) - h * x;
    let s_mat = h * p * h.transpose() + r;
    let s_inv = s_mat
        .try_inverse()
        .ok_or_else(|| Error::Domain("innovation covariance is singular".into()))?;
    let k = p * h.transpose() * s_inv;
    let i_kh = Matrix4::identity() - k * h;
    let p_new = symmetrize(i_kh * p * i_kh.transpose() + k * r * k.transpose());
    Ok(TrackState {
        state: x + k * innovation,
        covariance: p_new,
    })
}

/// Predicted arc `[θ̂ − w, θ̂ + w]` at the predicted range, with
/// `w = max(half_width, 3 σ_θ)` and `σ_θ` projected from the position covariance.
pub fn predict_arc(ts: &TrackState, dt: f64, half_width_rad: f64) -> Result<Arc> {
    let f = transition(dt);
    let x = f * ts.state;
    let p = f * ts.covariance * f.transpose();
    let (px, py) = (x[0], x[1]);
    let r2 = px * px + py * py;
    if !(r2 > 0.0) {
        return Err(Error::Domain("predicted position at the array origin".into()));
    }
    let theta = py.atan2(px);
    let grad = Vector2::new(-py / r2, px / r2);
    let pos_cov = p.fixed_view::<2, 2>(0, 0).into_owned();
    let var = (grad.transpose() * pos_cov * grad)[(0, 0)].max(0.0);
    let w = half_width_rad.max(3.0 * var.sqrt());
    Ok(Arc {
        theta_start_rad: theta - w,
        theta_end_rad: theta + w,
        range_m: r2.sqrt(),
    })
}
