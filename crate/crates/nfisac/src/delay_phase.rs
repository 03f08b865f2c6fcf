//! Delay-phase front end: one true-time delay and one phase shifter per
//! antenna, and a least-squares fit of both so that each subcarrier's beam
//! lands on a requested point of a trajectory.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::array::{phasor_from_cycles, ArrayGeometry, CarrierGrid, PolarPoint, SPEED_OF_LIGHT};
use crate::codebook::{Beamformer, DesignModel, PolarGrid};
use crate::error::{Error, Result};
use crate::squint::{focal_points_for, SquintTrajectory};

/// Per-antenna delays and phase offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayPhaseConfig {
    pub delays_s: Vec<f64>,
    pub phases_rad: Vec<f64>,
    /// Hardware delay range `[0, T_max]`; `None` means unbounded.
    pub max_delay_s: Option<f64>,
}

impl DelayPhaseConfig {
    pub fn new(delays_s: Vec<f64>, phases_rad: Vec<f64>, max_delay_s: Option<f64>) -> Result<Self> {
        if delays_s.len() != phases_rad.len() || delays_s.is_empty() {
            return Err(Error::Config(
                "delays and phases must be nonempty and of equal length".into(),
            ));
        }
        let cfg = Self {
            delays_s,
            phases_rad,
            max_delay_s,
        };
        cfg.check_bounds()?;
        Ok(cfg)
    }

    /// Uniform zero configuration.
    pub fn zeros(n: usize) -> Self {
        Self {
            delays_s: vec![0.0; n],
            phases_rad: vec![0.0; n],
            max_delay_s: None,
        }
    }

    pub fn len(&self) -> usize {
        self.delays_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays_s.is_empty()
    }

    /// Shifts delays so the smallest is zero. Gains are unchanged because the
    /// shift is a common phase on each subcarrier.
    pub fn normalize(&mut self) {
        let min = self.delays_s.iter().cloned().fold(f64::INFINITY, f64::min);
        self.delays_s.iter_mut().for_each(|d| *d -= min);
    }

    pub fn check_bounds(&self) -> Result<()> {
        if self.delays_s.iter().chain(&self.phases_rad).any(|v| !v.is_finite()) {
            return Err(Error::Config("delays and phases must be finite".into()));
        }
        let tmax = self.max_delay_s.unwrap_or(f64::INFINITY);
        let tol = 1e-12 * if tmax.is_finite() { tmax } else { 0.0 };
        for (n, &d) in self.delays_s.iter().enumerate() {
            if d < -tol || d > tmax + tol {
                return Err(Error::Config(format!(
                    "delay {d} s on antenna {n} outside [0, {tmax}] s"
                )));
            }
        }
        Ok(())
    }

    /// Rows `(n, delay_s, phase_rad)`.
    pub fn rows(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.delays_s
            .iter()
            .zip(&self.phases_rad)
            .enumerate()
            .map(|(n, (&d, &p))| (n, d, p))
    }
}

/// Beam produced on subcarrier `m`: `exp(-j 2π f_m δ_n) exp(-j φ_n) / √N`.
pub fn apply_delay_phase(cfg: &DelayPhaseConfig, grid: &CarrierGrid, m: usize) -> Result<Beamformer> {
    grid.check_index(m)?;
    cfg.check_bounds()?;
    let f = grid.freq(m);
    let scale = 1.0 / (cfg.len() as f64).sqrt();
    let weights = cfg
        .delays_s
        .iter()
        .zip(&cfg.phases_rad)
        .map(|(&d, &p)| phasor_from_cycles(f * d + p / (2.0 * PI)) * scale)
        .collect();
    Ok(Beamformer {
        weights,
        design_point: None,
        design_model: DesignModel::DelayPhase,
    })
}

/// Exact spherical delays to `p` with zero phases: frequency-consistent focusing.
pub fn true_time_delay_config(geom: &ArrayGeometry, p: &PolarPoint) -> Result<DelayPhaseConfig> {
    p.validate()?;
    let mut cfg = DelayPhaseConfig {
        delays_s: (0..geom.num_elements())
            .map(|n| geom.spherical_delay_s(p, n))
            .collect(),
        phases_rad: vec![0.0; geom.num_elements()],
        max_delay_s: None,
    };
    cfg.normalize();
    Ok(cfg)
}

/// Requested focal point per subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    entries: Vec<(usize, PolarPoint)>,
}

impl TrajectorySpec {
    /// Subcarrier indices must be unique and sorted.
    pub fn new(entries: Vec<(usize, PolarPoint)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Domain("trajectory needs at least one point".into()));
        }
        if entries.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Domain(
                "trajectory subcarriers must be unique and sorted".into(),
            ));
        }
        for (_, p) in &entries {
            p.validate()?;
        }
        Ok(Self { entries })
    }

    /// Constant-range arc over every subcarrier, `m` mapped affinely from
    /// `theta_start` (m = 0) to `theta_end` (m = M).
    pub fn arc(grid: &CarrierGrid, theta_start: f64, theta_end: f64, range_m: f64) -> Result<Self> {
        let subcarriers: Vec<usize> = (0..grid.num_subcarriers()).collect();
        Self::arc_on(&subcarriers, theta_start, theta_end, range_m)
    }

    /// Arc assigned by rank to the listed subcarriers, uniformly spaced in angle.
    pub fn arc_on(subcarriers: &[usize], theta_start: f64, theta_end: f64, range_m: f64) -> Result<Self> {
        let k = subcarriers.len();
        let entries = subcarriers
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let t = if k == 1 { 0.5 } else { i as f64 / (k as f64 - 1.0) };
                PolarPoint::new(range_m, theta_start + t * (theta_end - theta_start)).map(|p| (m, p))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn entries(&self) -> &[(usize, PolarPoint)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Copy without entry `index`.
    pub fn without(&self, index: usize) -> Result<Self> {
        let mut e = self.entries.clone();
        e.remove(index);
        Self::new(e)
    }
}

/// Outcome of a least-squares trajectory fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub config: DelayPhaseConfig,
    /// Root-mean-square wrapped phase residual, radians.
    pub rms_residual_rad: f64,
    /// Sum of squared wrapped phase residuals, rad².
    pub sse_rad2: f64,
}

fn wrap(x: f64) -> f64 {
    x - 2.0 * PI * (x / (2.0 * PI)).round()
}

/// `D_n(p) - r/c`, computed without cancellation.
fn relative_delay_s(t: f64, p: &PolarPoint) -> f64 {
    let tau = p.delay_s();
    let cos = p.angle_rad.cos();
    let dist = (tau * tau + t * t - 2.0 * tau * t * cos).sqrt();
    (t * t - 2.0 * tau * t * cos) / (dist + tau)
}

/// Least-squares delay-phase fit, returning the config and RMS phase residual.
pub fn fit_trajectory(
    geom: &ArrayGeometry,
    grid: &CarrierGrid,
    spec: &TrajectorySpec,
) -> Result<(DelayPhaseConfig, f64)> {
    let r = fit_trajectory_report(geom, grid, spec)?;
    Ok((r.config, r.rms_residual_rad))
}

/// Least-squares fit of `Φ(m, n) ≈ 2π f_m δ_n + φ_n` per antenna.
///
/// Target phases are taken relative to the array center on each subcarrier
/// (a common phase per subcarrier does not change any gain) and expressed as
/// the true-time-delay phase toward the seed point, the entry nearest `M/2`,
/// plus a smooth remainder. The remainder is regressed against frequency.
pub fn fit_trajectory_report(
    geom: &ArrayGeometry,
    grid: &CarrierGrid,
    spec: &TrajectorySpec,
) -> Result<FitReport> {
    let entries = spec.entries();
    for (m, p) in entries {
        grid.check_index(*m)?;
        if p.range_m <= geom.aperture_m() / 2.0 {
            return Err(Error::Domain(format!(
                "requested range {} m lies inside the array",
                p.range_m
            )));
        }
    }
    let center = grid.center_index();
    let seed = entries
        .iter()
        .enumerate()
        .min_by_key(|(_, (m, _))| m.abs_diff(center))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let seed_point = entries[seed].1;
    let k = entries.len();
    let x: Vec<f64> = entries.iter().map(|(m, _)| 2.0 * PI * grid.freq(*m)).collect();
    let x_mean = x.iter().sum::<f64>() / k as f64;
    let sxx: f64 = x.iter().map(|v| (v - x_mean).powi(2)).sum();

    let n_ant = geom.num_elements();
    let mut delays = Vec::with_capacity(n_ant);
    let mut phases = Vec::with_capacity(n_ant);
    let mut sse = 0.0;
    let mut psi = vec![0.0; k];
    for (n, &t) in geom.element_offsets_s().iter().enumerate() {
        let reference = relative_delay_s(t, &seed_point);
        for (j, (_, p)) in entries.iter().enumerate() {
            psi[j] = x[j] * (relative_delay_s(t, p) - reference);
        }
        for j in 2..k {
            let ratio = (x[j] - x[j - 1]) / (x[j - 1] - x[j - 2]);
            let predicted = psi[j - 1] + (psi[j - 1] - psi[j - 2]) * ratio;
            if (psi[j] - predicted).abs() > PI {
                return Err(Error::IllConditioned(format!(
                    "phase on antenna {n} jumps by more than pi at subcarrier {} after detrending",
                    entries[j].0
                )));
            }
        }
        let psi_mean = psi.iter().sum::<f64>() / k as f64;
        let slope = if sxx > 0.0 {
            x.iter()
                .zip(&psi)
                .map(|(xv, pv)| (xv - x_mean) * (pv - psi_mean))
                .sum::<f64>()
                / sxx
        } else {
            0.0
        };
        let intercept = psi_mean - slope * x_mean;
        for j in 0..k {
            let e = wrap(psi[j] - psi_mean - slope * (x[j] - x_mean));
            sse += e * e;
        }
        delays.push(reference + slope);
        phases.push(wrap(intercept));
    }
    let mut config = DelayPhaseConfig {
        delays_s: delays,
        phases_rad: phases,
        max_delay_s: None,
    };
    config.normalize();
    Ok(FitReport {
        config,
        rms_residual_rad: (sse / (k * n_ant) as f64).sqrt(),
        sse_rad2: sse,
    })
}

/// Fitted beams on the requested subcarriers and their measured focal points.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedFit {
    pub config: DelayPhaseConfig,
    pub beams: Vec<Beamformer>,
    pub trajectory: SquintTrajectory,
    /// Largest angle miss of a realized focal point, radians.
    pub max_angle_miss_rad: f64,
    /// Largest range miss of a realized focal point, meters.
    pub max_range_miss_m: f64,
    /// Larger miss of the first and last realized focal angles, radians.
    pub endpoint_miss_rad: f64,
}

/// Arc fit with endpoint calibration. The requested arc end angles are
/// adjusted with a secant update until the first and last realized focal
/// angles, located on `pg`, match `theta_start` and `theta_end`. Interior
/// points are assigned by rank between the requested ends. Returns the
/// iterate with the smallest endpoint miss.
#[allow(clippy::too_many_arguments)]
pub fn fit_arc_calibrated(
    geom: &ArrayGeometry,
    grid: &CarrierGrid,
    subcarriers: &[usize],
    theta_start: f64,
    theta_end: f64,
    range_m: f64,
    pg: &PolarGrid,
    iterations: usize,
) -> Result<CalibratedFit> {
    if subcarriers.len() < 2 {
        return Err(Error::Domain("arc calibration needs at least two subcarriers".into()));
    }
    let wanted = TrajectorySpec::arc_on(subcarriers, theta_start, theta_end, range_m)?;
    let target = [theta_start, theta_end];
    let mut req = target;
    let mut prev: Option<([f64; 2], [f64; 2])> = None;
    let mut best: Option<CalibratedFit> = None;
    for it in 0..=iterations {
        let spec = TrajectorySpec::arc_on(subcarriers, req[0], req[1], range_m)?;
        let (config, _) = fit_trajectory(geom, grid, &spec)?;
        let beams = subcarriers
            .iter()
            .map(|&m| apply_delay_phase(&config, grid, m))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&[Complex64]> = beams.iter().map(|b| b.weights.as_slice()).collect();
        let trajectory = focal_points_for(geom, grid, &refs, subcarriers, pg)?;
        let (mut da, mut dr) = (0.0f64, 0.0f64);
        for (fp, (_, p)) in trajectory.points.iter().zip(wanted.entries()) {
            da = da.max((fp.point.angle_rad - p.angle_rad).abs());
            dr = dr.max((fp.point.range_m - p.range_m).abs());
        }
        let pts = &trajectory.points;
        let realized = [pts[0].point.angle_rad, pts[pts.len() - 1].point.angle_rad];
        let de = (realized[0] - target[0]).abs().max((realized[1] - target[1]).abs());
        if best.as_ref().is_none_or(|b| de < b.endpoint_miss_rad) {
            best = Some(CalibratedFit {
                config,
                beams,
                trajectory,
                max_angle_miss_rad: da,
                max_range_miss_m: dr,
                endpoint_miss_rad: de,
            });
        }
        if it == iterations {
            break;
        }
        let mut next = req;
        for e in 0..2 {
            let slope = match prev {
                Some((pr, pz)) if (req[e] - pr[e]).abs() > 1e-12 && (realized[e] - pz[e]).abs() > 1e-12 => {
                    ((realized[e] - pz[e]) / (req[e] - pr[e])).clamp(0.25, 4.0)
                }
                _ => 1.0,
            };
            next[e] = (req[e] + (target[e] - realized[e]) / slope).clamp(1e-6, PI - 1e-6);
        }
        prev = Some((req, realized));
        req = next;
    }
    best.ok_or_else(|| Error::Domain("calibration produced no fit".into()))
}

/// Largest normalized delay the fit may request for this array, a loose
/// hardware bound: twice the aperture transit time.
pub fn default_max_delay_s(geom: &ArrayGeometry) -> f64 {
    2.0 * geom.aperture_m() / SPEED_OF_LIGHT
}
