//! Uniform linear array geometry, spherical-wave (near-field) and planar-wave
//! (far-field) steering vectors, multipath channel synthesis and the Rayleigh
//! distance.
//!
//! Elements lie on the x axis, centered at the origin. A point at range `r`
//! and angle `θ` sits at `(r cosθ, r sinθ)`, so `θ` is measured from the
//! array axis and `θ = π/2` is broadside.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Unit phasor `exp(-j 2π cycles)`, reducing the cycle count to its fractional
/// part first so large delays keep full phase precision.
#[inline]
pub fn phasor_from_cycles(cycles: f64) -> Complex64 {
    let frac = cycles - cycles.round();
    Complex64::from_polar(1.0, -2.0 * PI * frac)
}

/// Uniform linear array with symmetric element offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    num_elements: usize,
    spacing_m: f64,
    element_offsets_s: Vec<f64>,
}

impl ArrayGeometry {
    /// Builds an `n`-element array with spacing `spacing_m`.
    pub fn new(num_elements: usize, spacing_m: f64) -> Result<Self> {
        if num_elements < 2 {
            return Err(Error::Domain(format!(
                "array needs at least 2 elements, got {num_elements}"
            )));
        }
        if !(spacing_m.is_finite() && spacing_m > 0.0) {
            return Err(Error::Domain(format!(
                "element spacing must be positive, got {spacing_m} m"
            )));
        }
        let center = (num_elements as f64 - 1.0) / 2.0;
        let step = spacing_m / SPEED_OF_LIGHT;
        let element_offsets_s = (0..num_elements)
            .map(|n| (n as f64 - center) * step)
            .collect();
        Ok(Self {
            num_elements,
            spacing_m,
            element_offsets_s,
        })
    }

    /// Array with half-wavelength spacing at `center_hz`.
    pub fn half_wavelength(num_elements: usize, center_hz: f64) -> Result<Self> {
        Self::new(num_elements, SPEED_OF_LIGHT / center_hz / 2.0)
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn spacing_m(&self) -> f64 {
        self.spacing_m
    }

    /// Per-element propagation offsets `t_n` in seconds.
    pub fn element_offsets_s(&self) -> &[f64] {
        &self.element_offsets_s
    }

    /// Element x coordinate in meters.
    pub fn element_position_m(&self, n: usize) -> f64 {
        (n as f64 - (self.num_elements as f64 - 1.0) / 2.0) * self.spacing_m
    }

    /// Aperture `(N - 1) d` in meters.
    pub fn aperture_m(&self) -> f64 {
        (self.num_elements as f64 - 1.0) * self.spacing_m
    }

    /// Exact propagation delay from element `n` to `p`, in seconds.
    #[inline]
    pub fn spherical_delay_s(&self, p: &PolarPoint, n: usize) -> f64 {
        let tau = p.delay_s();
        let t = self.element_offsets_s[n];
        (tau * tau + t * t - 2.0 * tau * t * p.angle_rad.cos()).sqrt()
    }
}

/// Location relative to the array center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    pub range_m: f64,
    pub angle_rad: f64,
}

impl PolarPoint {
    /// Validated constructor: `r > 0`, `θ ∈ (0, π)`.
    pub fn new(range_m: f64, angle_rad: f64) -> Result<Self> {
        let p = Self { range_m, angle_rad };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.range_m.is_finite() && self.range_m > 0.0) {
            return Err(Error::Domain(format!(
                "range must be positive, got {} m",
                self.range_m
            )));
        }
        if !(self.angle_rad > 0.0 && self.angle_rad < PI) {
            return Err(Error::Domain(format!(
                "angle must lie in (0, pi), got {} rad",
                self.angle_rad
            )));
        }
        Ok(())
    }

    /// One-way delay `r / c`.
    pub fn delay_s(&self) -> f64 {
        self.range_m / SPEED_OF_LIGHT
    }

    /// Cartesian `(x, y)` with the array along x.
    pub fn to_cartesian(&self) -> (f64, f64) {
        (
            self.range_m * self.angle_rad.cos(),
            self.range_m * self.angle_rad.sin(),
        )
    }

    /// Inverse of [`PolarPoint::to_cartesian`]; fails for points on or behind the array axis.
    pub fn from_cartesian(x: f64, y: f64) -> Result<Self> {
        Self::new(x.hypot(y), y.atan2(x))
    }
}

/// OFDM subcarrier grid with `M + 1` subcarriers centered on `f_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct CarrierGrid {
    center_hz: f64,
    num_subcarriers: usize,
    spacing_hz: f64,
}

impl CarrierGrid {
    /// `num_subcarriers` is `M + 1` and must be odd.
    pub fn new(center_hz: f64, num_subcarriers: usize, spacing_hz: f64) -> Result<Self> {
        if !(center_hz.is_finite() && center_hz > 0.0) {
            return Err(Error::Domain(format!(
                "center frequency must be positive, got {center_hz} Hz"
            )));
        }
        if num_subcarriers == 0 || num_subcarriers.is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "subcarrier count M+1 must be odd, got {num_subcarriers}"
            )));
        }
        if !(spacing_hz.is_finite() && spacing_hz >= 0.0) {
            return Err(Error::Domain(format!(
                "subcarrier spacing must be nonnegative, got {spacing_hz} Hz"
            )));
        }
        let half = (num_subcarriers / 2) as f64;
        if center_hz - half * spacing_hz <= 0.0 {
            return Err(Error::Domain(
                "lowest subcarrier frequency must be positive".into(),
            ));
        }
        Ok(Self {
            center_hz,
            num_subcarriers,
            spacing_hz,
        })
    }

    /// Grid spanning `bandwidth_hz = M Δf`.
    pub fn with_bandwidth(center_hz: f64, num_subcarriers: usize, bandwidth_hz: f64) -> Result<Self> {
        let m = num_subcarriers.saturating_sub(1).max(1) as f64;
        Self::new(center_hz, num_subcarriers, bandwidth_hz / m)
    }

    /// Single-frequency grid.
    pub fn narrowband(center_hz: f64) -> Result<Self> {
        Self::new(center_hz, 1, 0.0)
    }

    pub fn center_hz(&self) -> f64 {
        self.center_hz
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn spacing_hz(&self) -> f64 {
        self.spacing_hz
    }

    /// `M`, the largest subcarrier index.
    pub fn max_index(&self) -> usize {
        self.num_subcarriers - 1
    }

    /// `M / 2`, the index of the center subcarrier.
    pub fn center_index(&self) -> usize {
        self.num_subcarriers / 2
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.max_index() as f64 * self.spacing_hz
    }

    /// `f_c + (m - M/2) Δf`; exact at `m = M/2`.
    pub fn freq(&self, m: usize) -> f64 {
        let k = m as f64 - self.center_index() as f64;
        self.center_hz + k * self.spacing_hz
    }

    pub fn check_index(&self, m: usize) -> Result<()> {
        if m >= self.num_subcarriers {
            return Err(Error::Index(format!(
                "subcarrier {m} outside 0..={}",
                self.max_index()
            )));
        }
        Ok(())
    }

    /// Center wavelength `c / f_c`.
    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.center_hz
    }
}

/// Which propagation model produced a steering vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteeringModel {
    NearField,
    FarField,
}

/// Per-antenna response for one subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub values: Vec<Complex64>,
    pub subcarrier_index: usize,
    pub model: SteeringModel,
}

fn check_point(geom: &ArrayGeometry, p: &PolarPoint) -> Result<()> {
    p.validate()?;
    if p.range_m <= geom.aperture_m() / 2.0 {
        return Err(Error::Domain(format!(
            "range {} m lies inside the array half-aperture {} m",
            p.range_m,
            geom.aperture_m() / 2.0
        )));
    }
    Ok(())
}

/// Exact spherical-wave response `exp(-j 2π f_m sqrt(τ² + t_n² - 2 τ t_n cosθ))`.
pub fn near_field_steering(
    geom: &ArrayGeometry,
    p: &PolarPoint,
    grid: &CarrierGrid,
    m: usize,
) -> Result<SteeringVector> {
    grid.check_index(m)?;
    check_point(geom, p)?;
    let f = grid.freq(m);
    let values = (0..geom.num_elements())
        .map(|n| phasor_from_cycles(f * geom.spherical_delay_s(p, n)))
        .collect();
    Ok(SteeringVector {
        values,
        subcarrier_index: m,
        model: SteeringModel::NearField,
    })
}

/// Planar-wave response `exp(-j 2π f_m (τ - t_n cosθ))`.
pub fn far_field_steering(
    geom: &ArrayGeometry,
    p: &PolarPoint,
    grid: &CarrierGrid,
    m: usize,
) -> Result<SteeringVector> {
    grid.check_index(m)?;
    check_point(geom, p)?;
    let f = grid.freq(m);
    let tau = p.delay_s();
    let cos = p.angle_rad.cos();
    let values = geom
        .element_offsets_s()
        .iter()
        .map(|&t| phasor_from_cycles(f * (tau - t * cos)))
        .collect();
    Ok(SteeringVector {
        values,
        subcarrier_index: m,
        model: SteeringModel::FarField,
    })
}

/// Rayleigh distance `2 D² / λ_c` with `D = (N - 1) d`.
pub fn rayleigh_distance(geom: &ArrayGeometry, grid: &CarrierGrid) -> f64 {
    let d = geom.aperture_m();
    2.0 * d * d / grid.wavelength_m()
}

/// Multipath channel, one row per subcarrier and one column per antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSnapshot {
    pub matrix: DMatrix<Complex64>,
    pub paths: Vec<(PolarPoint, Complex64)>,
}

/// Superposes near-field responses of every path on every subcarrier.
pub fn synthesize_channel(
    geom: &ArrayGeometry,
    grid: &CarrierGrid,
    paths: &[(PolarPoint, Complex64)],
) -> Result<ChannelSnapshot> {
    if paths.is_empty() {
        return Err(Error::Domain("channel needs at least one path".into()));
    }
    let mut matrix = DMatrix::zeros(grid.num_subcarriers(), geom.num_elements());
    for (p, gain) in paths {
        for m in 0..grid.num_subcarriers() {
            let a = near_field_steering(geom, p, grid, m)?;
            for (n, v) in a.values.iter().enumerate() {
                matrix[(m, n)] += gain * v;
            }
        }
    }
    Ok(ChannelSnapshot {
        matrix,
        paths: paths.to_vec(),
    })
}

/// Largest per-entry phase gap between the near- and far-field models over
/// every antenna and subcarrier.
pub fn max_model_phase_error(geom: &ArrayGeometry, grid: &CarrierGrid, p: &PolarPoint) -> Result<f64> {
    check_point(geom, p)?;
    let tau = p.delay_s();
    let cos = p.angle_rad.cos();
    let mut worst = 0.0f64;
    for m in 0..grid.num_subcarriers() {
        let f = grid.freq(m);
        for (n, &t) in geom.element_offsets_s().iter().enumerate() {
            // Difference of delays first, so the comparison does not lose the
            // sub-cycle part to the common delay.
            let near = geom.spherical_delay_s(p, n);
            let far = tau - t * cos;
            let gap = f * (near - far);
            let frac = gap - gap.round();
            worst = worst.max((2.0 * PI * frac).abs());
        }
    }
    Ok(worst)
}
