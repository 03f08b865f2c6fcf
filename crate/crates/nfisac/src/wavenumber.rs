//! Wavenumber-domain localization with a uniform planar array.
//!
//! A snapshot of a point source is transformed with a centered 2D DFT across
//! the aperture. The spectrum support is a disk whose position gives the
//! direction and whose radius shrinks with range; a calibrated radius-to-range
//! table converts the radius into a range estimate. Only the magnitude
//! spectrum is used, so the estimate needs no phase or timing reference.
//!
//! The array lies in the x–z plane centered at the origin and looks along +y.
//! A source at angle `θ` in the x–y plane has direction cosine `cosθ` along x.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::array::{phasor_from_cycles, PolarPoint, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

/// Resolution of the relative energy weights used for support extraction.
const WEIGHT_LEVELS: f64 = (1u64 << 20) as f64;

/// Uniform planar array in the x–z plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarArray {
    pub nx: usize,
    pub nz: usize,
    pub dx_m: f64,
    pub dz_m: f64,
}

impl PlanarArray {
    pub fn new(nx: usize, nz: usize, dx_m: f64, dz_m: f64) -> Result<Self> {
        if nx < 8 || nz < 8 {
            return Err(Error::Domain(format!(
                "planar array needs at least 8x8 elements, got {nx}x{nz}"
            )));
        }
        if !(dx_m > 0.0 && dz_m > 0.0 && dx_m.is_finite() && dz_m.is_finite()) {
            return Err(Error::Domain("planar array spacings must be positive".into()));
        }
        Ok(Self { nx, nz, dx_m, dz_m })
    }

    /// Element position `(x, 0, z)` of element `(i, k)`.
    pub fn element_position(&self, i: usize, k: usize) -> [f64; 3] {
        [
            (i as f64 - (self.nx as f64 - 1.0) / 2.0) * self.dx_m,
            0.0,
            (k as f64 - (self.nz as f64 - 1.0) / 2.0) * self.dz_m,
        ]
    }

    /// Largest dimension of the aperture, m.
    pub fn aperture_m(&self) -> f64 {
        let ax = (self.nx as f64 - 1.0) * self.dx_m;
        let az = (self.nz as f64 - 1.0) * self.dz_m;
        ax.hypot(az)
    }

    /// Rayleigh distance `2 D² / λ` with `D` the aperture diagonal.
    pub fn rayleigh_distance(&self, f: f64) -> f64 {
        let d = self.aperture_m();
        2.0 * d * d * f / SPEED_OF_LIGHT
    }
}

/// Source in the array's x–y plane at range `r` and angle `θ`.
pub fn source_position(p: &PolarPoint) -> [f64; 3] {
    let (x, y) = p.to_cartesian();
    [x, y, 0.0]
}

/// Single-frequency spherical-wave snapshot, `Nx × Nz`.
pub fn upa_snapshot(arr: &PlanarArray, source: [f64; 3], f: f64, global_phase: f64) -> Result<DMatrix<Complex64>> {
    if source[1] == 0.0 {
        return Err(Error::Domain("source lies on the array plane".into()));
    }
    let rot = Complex64::from_polar(1.0, global_phase);
    Ok(DMatrix::from_fn(arr.nx, arr.nz, |i, k| {
        let e = arr.element_position(i, k);
        let dist = ((e[0] - source[0]).powi(2) + source[1].powi(2) + (e[2] - source[2]).powi(2)).sqrt();
        phasor_from_cycles(f * dist / SPEED_OF_LIGHT) * rot
    }))
}

/// Centered magnitude-squared 2D DFT of a snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct WavenumberSpectrum {
    /// Energy per bin; the zero-wavenumber bin is at `(rows / 2, cols / 2)`.
    pub energy: DMatrix<f64>,
    /// Zero-padding factor per dimension.
    pub oversample: usize,
}

impl WavenumberSpectrum {
    pub fn total_energy(&self) -> f64 {
        self.energy.iter().sum()
    }

    /// Signed wavenumber offset of row `u` and column `v`, in padded bins.
    pub fn bin_offset(&self, u: usize, v: usize) -> (i64, i64) {
        (
            u as i64 - (self.energy.nrows() / 2) as i64,
            v as i64 - (self.energy.ncols() / 2) as i64,
        )
    }
}

/// Unitary centered 2D DFT energy spectrum.
pub fn wavenumber_transform(snapshot: &DMatrix<Complex64>) -> WavenumberSpectrum {
    wavenumber_transform_padded(snapshot, 1)
}

/// Zero-padded transform scaled so total energy matches the snapshot.
pub fn wavenumber_transform_padded(snapshot: &DMatrix<Complex64>, oversample: usize) -> WavenumberSpectrum {
    let oversample = oversample.max(1);
    let (nr, nc) = snapshot.shape();
    let (pr, pc) = (nr * oversample, nc * oversample);
    let mut buf = vec![Complex64::new(0.0, 0.0); pr * pc];
    for i in 0..nr {
        for k in 0..nc {
            buf[i * pc + k] = snapshot[(i, k)];
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_forward(pc);
    for row in buf.chunks_mut(pc) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(pr);
    let mut col = vec![Complex64::new(0.0, 0.0); pr];
    for k in 0..pc {
        for i in 0..pr {
            col[i] = buf[i * pc + k];
        }
        col_fft.process(&mut col);
        for i in 0..pr {
            buf[i * pc + k] = col[i];
        }
    }
    let scale = 1.0 / (pr * pc) as f64;
    let (hr, hc) = (pr / 2, pc / 2);
    let energy = DMatrix::from_fn(pr, pc, |u, v| {
        let i = (u + pr - hr) % pr;
        let k = (v + pc - hc) % pc;
        buf[i * pc + k].norm_sqr() * scale
    });
    WavenumberSpectrum { energy, oversample }
}

/// Element-wise mean of spectra with equal shapes.
pub fn average_spectra(spectra: &[WavenumberSpectrum]) -> Result<WavenumberSpectrum> {
    let first = spectra
        .first()
        .ok_or_else(|| Error::Domain("no spectra to average".into()))?;
    let mut energy = DMatrix::zeros(first.energy.nrows(), first.energy.ncols());
    for s in spectra {
        if s.energy.shape() != energy.shape() || s.oversample != first.oversample {
            return Err(Error::Domain("spectra differ in shape".into()));
        }
        energy += &s.energy;
    }
    energy /= spectra.len() as f64;
    Ok(WavenumberSpectrum {
        energy,
        oversample: first.oversample,
    })
}

/// Thresholded spectrum support summarized as a disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportCircle {
    /// Energy-weighted centroid, in unpadded wavenumber bins from zero.
    pub center_bins: (f64, f64),
    /// Equivalent-area radius in unpadded bins; zero for a single bin.
    pub radius_bins: f64,
    pub threshold_used: f64,
    pub support_bins: usize,
}

/// Extracts the disk of bins with energy at least `threshold_frac` of the peak.
///
/// Weights are relative energies rounded to a fixed grid of `2^20` levels, which makes
/// the result a function of the spectrum shape that does not move with
/// last-bit rounding differences.
pub fn extract_support(spec: &WavenumberSpectrum, threshold_frac: f64) -> Result<SupportCircle> {
    if !(threshold_frac > 0.0 && threshold_frac <= 1.0) {
        return Err(Error::Domain(format!(
            "threshold fraction must lie in (0, 1], got {threshold_frac}"
        )));
    }
    let peak = spec.energy.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::Domain("spectrum has no positive peak".into()));
    }
    let (nr, nc) = spec.energy.shape();
    let level = (threshold_frac * WEIGHT_LEVELS).ceil() as u64;
    let mut count = 0usize;
    let mut wsum: u128 = 0;
    let mut su: i128 = 0;
    let mut sv: i128 = 0;
    let mut border = false;
    for u in 0..nr {
        for v in 0..nc {
            let q = (spec.energy[(u, v)] / peak * WEIGHT_LEVELS).round() as u64;
            if q >= level {
                count += 1;
                let (du, dv) = spec.bin_offset(u, v);
                wsum += q as u128;
                su += q as i128 * du as i128;
                sv += q as i128 * dv as i128;
                border |= u == 0 || v == 0 || u + 1 == nr || v + 1 == nc;
            }
        }
    }
    if border {
        return Err(Error::Aliasing(
            "spectrum support touches the border; array too small or source too close".into(),
        ));
    }
    let os = spec.oversample as f64;
    let w = wsum as f64;
    Ok(SupportCircle {
        center_bins: (su as f64 / w / os, sv as f64 / w / os),
        radius_bins: ((count - 1) as f64 / PI).sqrt() / os,
        threshold_used: threshold_frac,
        support_bins: count,
    })
}

/// Transform and support settings shared by calibration and estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavenumberOptions {
    pub oversample: usize,
    pub threshold_frac: f64,
}

impl Default for WavenumberOptions {
    fn default() -> Self {
        Self {
            oversample: 4,
            threshold_frac: 0.1,
        }
    }
}

/// Forward pipeline for a noiseless source at `p`.
pub fn forward_support(
    arr: &PlanarArray,
    f: f64,
    p: &PolarPoint,
    opts: &WavenumberOptions,
) -> Result<SupportCircle> {
    let snap = upa_snapshot(arr, source_position(p), f, 0.0)?;
    extract_support(&wavenumber_transform_padded(&snap, opts.oversample), opts.threshold_frac)
}

/// Calibrated monotone map between range and support radius.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusRangeTable {
    entries: Vec<(f64, f64)>,
    pub options: WavenumberOptions,
}

impl RadiusRangeTable {
    /// Ranges strictly increasing and radii strictly decreasing.
    pub fn new(entries: Vec<(f64, f64)>, options: WavenumberOptions) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::Calibration("table needs at least two entries".into()));
        }
        if entries.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Calibration("table ranges must be strictly increasing".into()));
        }
        if let Some(w) = entries.windows(2).find(|w| !(w[1].1 < w[0].1)) {
            return Err(Error::Calibration(format!(
                "radius not strictly decreasing between {} m ({} bins) and {} m ({} bins)",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
        Ok(Self { entries, options })
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    /// Range for a measured radius, linear in inverse range between entries.
    pub fn range_for_radius(&self, radius: f64) -> Result<f64> {
        let first = self.entries[0];
        let last = self.entries[self.entries.len() - 1];
        if radius > first.1 || radius < last.1 || !radius.is_finite() {
            return Err(Error::OutOfCalibration(format!(
                "radius {radius} bins outside calibrated [{}, {}]",
                last.1, first.1
            )));
        }
        for w in self.entries.windows(2) {
            let ((r0, q0), (r1, q1)) = (w[0], w[1]);
            if radius == q0 {
                return Ok(r0);
            }
            if radius <= q0 && radius >= q1 {
                let t = (q0 - radius) / (q0 - q1);
                return Ok(1.0 / (1.0 / r0 + t * (1.0 / r1 - 1.0 / r0)));
            }
        }
        Ok(last.0)
    }

    /// Spacing of the table cell containing `range_m`.
    pub fn local_spacing(&self, range_m: f64) -> Option<f64> {
        self.entries
            .windows(2)
            .find(|w| range_m >= w[0].0 && range_m <= w[1].0)
            .map(|w| w[1].0 - w[0].0)
    }
}

/// Runs the forward pipeline over `ranges` (≥ 8, strictly increasing) toward
/// `direction_rad` and returns the validated table.
pub fn calibrate_radius_range(
    arr: &PlanarArray,
    f: f64,
    direction_rad: f64,
    ranges: &[f64],
    opts: &WavenumberOptions,
) -> Result<RadiusRangeTable> {
    if ranges.len() < 8 {
        return Err(Error::Domain(format!(
            "calibration sweep needs at least 8 ranges, got {}",
            ranges.len()
        )));
    }
    if ranges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("calibration ranges must be strictly increasing".into()));
    }
    let entries = ranges
        .iter()
        .map(|&r| {
            let p = PolarPoint::new(r, direction_rad)?;
            forward_support(arr, f, &p, opts).map(|s| (r, s.radius_bins))
        })
        .collect::<Result<Vec<_>>>()?;
    RadiusRangeTable::new(entries, *opts)
}

/// Intermediate quantities of a position estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionDiagnostics {
    pub support: SupportCircle,
    /// Direction cosine along x.
    pub cos_x: f64,
    /// Direction cosine along z.
    pub cos_z: f64,
}

/// Position from a snapshot using the table's transform settings.
pub fn estimate_position(
    arr: &PlanarArray,
    f: f64,
    snapshot: &DMatrix<Complex64>,
    table: &RadiusRangeTable,
) -> Result<(PolarPoint, PositionDiagnostics)> {
    if snapshot.shape() != (arr.nx, arr.nz) {
        return Err(Error::Domain("snapshot shape does not match the array".into()));
    }
    let spec = wavenumber_transform_padded(snapshot, table.options.oversample);
    estimate_from_spectrum(arr, f, &spec, table)
}

/// Position from an energy spectrum, for example an average over snapshots.
pub fn estimate_from_spectrum(
    arr: &PlanarArray,
    f: f64,
    spec: &WavenumberSpectrum,
    table: &RadiusRangeTable,
) -> Result<(PolarPoint, PositionDiagnostics)> {
    if spec.oversample != table.options.oversample {
        return Err(Error::Domain("spectrum oversampling differs from the calibration".into()));
    }
    let support = extract_support(spec, table.options.threshold_frac)?;
    let lam = SPEED_OF_LIGHT / f;
    let cos_x = support.center_bins.0 / arr.nx as f64 * lam / arr.dx_m;
    let cos_z = support.center_bins.1 / arr.nz as f64 * lam / arr.dz_m;
    let range = table.range_for_radius(support.radius_bins)?;
    let angle = cos_x.clamp(-1.0, 1.0).acos();
    let point = PolarPoint::new(range, angle)?;
    Ok((
        point,
        PositionDiagnostics {
            support,
            cos_x,
            cos_z,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{near_field_steering, ArrayGeometry, CarrierGrid};

    const F: f64 = 300e9;

    fn upa() -> PlanarArray {
        let lam = SPEED_OF_LIGHT / F;
        PlanarArray::new(64, 64, 4.0 * lam, 4.0 * lam).unwrap()
    }

    #[test]
    fn broadside_snapshot_is_symmetric() {
        let arr = PlanarArray::new(16, 12, 1e-3, 1e-3).unwrap();
        let s = upa_snapshot(&arr, [0.0, 0.5, 0.0], F, 0.3).unwrap();
        for i in 0..16 {
            for k in 0..12 {
                assert!((s[(i, k)] - s[(15 - i, k)]).norm() < 1e-9);
                assert!((s[(i, k)] - s[(i, 11 - k)]).norm() < 1e-9);
            }
        }
        assert!(upa_snapshot(&arr, [0.1, 0.0, 0.2], F, 0.0).is_err());
    }

    #[test]
    fn global_phase_is_a_common_factor() {
        let arr = PlanarArray::new(8, 8, 1e-3, 1e-3).unwrap();
        let a = upa_snapshot(&arr, [0.1, 0.4, 0.05], F, 0.0).unwrap();
        let b = upa_snapshot(&arr, [0.1, 0.4, 0.05], F, 1.234).unwrap();
        let rot = Complex64::from_polar(1.0, 1.234);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x * rot - y).norm() < 1e-12);
        }
    }

    #[test]
    fn snapshot_row_matches_linear_array() {
        // The middle row of an odd-Nz array is a ULA along x through the origin.
        let arr = PlanarArray::new(16, 9, 0.5e-3, 0.5e-3).unwrap();
        let p = PolarPoint::new(0.3, 1.1).unwrap();
        let s = upa_snapshot(&arr, source_position(&p), F, 0.0).unwrap();
        let g = ArrayGeometry::new(16, 0.5e-3).unwrap();
        let a = near_field_steering(&g, &p, &CarrierGrid::narrowband(F).unwrap(), 0).unwrap();
        for i in 0..16 {
            assert!((s[(i, 4)] - a.values[i]).norm() < 1e-9);
        }
    }

    #[test]
    fn uniform_snapshot_concentrates_in_center() {
        let s = DMatrix::from_element(8, 10, Complex64::new(1.0, 0.0));
        let spec = wavenumber_transform(&s);
        assert!((spec.energy[(4, 5)] - 80.0).abs() < 1e-9);
        assert!((spec.total_energy() - 80.0).abs() < 1e-9);
    }

    #[test]
    fn bin_aligned_plane_wave_is_single_bin() {
        let (nx, nz) = (16, 8);
        let s = DMatrix::from_fn(nx, nz, |i, k| {
            Complex64::from_polar(1.0, 2.0 * PI * (3.0 * i as f64 / nx as f64 - 2.0 * k as f64 / nz as f64))
        });
        let spec = wavenumber_transform(&s);
        let (u, v) = (nx / 2 + 3, nz / 2 - 2);
        assert!((spec.energy[(u, v)] - 128.0).abs() < 1e-9);
        let sup = extract_support(&spec, 0.1).unwrap();
        assert_eq!(sup.radius_bins, 0.0);
        assert!((sup.center_bins.0 - 3.0).abs() < 1e-12 && (sup.center_bins.1 + 2.0).abs() < 1e-12);
    }

    #[test]
    fn padded_transform_preserves_energy() {
        let arr = PlanarArray::new(12, 10, 1e-3, 1e-3).unwrap();
        let s = upa_snapshot(&arr, [0.05, 0.2, -0.03], F, 0.0).unwrap();
        for os in [1, 2, 3] {
            let spec = wavenumber_transform_padded(&s, os);
            assert!((spec.total_energy() - 120.0).abs() < 1e-9 * 120.0);
        }
    }

    #[test]
    fn support_scale_invariant() {
        let arr = upa();
        let s = upa_snapshot(&arr, source_position(&PolarPoint::new(8.0, PI / 2.0).unwrap()), F, 0.0).unwrap();
        let spec = wavenumber_transform_padded(&s, 2);
        let mut scaled = spec.clone();
        scaled.energy *= 8.0;
        assert_eq!(extract_support(&spec, 0.1).unwrap(), extract_support(&scaled, 0.1).unwrap());
    }

    #[test]
    fn radius_decreases_with_range() {
        let arr = upa();
        let opts = WavenumberOptions::default();
        let near = forward_support(&arr, F, &PolarPoint::new(5.0, PI / 2.0).unwrap(), &opts).unwrap();
        let far = forward_support(&arr, F, &PolarPoint::new(20.0, PI / 2.0).unwrap(), &opts).unwrap();
        assert!(near.radius_bins > far.radius_bins);
    }

    #[test]
    fn close_source_aliases() {
        let arr = upa();
        let r = forward_support(&arr, F, &PolarPoint::new(0.3, PI / 2.0).unwrap(), &WavenumberOptions::default());
        assert!(matches!(r, Err(Error::Aliasing(_))));
    }

    #[test]
    fn table_validation_and_lookup() {
        let opts = WavenumberOptions::default();
        assert!(matches!(
            RadiusRangeTable::new(vec![(1.0, 3.0), (2.0, 3.0)], opts),
            Err(Error::Calibration(_))
        ));
        let t = RadiusRangeTable::new(vec![(2.0, 4.0), (4.0, 2.0), (8.0, 1.0)], opts).unwrap();
        assert_eq!(t.range_for_radius(2.0).unwrap(), 4.0);
        assert!((t.range_for_radius(3.0).unwrap() - 1.0 / (0.5 + 0.5 * (0.25 - 0.5))).abs() < 1e-12);
        assert!(matches!(t.range_for_radius(5.0), Err(Error::OutOfCalibration(_))));
        assert_eq!(t.local_spacing(5.0), Some(4.0));
    }

    #[test]
    fn calibration_rejects_short_sweep() {
        let arr = upa();
        let r = calibrate_radius_range(&arr, F, PI / 2.0, &[2.0, 4.0, 8.0], &WavenumberOptions::default());
        assert!(r.is_err());
    }
}
