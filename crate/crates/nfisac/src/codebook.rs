//! DFT (far-field) and polar-domain (near-field) codebooks, beam-gain maps over
//! a polar grid and the angular-domain spread metric.
//!
//! Gains follow `|wᴴ a|²` with unit-norm `w` and unit-modulus `a`, so every
//! gain is at most `N` and a codeword is matched when `w ∝ a`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::array::{near_field_steering, phasor_from_cycles, ArrayGeometry, CarrierGrid, PolarPoint};
use crate::error::{Error, Result};

/// How a beamformer was designed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignModel {
    DftAngle,
    PolarPoint,
    DelayPhase,
}

/// Unit-norm antenna weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    pub weights: Vec<Complex64>,
    pub design_point: Option<PolarPoint>,
    pub design_model: DesignModel,
}

impl Beamformer {
    /// Normalizes `weights` to unit power.
    pub fn normalized(
        weights: Vec<Complex64>,
        design_point: Option<PolarPoint>,
        design_model: DesignModel,
    ) -> Result<Self> {
        let norm = weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Domain("beamformer weights have zero norm".into()));
        }
        Ok(Self {
            weights: weights.into_iter().map(|w| w / norm).collect(),
            design_point,
            design_model,
        })
    }

    /// `|wᴴ a|²`.
    pub fn gain(&self, a: &[Complex64]) -> f64 {
        self.weights
            .iter()
            .zip(a)
            .map(|(w, x)| w.conj() * x)
            .sum::<Complex64>()
            .norm_sqr()
    }
}

/// Matched filter to the far-field response at `f_c` toward `theta`.
pub fn dft_codeword(geom: &ArrayGeometry, grid: &CarrierGrid, theta: f64) -> Result<Beamformer> {
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::Domain(format!("angle must lie in (0, pi), got {theta} rad")));
    }
    let scale = 1.0 / (geom.num_elements() as f64).sqrt();
    let cos = theta.cos();
    let fc = grid.center_hz();
    let weights = geom
        .element_offsets_s()
        .iter()
        .map(|&t| phasor_from_cycles(-fc * t * cos) * scale)
        .collect();
    Ok(Beamformer {
        weights,
        design_point: None,
        design_model: DesignModel::DftAngle,
    })
}

/// Beam focused on `p`: the normalized center-subcarrier near-field response.
pub fn polar_codeword(geom: &ArrayGeometry, grid: &CarrierGrid, p: &PolarPoint) -> Result<Beamformer> {
    let a = near_field_steering(geom, p, grid, grid.center_index())?;
    let scale = 1.0 / (geom.num_elements() as f64).sqrt();
    Ok(Beamformer {
        weights: a.values.iter().map(|v| v * scale).collect(),
        design_point: Some(*p),
        design_model: DesignModel::PolarPoint,
    })
}

/// Evaluation grid: angle and range axes, both strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid {
    pub angles_rad: Vec<f64>,
    pub ranges_m: Vec<f64>,
}

impl PolarGrid {
    pub fn new(angles_rad: Vec<f64>, ranges_m: Vec<f64>) -> Result<Self> {
        if angles_rad.is_empty() || ranges_m.is_empty() {
            return Err(Error::Domain("polar grid axes must be nonempty".into()));
        }
        if angles_rad.windows(2).any(|w| !(w[1] > w[0])) || ranges_m.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("polar grid axes must be strictly increasing".into()));
        }
        if angles_rad.iter().any(|&a| !(a > 0.0 && a < PI)) {
            return Err(Error::Domain("grid angles must lie in (0, pi)".into()));
        }
        if ranges_m.iter().any(|&r| !(r.is_finite() && r > 0.0)) {
            return Err(Error::Domain("grid ranges must be positive".into()));
        }
        Ok(Self { angles_rad, ranges_m })
    }

    /// `count` angles `π (k + 1) / (count + 1)` filling the open interval `(0, π)`.
    pub fn open_angles(count: usize) -> Vec<f64> {
        (0..count)
            .map(|k| PI * (k as f64 + 1.0) / (count as f64 + 1.0))
            .collect()
    }

    /// `count` evenly spaced values from `start` to `end` inclusive.
    pub fn linspace(start: f64, end: f64, count: usize) -> Vec<f64> {
        if count == 1 {
            return vec![start];
        }
        let step = (end - start) / (count as f64 - 1.0);
        (0..count).map(|k| start + step * k as f64).collect()
    }

    /// `count` log-spaced values from `start` with `per_decade` points per decade.
    pub fn log_ranges(start: f64, per_decade: usize, count: usize) -> Vec<f64> {
        (0..count)
            .map(|k| start * 10f64.powf(k as f64 / per_decade as f64))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.angles_rad.len() * self.ranges_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, angle_index: usize, range_index: usize) -> PolarPoint {
        PolarPoint {
            range_m: self.ranges_m[range_index],
            angle_rad: self.angles_rad[angle_index],
        }
    }
}

/// Beam gain over a [`PolarGrid`], stored angle-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMap {
    pub grid: PolarGrid,
    pub gains: Vec<f64>,
    pub subcarrier_index: usize,
}

impl GainMap {
    pub fn get(&self, angle_index: usize, range_index: usize) -> f64 {
        self.gains[angle_index * self.grid.ranges_m.len() + range_index]
    }

    /// `(angle_index, range_index, gain)` of the largest entry, ties to the
    /// smallest range and then the smallest angle.
    pub fn argmax(&self) -> (usize, usize, f64) {
        argmax_cells(&self.gains, self.grid.angles_rad.len(), self.grid.ranges_m.len())
    }

    /// Rows `(angle_rad, range_m, gain)` in storage order.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let nr = self.grid.ranges_m.len();
        self.gains.iter().enumerate().map(move |(i, &g)| {
            (self.grid.angles_rad[i / nr], self.grid.ranges_m[i % nr], g)
        })
    }
}

pub(crate) fn argmax_cells(gains: &[f64], n_angles: usize, n_ranges: usize) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::NEG_INFINITY);
    for ir in 0..n_ranges {
        for ia in 0..n_angles {
            let g = gains[ia * n_ranges + ir];
            if g > best.2 {
                best = (ia, ir, g);
            }
        }
    }
    best
}

/// Gain maps for several subcarriers at once, each with its own beam.
///
/// `subcarriers` must be strictly increasing. Returns one angle-major gain
/// vector per subcarrier. The per-antenna phase is advanced across subcarriers
/// by a phasor recurrence, so each cell costs one square root and two phasors
/// per antenna regardless of the number of subcarriers.
pub fn evaluate_gains(
    geom: &ArrayGeometry,
    grid: &CarrierGrid,
    beams: &[&[Complex64]],
    subcarriers: &[usize],
    pg: &PolarGrid,
) -> Result<Vec<Vec<f64>>> {
    if pg.is_empty() {
        return Err(Error::Domain("empty evaluation grid".into()));
    }
    if beams.len() != subcarriers.len() || subcarriers.is_empty() {
        return Err(Error::Domain("one beam per requested subcarrier is required".into()));
    }
    if subcarriers.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("subcarriers must be strictly increasing".into()));
    }
    for &m in subcarriers {
        grid.check_index(m)?;
    }
    let n_ant = geom.num_elements();
    if beams.iter().any(|b| b.len() != n_ant) {
        return Err(Error::Domain("beam length must equal the element count".into()));
    }
    let k = subcarriers.len();
    let mut wt = vec![Complex64::new(0.0, 0.0); n_ant * k];
    for (j, b) in beams.iter().enumerate() {
        for n in 0..n_ant {
            wt[n * k + j] = b[n].conj();
        }
    }
    let f0 = grid.freq(subcarriers[0]);
    let df = grid.spacing_hz();
    let offsets = geom.element_offsets_s();
    let nr = pg.ranges_m.len();
    let rows: Vec<Vec<f64>> = pg
        .angles_rad
        .par_iter()
        .map(|&theta| {
            let cos = theta.cos();
            let mut out = vec![0.0; nr * k];
            let mut acc = vec![Complex64::new(0.0, 0.0); k];
            for (ir, &r) in pg.ranges_m.iter().enumerate() {
                let tau = r / crate::array::SPEED_OF_LIGHT;
                acc.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
                for (n, &t) in offsets.iter().enumerate() {
                    let dist = (tau * tau + t * t - 2.0 * tau * t * cos).sqrt();
                    let mut cur = phasor_from_cycles(f0 * dist);
                    let step = phasor_from_cycles(df * dist);
                    let w = &wt[n * k..(n + 1) * k];
                    let mut idx = subcarriers[0];
                    for (j, &m) in subcarriers.iter().enumerate() {
                        while idx < m {
                            cur *= step;
                            idx += 1;
                        }
                        acc[j] += w[j] * cur;
                    }
                }
                for j in 0..k {
                    out[j * nr + ir] = acc[j].norm_sqr();
                }
            }
            out
        })
        .collect();
    let mut maps = vec![vec![0.0; pg.len()]; k];
    for (ia, row) in rows.iter().enumerate() {
        for j in 0..k {
            maps[j][ia * nr..(ia + 1) * nr].copy_from_slice(&row[j * nr..(j + 1) * nr]);
        }
    }
    Ok(maps)
}

/// `|wᴴ a_m(r, θ)|²` over every grid cell.
pub fn gain_map(
    geom: &ArrayGeometry,
    grid: &CarrierGrid,
    w: &Beamformer,
    m: usize,
    pg: &PolarGrid,
) -> Result<GainMap> {
    let gains = evaluate_gains(geom, grid, &[&w.weights], &[m], pg)?.remove(0);
    Ok(GainMap {
        grid: pg.clone(),
        gains,
        subcarrier_index: m,
    })
}

/// Unitary DFT across antennas of the center-subcarrier response at `p`.
pub fn angular_spectrum(geom: &ArrayGeometry, grid: &CarrierGrid, p: &PolarPoint) -> Result<Vec<f64>> {
    let a = near_field_steering(geom, p, grid, grid.center_index())?;
    Ok(unitary_energy_spectrum(a.values))
}

pub(crate) fn unitary_energy_spectrum(mut values: Vec<Complex64>) -> Vec<f64> {
    let n = values.len();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    fft.process(&mut values);
    let scale = 1.0 / n as f64;
    values.iter().map(|v| v.norm_sqr() * scale).collect()
}

/// Fraction of angular-domain energy in the strongest DFT bin.
pub fn angular_spread(geom: &ArrayGeometry, grid: &CarrierGrid, p: &PolarPoint) -> Result<f64> {
    let spec = angular_spectrum(geom, grid, p)?;
    let total: f64 = spec.iter().sum();
    let peak = spec.iter().cloned().fold(0.0, f64::max);
    Ok(peak / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{far_field_steering, rayleigh_distance};

    fn setup(n: usize) -> (ArrayGeometry, CarrierGrid) {
        (
            ArrayGeometry::half_wavelength(n, 300e9).unwrap(),
            CarrierGrid::new(300e9, 5, 1e9).unwrap(),
        )
    }

    fn direct_gain(w: &Beamformer, a: &[Complex64]) -> f64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (x, y) in w.weights.iter().zip(a) {
            // conj(x) * y written out
            re += x.re * y.re + x.im * y.im;
            im += x.re * y.im - x.im * y.re;
        }
        re * re + im * im
    }

    #[test]
    fn dft_broadside_is_uniform() {
        let (g, grid) = setup(16);
        let w = dft_codeword(&g, &grid, PI / 2.0).unwrap();
        for v in &w.weights {
            assert!((v - Complex64::new(0.25, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn dft_matches_far_field() {
        let (g, grid) = setup(64);
        let theta = 1.1;
        let w = dft_codeword(&g, &grid, theta).unwrap();
        let a = far_field_steering(&g, &PolarPoint::new(5.0, theta).unwrap(), &grid, 2).unwrap();
        assert!((w.gain(&a.values) - 64.0).abs() < 1e-9);
        let p = PolarPoint::new(100.0 * rayleigh_distance(&g, &grid), theta).unwrap();
        let b = near_field_steering(&g, &p, &grid, 2).unwrap();
        assert!(w.gain(&b.values) >= 0.95 * 64.0);
    }

    #[test]
    fn polar_codeword_matched_and_far_limit() {
        let (g, grid) = setup(64);
        let p = PolarPoint::new(0.3, 1.0).unwrap();
        let w = polar_codeword(&g, &grid, &p).unwrap();
        let a = near_field_steering(&g, &p, &grid, 2).unwrap();
        assert!((w.gain(&a.values) - 64.0).abs() < 1e-9);
        let norm: f64 = w.weights.iter().map(|v| v.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);

        let far = PolarPoint::new(1e6 * g.aperture_m(), 1.0).unwrap();
        let wp = polar_codeword(&g, &grid, &far).unwrap();
        let wd = dft_codeword(&g, &grid, 1.0).unwrap();
        let common = wp.weights[0] / wd.weights[0];
        let common = common / common.norm();
        for (x, y) in wp.weights.iter().zip(&wd.weights) {
            let gap = (x / (y * common)).arg().abs();
            assert!(gap < 1e-3);
        }
    }

    #[test]
    fn polar_codeword_range_selective() {
        let (g, _) = setup(512);
        let grid = CarrierGrid::narrowband(300e9).unwrap();
        let p = PolarPoint::new(10.0, PI / 3.0).unwrap();
        let w = polar_codeword(&g, &grid, &p).unwrap();
        let off = near_field_steering(&g, &PolarPoint::new(12.0, PI / 3.0).unwrap(), &grid, 0).unwrap();
        assert!(w.gain(&off.values) < 512.0 - 1.0);
    }

    #[test]
    fn gain_map_matches_direct_recomputation() {
        let (g, grid) = setup(32);
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let w = Beamformer::normalized(
            (0..32).map(|_| Complex64::new(next(), next())).collect(),
            None,
            DesignModel::DftAngle,
        )
        .unwrap();
        let pg = PolarGrid::new(PolarGrid::linspace(0.5, 2.5, 7), PolarGrid::linspace(0.2, 3.0, 5)).unwrap();
        for m in [0, 3, 4] {
            let map = gain_map(&g, &grid, &w, m, &pg).unwrap();
            for ia in 0..7 {
                for ir in 0..5 {
                    let a = near_field_steering(&g, &pg.point(ia, ir), &grid, m).unwrap();
                    assert!((map.get(ia, ir) - direct_gain(&w, &a.values)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn multi_subcarrier_evaluation_matches_single() {
        let (g, grid) = setup(24);
        let p = PolarPoint::new(0.4, 1.2).unwrap();
        let w = polar_codeword(&g, &grid, &p).unwrap();
        let pg = PolarGrid::new(PolarGrid::linspace(1.0, 1.4, 5), PolarGrid::linspace(0.3, 0.5, 4)).unwrap();
        let beams: Vec<&[Complex64]> = vec![&w.weights; 3];
        let maps = evaluate_gains(&g, &grid, &beams, &[0, 2, 4], &pg).unwrap();
        for (j, m) in [0, 2, 4].into_iter().enumerate() {
            let single = gain_map(&g, &grid, &w, m, &pg).unwrap();
            for (x, y) in maps[j].iter().zip(&single.gains) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn matched_codeword_peaks_at_design_point() {
        let (g, grid) = setup(128);
        let p = PolarPoint::new(0.8, 1.0).unwrap();
        let w = polar_codeword(&g, &grid, &p).unwrap();
        let pg = PolarGrid::new(PolarGrid::linspace(0.9, 1.1, 21), PolarGrid::linspace(0.6, 1.0, 21)).unwrap();
        let (ia, ir, gmax) = gain_map(&g, &grid, &w, 2, &pg).unwrap().argmax();
        assert_eq!((ia, ir), (10, 10));
        assert!((gmax - 128.0).abs() < 1e-8);
    }

    #[test]
    fn gain_map_errors_on_empty_grid() {
        let (g, grid) = setup(8);
        let w = dft_codeword(&g, &grid, 1.0).unwrap();
        let pg = PolarGrid { angles_rad: vec![], ranges_m: vec![1.0] };
        assert!(gain_map(&g, &grid, &w, 0, &pg).is_err());
    }

    #[test]
    fn spread_bin_aligned_far_field_is_one() {
        let n = 64;
        let (g, grid) = setup(n);
        let lam = grid.wavelength_m();
        let cos = 5.0 * lam / (n as f64 * g.spacing_m());
        let p = PolarPoint::new(1e9, cos.acos()).unwrap();
        assert!((angular_spread(&g, &grid, &p).unwrap() - 1.0).abs() < 1e-6);
        let spec = angular_spectrum(&g, &grid, &PolarPoint::new(0.2, 0.7).unwrap()).unwrap();
        assert!((spec.iter().sum::<f64>() - n as f64).abs() < 1e-9);
    }

    #[test]
    fn spread_grows_as_range_shrinks() {
        let (g, grid) = setup(256);
        let r = rayleigh_distance(&g, &grid);
        let near = angular_spread(&g, &grid, &PolarPoint::new(0.05 * r, 1.2).unwrap()).unwrap();
        let far = angular_spread(&g, &grid, &PolarPoint::new(10.0 * r, 1.2).unwrap()).unwrap();
        assert!(near < far);
    }
}
