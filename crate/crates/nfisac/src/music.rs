//! Two-dimensional (angle, range) MUSIC over a polar grid for a uniform linear
//! array with single-frequency snapshots.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::array::{phasor_from_cycles, ArrayGeometry, CarrierGrid, PolarPoint};
use crate::codebook::PolarGrid;
use crate::error::{Error, Result};

/// Circularly symmetric complex Gaussian sample with variance `power`.
pub fn complex_normal<R: rand::Rng + ?Sized>(rng: &mut R, power: f64) -> Complex64 {
    let s = (power / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// Snapshot matrix, `N` antennas by `snapshot_count` columns, from sources
/// with unit-power complex Gaussian symbols plus white noise.
pub fn collect_snapshots(
    geom: &ArrayGeometry,
    grid: &CarrierGrid,
    sources: &[PolarPoint],
    snapshot_count: usize,
    noise_power: f64,
    seed: u64,
) -> Result<DMatrix<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    collect_snapshots_with(geom, grid, sources, snapshot_count, noise_power, &mut rng)
}

/// As [`collect_snapshots`], drawing from a caller-owned generator.
pub fn collect_snapshots_with<R: rand::Rng + ?Sized>(
    geom: &ArrayGeometry,
    grid: &CarrierGrid,
    sources: &[PolarPoint],
    snapshot_count: usize,
    noise_power: f64,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    if snapshot_count <= sources.len() {
        return Err(Error::Domain(format!(
            "need more snapshots ({snapshot_count}) than sources ({})",
            sources.len()
        )));
    }
    if !(noise_power >= 0.0 && noise_power.is_finite()) {
        return Err(Error::Domain("noise power must be nonnegative".into()));
    }
    let m = grid.center_index();
    let steering = sources
        .iter()
        .map(|p| crate::array::near_field_steering(geom, p, grid, m).map(|a| a.values))
        .collect::<Result<Vec<_>>>()?;
    let n = geom.num_elements();
    let mut x = DMatrix::zeros(n, snapshot_count);
    for t in 0..snapshot_count {
        for a in &steering {
            let s = complex_normal(rng, 1.0);
            for i in 0..n {
                x[(i, t)] += a[i] * s;
            }
        }
        if noise_power > 0.0 {
            for i in 0..n {
                x[(i, t)] += complex_normal(rng, noise_power);
            }
        }
    }
    Ok(x)
}

/// Hermitian positive semidefinite sample covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCovariance {
    pub matrix: DMatrix<Complex64>,
    pub snapshot_count: usize,
}

impl SampleCovariance {
    /// `X Xᴴ / T`, symmetrized.
    pub fn from_snapshots(x: &DMatrix<Complex64>) -> Result<Self> {
        let t = x.ncols();
        if t == 0 {
            return Err(Error::Domain("no snapshots".into()));
        }
        let r = x * x.adjoint() / Complex64::new(t as f64, 0.0);
        let matrix = (&r + r.adjoint()) * Complex64::new(0.5, 0.0);
        Ok(Self {
            matrix,
            snapshot_count: t,
        })
    }

    /// Validates Hermitian symmetry and positive semidefiniteness.
    pub fn new(matrix: DMatrix<Complex64>, snapshot_count: usize) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Domain("covariance must be square".into()));
        }
        let scale = matrix.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
        let asym = (&matrix - matrix.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        if asym > 1e-10 * scale {
            return Err(Error::Domain(format!("covariance not Hermitian (asymmetry {asym})")));
        }
        let eig = SymmetricEigen::new(matrix.clone());
        let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-9 * max.max(f64::MIN_POSITIVE) {
            return Err(Error::Domain(format!("covariance not PSD (min eigenvalue {min})")));
        }
        Ok(Self {
            matrix,
            snapshot_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// MUSIC pseudo-spectrum over a polar grid, angle-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MusicSpectrum {
    pub grid: PolarGrid,
    pub values: Vec<f64>,
}

impl MusicSpectrum {
    pub fn get(&self, angle_index: usize, range_index: usize) -> f64 {
        self.values[angle_index * self.grid.ranges_m.len() + range_index]
    }
}

/// Localization output.
#[derive(Debug, Clone, PartialEq)]
pub struct MusicEstimate {
    /// Source estimates, strongest peak first.
    pub points: Vec<PolarPoint>,
    /// Grid indices `(angle, range)` of the returned peaks.
    pub cells: Vec<(usize, usize)>,
    /// Set when a returned peak sits on the grid edge.
    pub boundary_warning: bool,
}

/// Signal subspace: eigenvectors of the `num_sources` largest eigenvalues.
fn signal_subspace(cov: &SampleCovariance, num_sources: usize) -> Vec<Vec<Complex64>> {
    let eig = SymmetricEigen::new(cov.matrix.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order
        .iter()
        .take(num_sources)
        .map(|&i| eig.eigenvectors.column(i).iter().cloned().collect())
        .collect()
}

/// `1 / ‖E_nᴴ a‖²` on every grid cell, with `‖E_nᴴ a‖² = ‖a‖² − ‖E_sᴴ a‖²`.
pub fn music_spectrum(
    cov: &SampleCovariance,
    geom: &ArrayGeometry,
    grid: &CarrierGrid,
    pg: &PolarGrid,
    num_sources: usize,
) -> Result<MusicSpectrum> {
    let n = geom.num_elements();
    if cov.dim() != n {
        return Err(Error::Domain("covariance size differs from the element count".into()));
    }
    if num_sources >= n || num_sources == 0 {
        return Err(Error::Domain(format!(
            "source count must lie in 1..{n}, got {num_sources}"
        )));
    }
    if pg.is_empty() {
        return Err(Error::Domain("empty evaluation grid".into()));
    }
    let es = signal_subspace(cov, num_sources);
    let f = grid.freq(grid.center_index());
    let offsets = geom.element_offsets_s();
    let rows: Vec<Vec<f64>> = pg
        .angles_rad
        .par_iter()
        .map(|&theta| {
            let cos = theta.cos();
            let mut a = vec![Complex64::new(0.0, 0.0); n];
            pg.ranges_m
                .iter()
                .map(|&r| {
                    let tau = r / crate::array::SPEED_OF_LIGHT;
                    for (v, &t) in a.iter_mut().zip(offsets) {
                        *v = phasor_from_cycles(f * (tau * tau + t * t - 2.0 * tau * t * cos).sqrt());
                    }
                    let proj: f64 = es
                        .iter()
                        .map(|e| {
                            e.iter()
                                .zip(&a)
                                .map(|(x, y)| x.conj() * y)
                                .sum::<Complex64>()
                                .norm_sqr()
                        })
                        .sum();
                    let d = (n as f64 - proj).max(0.0);
                    1.0 / d.max(1e-300)
                })
                .collect()
        })
        .collect();
    Ok(MusicSpectrum {
        grid: pg.clone(),
        values: rows.concat(),
    })
}

/// Local maxima of the spectrum (8-neighbourhood, plateaus resolved toward the
/// smaller range then smaller angle), sorted by height.
pub fn spectrum_peaks(spec: &MusicSpectrum) -> Vec<(usize, usize, f64)> {
    let (na, nr) = (spec.grid.angles_rad.len(), spec.grid.ranges_m.len());
    let mut peaks = Vec::new();
    for ia in 0..na {
        for ir in 0..nr {
            let v = spec.get(ia, ir);
            let mut is_peak = true;
            'nb: for da in -1i64..=1 {
                for dr in -1i64..=1 {
                    if da == 0 && dr == 0 {
                        continue;
                    }
                    let (ja, jr) = (ia as i64 + da, ir as i64 + dr);
                    if ja < 0 || jr < 0 || ja >= na as i64 || jr >= nr as i64 {
                        continue;
                    }
                    let u = spec.get(ja as usize, jr as usize);
                    // Earlier cells in (range, angle) order win ties.
                    let earlier = (jr, ja) < (ir as i64, ia as i64);
                    if u > v || (u == v && earlier) {
                        is_peak = false;
                        break 'nb;
                    }
                }
            }
            if is_peak {
                peaks.push((ia, ir, v));
            }
        }
    }
    peaks.sort_by(|a, b| {
        b.2.total_cmp(&a.2)
            .then(a.1.cmp(&b.1))
            .then(a.0.cmp(&b.0))
    });
    peaks
}

/// MUSIC localization of `num_sources` sources on `pg`.
pub fn music_localize(
    cov: &SampleCovariance,
    geom: &ArrayGeometry,
    grid: &CarrierGrid,
    pg: &PolarGrid,
    num_sources: usize,
) -> Result<MusicEstimate> {
    let spec = music_spectrum(cov, geom, grid, pg, num_sources)?;
    let (na, nr) = (pg.angles_rad.len(), pg.ranges_m.len());
    let peaks = spectrum_peaks(&spec);
    let chosen: Vec<_> = peaks.into_iter().take(num_sources).collect();
    let edge = |i: usize, len: usize| len > 1 && (i == 0 || i + 1 == len);
    Ok(MusicEstimate {
        points: chosen.iter().map(|&(ia, ir, _)| pg.point(ia, ir)).collect(),
        cells: chosen.iter().map(|&(ia, ir, _)| (ia, ir)).collect(),
        boundary_warning: chosen.iter().any(|&(ia, ir, _)| edge(ia, na) || edge(ir, nr)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::near_field_steering;

    fn setup() -> (ArrayGeometry, CarrierGrid) {
        (
            ArrayGeometry::half_wavelength(32, 300e9).unwrap(),
            CarrierGrid::narrowband(300e9).unwrap(),
        )
    }

    #[test]
    fn noiseless_snapshots_are_proportional_to_steering() {
        let (g, grid) = setup();
        let p = PolarPoint::new(0.1, 1.0).unwrap();
        let x = collect_snapshots(&g, &grid, &[p], 5, 0.0, 1).unwrap();
        let a = near_field_steering(&g, &p, &grid, 0).unwrap();
        for t in 0..5 {
            let s = x[(0, t)] / a.values[0];
            for i in 0..32 {
                assert!((x[(i, t)] - s * a.values[i]).norm() < 1e-12);
            }
        }
        assert!(collect_snapshots(&g, &grid, &[p], 1, 0.0, 1).is_err());
    }

    #[test]
    fn sample_covariance_converges() {
        let (g, grid) = setup();
        let p = PolarPoint::new(0.1, 1.0).unwrap();
        let x = collect_snapshots(&g, &grid, &[p], 10_000, 0.5, 9).unwrap();
        let cov = SampleCovariance::from_snapshots(&x).unwrap();
        let a = DMatrix::from_column_slice(32, 1, &near_field_steering(&g, &p, &grid, 0).unwrap().values);
        let expected = &a * a.adjoint() + DMatrix::identity(32, 32) * Complex64::new(0.5, 0.0);
        let err = (&cov.matrix - &expected).norm() / expected.norm();
        assert!(err < 0.05, "{err}");
    }

    #[test]
    fn orthogonal_sources_give_rank_two() {
        let n = 16;
        let g = ArrayGeometry::half_wavelength(n, 300e9).unwrap();
        let grid = CarrierGrid::narrowband(300e9).unwrap();
        // Far-field directions one DFT bin apart are orthogonal.
        let lam = grid.wavelength_m();
        let c1 = 2.0 * lam / (n as f64 * g.spacing_m());
        let c2 = 3.0 * lam / (n as f64 * g.spacing_m());
        let ps = [PolarPoint::new(1e7, c1.acos()).unwrap(), PolarPoint::new(1e7, c2.acos()).unwrap()];
        let x = collect_snapshots(&g, &grid, &ps, 64, 0.0, 3).unwrap();
        let cov = SampleCovariance::from_snapshots(&x).unwrap();
        let eig = SymmetricEigen::new(cov.matrix.clone());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        assert!(ev[1] > 1e-3 * ev[0]);
        assert!(ev[2] < 1e-9 * ev[0]);
    }

    #[test]
    fn noiseless_single_source_on_node_is_exact() {
        let (g, grid) = setup();
        let pg = PolarGrid::new(PolarGrid::linspace(0.8, 1.2, 21), PolarGrid::linspace(0.05, 0.15, 21)).unwrap();
        let p = pg.point(7, 12);
        let x = collect_snapshots(&g, &grid, &[p], 16, 0.0, 5).unwrap();
        let cov = SampleCovariance::from_snapshots(&x).unwrap();
        let est = music_localize(&cov, &g, &grid, &pg, 1).unwrap();
        assert_eq!(est.cells, vec![(7, 12)]);
        assert!(!est.boundary_warning);
    }

    #[test]
    fn scaling_covariance_keeps_argmax() {
        let (g, grid) = setup();
        let pg = PolarGrid::new(PolarGrid::linspace(0.8, 1.2, 11), PolarGrid::linspace(0.05, 0.15, 11)).unwrap();
        let x = collect_snapshots(&g, &grid, &[pg.point(4, 6)], 64, 0.1, 8).unwrap();
        let cov = SampleCovariance::from_snapshots(&x).unwrap();
        let scaled = SampleCovariance {
            matrix: &cov.matrix * Complex64::new(7.5, 0.0),
            snapshot_count: 64,
        };
        let a = music_localize(&cov, &g, &grid, &pg, 1).unwrap();
        let b = music_localize(&scaled, &g, &grid, &pg, 1).unwrap();
        assert_eq!(a.cells, b.cells);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (g, grid) = setup();
        let pg = PolarGrid::new(vec![1.0], vec![0.1]).unwrap();
        let cov = SampleCovariance {
            matrix: DMatrix::identity(32, 32),
            snapshot_count: 1,
        };
        assert!(music_localize(&cov, &g, &grid, &pg, 32).is_err());
        let mut bad = DMatrix::<Complex64>::identity(3, 3);
        bad[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(SampleCovariance::new(bad, 1).is_err());
        let neg = DMatrix::<Complex64>::identity(3, 3) * Complex64::new(-1.0, 0.0);
        assert!(SampleCovariance::new(neg, 1).is_err());
    }
}
