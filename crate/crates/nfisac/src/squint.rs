//! Per-subcarrier focal points of wideband beams (the near-field beam squint
//! trajectory) and deviation metrics relative to a design point.

use num_complex::Complex64;

use crate::array::{ArrayGeometry, CarrierGrid, PolarPoint};
use crate::codebook::{argmax_cells, evaluate_gains, Beamformer, PolarGrid};
use crate::error::{Error, Result};

/// Grid argmax of one subcarrier's beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalPoint {
    pub m: usize,
    pub freq_hz: f64,
    pub point: PolarPoint,
    pub gain: f64,
    pub angle_index: usize,
    pub range_index: usize,
}

/// Focal points of every subcarrier, in subcarrier order.
#[derive(Debug, Clone, PartialEq)]
pub struct SquintTrajectory {
    pub points: Vec<FocalPoint>,
    /// Set when any focal point sits on an edge of the evaluation grid.
    pub boundary_warning: bool,
}

impl SquintTrajectory {
    /// Largest jump between consecutive focal points, in grid cells
    /// (Chebyshev distance over angle and range indices).
    pub fn max_step_cells(&self) -> usize {
        self.points
            .windows(2)
            .map(|w| {
                let da = w[0].angle_index.abs_diff(w[1].angle_index);
                let dr = w[0].range_index.abs_diff(w[1].range_index);
                da.max(dr)
            })
            .max()
            .unwrap_or(0)
    }

    pub fn for_subcarrier(&self, m: usize) -> Option<&FocalPoint> {
        self.points.iter().find(|p| p.m == m)
    }
}

fn on_edge(index: usize, len: usize) -> bool {
    len > 1 && (index == 0 || index + 1 == len)
}

/// Focal points of a single frequency-flat beamformer on every subcarrier.
pub fn focal_points(
    geom: &ArrayGeometry,
    grid: &CarrierGrid,
    w: &Beamformer,
    pg: &PolarGrid,
) -> Result<SquintTrajectory> {
    let beams = vec![w.weights.as_slice(); grid.num_subcarriers()];
    let subcarriers: Vec<usize> = (0..grid.num_subcarriers()).collect();
    focal_points_for(geom, grid, &beams, &subcarriers, pg)
}

/// Focal points for a different beam on each listed subcarrier.
pub fn focal_points_for(
    geom: &ArrayGeometry,
    grid: &CarrierGrid,
    beams: &[&[Complex64]],
    subcarriers: &[usize],
    pg: &PolarGrid,
) -> Result<SquintTrajectory> {
    let maps = evaluate_gains(geom, grid, beams, subcarriers, pg)?;
    let (na, nr) = (pg.angles_rad.len(), pg.ranges_m.len());
    let mut boundary_warning = false;
    let points = subcarriers
        .iter()
        .zip(&maps)
        .map(|(&m, gains)| {
            let (ia, ir, gain) = argmax_cells(gains, na, nr);
            boundary_warning |= on_edge(ia, na) || on_edge(ir, nr);
            FocalPoint {
                m,
                freq_hz: grid.freq(m),
                point: pg.point(ia, ir),
                gain,
                angle_index: ia,
                range_index: ir,
            }
        })
        .collect();
    Ok(SquintTrajectory {
        points,
        boundary_warning,
    })
}

/// Maximum absolute angle (rad) and range (m) deviation from `design`.
pub fn squint_deviation(traj: &SquintTrajectory, design: &PolarPoint) -> Result<(f64, f64)> {
    if traj.points.is_empty() {
        return Err(Error::Domain("empty trajectory".into()));
    }
    Ok(traj.points.iter().fold((0.0f64, 0.0f64), |(da, dr), p| {
        (
            da.max((p.point.angle_rad - design.angle_rad).abs()),
            dr.max((p.point.range_m - design.range_m).abs()),
        )
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{dft_codeword, polar_codeword};
    use std::f64::consts::PI;

    #[test]
    fn single_subcarrier_matched_has_zero_deviation() {
        let g = ArrayGeometry::half_wavelength(64, 300e9).unwrap();
        let grid = CarrierGrid::narrowband(300e9).unwrap();
        let p = PolarPoint::new(0.5, 1.0).unwrap();
        let w = polar_codeword(&g, &grid, &p).unwrap();
        let pg = PolarGrid::new(PolarGrid::linspace(0.9, 1.1, 11), PolarGrid::linspace(0.4, 0.6, 11)).unwrap();
        let traj = focal_points(&g, &grid, &w, &pg).unwrap();
        assert_eq!(squint_deviation(&traj, &p).unwrap(), (0.0, 0.0));
        assert!(!traj.boundary_warning);
    }

    #[test]
    fn far_field_squint_law() {
        let g = ArrayGeometry::half_wavelength(256, 300e9).unwrap();
        let grid = CarrierGrid::new(300e9, 3, 15e9).unwrap();
        let theta_c = PI / 3.0;
        let w = dft_codeword(&g, &grid, theta_c).unwrap();
        let step = 0.02f64.to_radians();
        let angles: Vec<f64> = (0..1001).map(|k| 0.9 + k as f64 * step).collect();
        let pg = PolarGrid::new(angles, vec![1e5]).unwrap();
        let traj = focal_points(&g, &grid, &w, &pg).unwrap();
        for fp in &traj.points {
            let expect = (grid.center_hz() / fp.freq_hz * theta_c.cos()).acos();
            assert!((fp.point.angle_rad - expect).abs() <= step, "m={} {} vs {}", fp.m, fp.point.angle_rad, expect);
        }
    }

    #[test]
    fn boundary_flag_when_peak_outside_grid() {
        let g = ArrayGeometry::half_wavelength(64, 300e9).unwrap();
        let grid = CarrierGrid::narrowband(300e9).unwrap();
        let w = dft_codeword(&g, &grid, 1.0).unwrap();
        let pg = PolarGrid::new(PolarGrid::linspace(1.3, 1.5, 5), vec![100.0]).unwrap();
        assert!(focal_points(&g, &grid, &w, &pg).unwrap().boundary_warning);
    }

    #[test]
    fn empty_trajectory_is_error() {
        let t = SquintTrajectory { points: vec![], boundary_warning: false };
        assert!(squint_deviation(&t, &PolarPoint::new(1.0, 1.0).unwrap()).is_err());
    }
}
