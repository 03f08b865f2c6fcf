//! Built-in experiments. Each reads a validated configuration and returns
//! CSV tables plus summary records; trials run in parallel on independent
//! seeded streams and are merged in trial order.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::array::{near_field_steering, rayleigh_distance, ArrayGeometry, CarrierGrid, PolarPoint};
use crate::codebook::{angular_spread, gain_map, polar_codeword, Beamformer, DesignModel, PolarGrid};
use crate::delay_phase::{fit_arc_calibrated, DelayPhaseConfig, TrajectorySpec};
use crate::error::{Error, Result};
use crate::isac::{
    comm_only_rate, echo_sample, estimate_on_arc, partition_and_allocate, sense_from_echoes, AllocationPlan, Arc,
    Echo, SensingPlacement, SensingRequirement, UserDemand,
};
use crate::music::{collect_snapshots_with, complex_normal, music_localize, SampleCovariance};
use crate::squint::{focal_points, squint_deviation, SquintTrajectory};
use crate::wavenumber::{
    average_spectra, calibrate_radius_range, estimate_from_spectrum, estimate_position, source_position, upa_snapshot,
    wavenumber_transform_padded, PlanarArray, WavenumberOptions,
};

use super::config::ScenarioConfig;
use super::output::{fmt_f64, CsvTable, PlotSpec, Record};

/// Tables, records and warnings of one run.
pub(crate) type Outcome = (Vec<CsvTable>, Vec<Record>, Vec<String>);

/// Generator for item `index` of a named stream, seeded by
/// `sha256(master seed, stream, index)`.
pub fn stream_rng(seed: u64, stream: &str, index: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stream.as_bytes());
    h.update(index.to_le_bytes());
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// Generator of Monte-Carlo trial `index`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    stream_rng(seed, "trial", index)
}

fn record(sweep: impl Into<String>, metric: &str, value: f64, trials: usize) -> Record {
    Record {
        sweep: sweep.into(),
        metric: metric.into(),
        value,
        trials,
    }
}

fn ula(cfg: &ScenarioConfig) -> Result<ArrayGeometry> {
    ArrayGeometry::new(cfg.req_usize("array.num_elements")?, cfg.req_f64("array.spacing_m")?)
}

fn upa(cfg: &ScenarioConfig) -> Result<(PlanarArray, WavenumberOptions)> {
    let arr = PlanarArray::new(
        cfg.req_usize("upa.nx")?,
        cfg.req_usize("upa.nz")?,
        cfg.req_f64("upa.dx_m")?,
        cfg.req_f64("upa.dz_m")?,
    )?;
    let d = WavenumberOptions::default();
    let opts = WavenumberOptions {
        oversample: cfg.usize_or("upa.oversample", d.oversample),
        threshold_frac: cfg.f64_or("upa.threshold", d.threshold_frac),
    };
    Ok((arr, opts))
}

fn carrier(cfg: &ScenarioConfig) -> Result<CarrierGrid> {
    CarrierGrid::new(
        cfg.req_f64("carrier.center_hz")?,
        cfg.usize_or("carrier.num_subcarriers", 1),
        cfg.f64_or("carrier.spacing_hz", 0.0),
    )
}

fn target(cfg: &ScenarioConfig) -> Result<PolarPoint> {
    PolarPoint::new(cfg.req_f64("target.range_m")?, cfg.req_f64("target.angle_rad")?)
}

fn polar_grid(cfg: &ScenarioConfig) -> Result<PolarGrid> {
    let na = cfg.req_usize("grid.angle_count")?;
    let angles = match (cfg.f64("grid.angle_start_rad"), cfg.f64("grid.angle_end_rad")) {
        (Some(a), Some(b)) => PolarGrid::linspace(a, b, na),
        _ => PolarGrid::open_angles(na),
    };
    let nr = cfg.req_usize("grid.range_count")?;
    let r0 = cfg.req_f64("grid.range_start_m")?;
    let ranges = if nr == 1 {
        vec![r0]
    } else if let Some(per) = cfg.int("grid.ranges_per_decade") {
        PolarGrid::log_ranges(r0, per as usize, nr)
    } else {
        PolarGrid::linspace(r0, cfg.req_f64("grid.range_end_m")?, nr)
    };
    PolarGrid::new(angles, ranges)
}

fn trajectory_table(name: &str, traj: &SquintTrajectory, requested: Option<&[(usize, PolarPoint)]>) -> CsvTable {
    let mut t = CsvTable::new(
        name,
        &["m", "freq_hz", "requested_angle_rad", "angle_rad", "range_m", "gain"],
    )
    .with_plot(
        PlotSpec::line("Focal point per subcarrier", "m", &["requested_angle_rad", "angle_rad"], "subcarrier index", "angle (rad)")
            .with_kind("scatter"),
    );
    for fp in &traj.points {
        let req = requested
            .and_then(|r| r.iter().find(|(m, _)| *m == fp.m))
            .map_or(String::new(), |(_, p)| fmt_f64(p.angle_rad));
        t.push(vec![
            fp.m.to_string(),
            fmt_f64(fp.freq_hz),
            req,
            fmt_f64(fp.point.angle_rad),
            fmt_f64(fp.point.range_m),
            fmt_f64(fp.gain),
        ]);
    }
    t
}

fn plan_table(plan: &AllocationPlan) -> CsvTable {
    let mut t = CsvTable::new("plan", &["m", "role", "user_id", "power_w"]).with_plot(
        PlotSpec::line("Subcarrier plan", "m", &["power_w"], "subcarrier index", "power (W)").with_kind("bar"),
    );
    for (m, role, user, p) in plan.rows() {
        t.push(vec![
            m.to_string(),
            role.to_string(),
            user.map_or(String::new(), |u| u.to_string()),
            fmt_f64(p),
        ]);
    }
    t
}

fn delay_phase_table(cfg: &DelayPhaseConfig) -> CsvTable {
    let mut t = CsvTable::new("delay_phase", &["n", "delay_s", "phase_rad"]).with_plot(PlotSpec::line(
        "Delay-phase configuration",
        "n",
        &["delay_s", "phase_rad"],
        "antenna index",
        "delay (s) / phase (rad)",
    ));
    for (n, d, p) in cfg.rows() {
        t.push(vec![n.to_string(), fmt_f64(d), fmt_f64(p)]);
    }
    t
}

/// Angle-only grid at `range_m` covering `[lo - margin, hi + margin]`.
fn arc_grid(lo: f64, hi: f64, margin: f64, count: usize, range_m: f64) -> Result<PolarGrid> {
    let a0 = (lo - margin).max(1e-6);
    let a1 = (hi + margin).min(PI - 1e-6);
    PolarGrid::new(PolarGrid::linspace(a0, a1, count), vec![range_m])
}

/// Focal points of a polar codeword across the band and their deviation.
pub(crate) fn squint_deviation_exp(cfg: &ScenarioConfig) -> Result<Outcome> {
    let geom = ula(cfg)?;
    let grid = carrier(cfg)?;
    let p = target(cfg)?;
    let pg = polar_grid(cfg)?;
    let w = polar_codeword(&geom, &grid, &p)?;
    let traj = focal_points(&geom, &grid, &w, &pg)?;
    let (da, dr) = squint_deviation(&traj, &p)?;
    let mut warnings = Vec::new();
    if traj.boundary_warning {
        warnings.push("a focal point lies on the grid boundary".into());
    }

    let mut dev = CsvTable::new(
        "deviation",
        &["max_angle_deviation_rad", "max_angle_deviation_deg", "max_range_deviation_m", "boundary_warning"],
    );
    dev.push(vec![
        fmt_f64(da),
        fmt_f64(da.to_degrees()),
        fmt_f64(dr),
        traj.boundary_warning.to_string(),
    ]);
    let map = gain_map(&geom, &grid, &w, grid.center_index(), &pg)?;
    let mut gm = CsvTable::new("gain_map_center", &["angle_rad", "range_m", "gain"]).with_plot(
        PlotSpec::line("Beam gain at the center subcarrier", "angle_rad", &["gain"], "angle (rad)", "range (m)")
            .with_kind("heatmap")
            .log_y(),
    );
    for (a, r, g) in map.rows() {
        gm.push(vec![fmt_f64(a), fmt_f64(r), fmt_f64(g)]);
    }
    let records = vec![
        record("", "max_angle_deviation_rad", da, 1),
        record("", "max_angle_deviation_deg", da.to_degrees(), 1),
        record("", "max_range_deviation_m", dr, 1),
        record("", "max_step_cells", traj.max_step_cells() as f64, 1),
    ];
    Ok((
        vec![trajectory_table("trajectory", &traj, None), dev, gm],
        records,
        warnings,
    ))
}

/// Strongest-bin angular energy fraction over angles and range fractions of
/// the Rayleigh distance.
pub(crate) fn angular_spread_exp(cfg: &ScenarioConfig) -> Result<Outcome> {
    let geom = ula(cfg)?;
    let grid = CarrierGrid::narrowband(cfg.req_f64("carrier.center_hz")?)?;
    let rd = rayleigh_distance(&geom, &grid);
    let angles = cfg.req_f64_list("sweep.angles_rad")?;
    let fracs = cfg.req_f64_list("sweep.rayleigh_fractions")?;
    let mut t = CsvTable::new(
        "spread",
        &["angle_rad", "range_m", "rayleigh_fraction", "strongest_bin_fraction"],
    )
    .with_plot(
        PlotSpec::line(
            "Angular energy concentration versus range",
            "rayleigh_fraction",
            &["strongest_bin_fraction"],
            "range / Rayleigh distance",
            "strongest-bin energy fraction",
        )
        .with_kind("scatter")
        .log_x(),
    );
    let mut sums = vec![0.0; fracs.len()];
    for &a in &angles {
        for (j, &q) in fracs.iter().enumerate() {
            let p = PolarPoint::new(q * rd, a)?;
            let s = angular_spread(&geom, &grid, &p)?;
            sums[j] += s;
            t.push(vec![fmt_f64(a), fmt_f64(p.range_m), fmt_f64(q), fmt_f64(s)]);
        }
    }
    let records = fracs
        .iter()
        .zip(&sums)
        .map(|(q, s)| {
            record(
                format!("rayleigh_fraction={q}"),
                "mean_strongest_bin_fraction",
                s / angles.len() as f64,
                angles.len(),
            )
        })
        .chain(std::iter::once(record("", "rayleigh_distance_m", rd, 1)))
        .collect();
    Ok((vec![t], records, vec![]))
}

/// Radius-range calibration and closed-loop estimates on test ranges.
pub(crate) fn wavenumber_calibration_exp(cfg: &ScenarioConfig) -> Result<Outcome> {
    let (arr, opts) = upa(cfg)?;
    let f = cfg.req_f64("carrier.center_hz")?;
    let dir = cfg.req_f64("target.angle_rad")?;
    let ranges = cfg.req_f64_list("sweep.ranges_m")?;
    let tests = cfg.req_f64_list("sweep.test_ranges_m")?;
    let table = calibrate_radius_range(&arr, f, dir, &ranges, &opts)?;

    let mut tt = CsvTable::new("table", &["range_m", "radius_bins"]).with_plot(
        PlotSpec::line("Support radius versus range", "range_m", &["radius_bins"], "range (m)", "radius (bins)")
            .log_x(),
    );
    for &(r, q) in table.entries() {
        tt.push(vec![fmt_f64(r), fmt_f64(q)]);
    }

    let mut et = CsvTable::new(
        "estimates",
        &[
            "range_m",
            "estimated_range_m",
            "range_error_m",
            "half_local_spacing_m",
            "estimated_angle_rad",
            "angle_error_rad",
            "phase_invariant",
        ],
    )
    .with_plot(
        PlotSpec::line(
            "Closed-loop range estimates",
            "range_m",
            &["range_error_m", "half_local_spacing_m"],
            "range (m)",
            "error (m)",
        )
        .with_kind("scatter"),
    );
    let mut worst_ratio = 0.0f64;
    let mut all_invariant = true;
    for (i, &r) in tests.iter().enumerate() {
        let p = PolarPoint::new(r, dir)?;
        let phase = stream_rng(cfg.seed(), "global-phase", i as u64).random::<f64>() * 2.0 * PI;
        let (est, _) = estimate_position(&arr, f, &upa_snapshot(&arr, source_position(&p), f, 0.0)?, &table)?;
        let (est2, _) = estimate_position(&arr, f, &upa_snapshot(&arr, source_position(&p), f, phase)?, &table)?;
        let invariant = est.range_m.to_bits() == est2.range_m.to_bits()
            && est.angle_rad.to_bits() == est2.angle_rad.to_bits();
        all_invariant &= invariant;
        let half = table.local_spacing(r).map_or(f64::NAN, |s| s / 2.0);
        let err = (est.range_m - r).abs();
        worst_ratio = worst_ratio.max(err / half);
        et.push(vec![
            fmt_f64(r),
            fmt_f64(est.range_m),
            fmt_f64(err),
            fmt_f64(half),
            fmt_f64(est.angle_rad),
            fmt_f64((est.angle_rad - dir).abs()),
            invariant.to_string(),
        ]);
    }
    let records = vec![
        record("", "worst_error_to_half_spacing", worst_ratio, tests.len()),
        record("", "phase_invariant", if all_invariant { 1.0 } else { 0.0 }, tests.len()),
    ];
    Ok((vec![tt, et], records, vec![]))
}

struct MethodStats {
    failures: usize,
    se_range: f64,
    se_angle: f64,
    ok: usize,
}

impl MethodStats {
    fn new() -> Self {
        Self {
            failures: 0,
            se_range: 0.0,
            se_angle: 0.0,
            ok: 0,
        }
    }

    fn add(&mut self, est: Option<PolarPoint>, truth: &PolarPoint) {
        match est {
            Some(e) => {
                self.ok += 1;
                self.se_range += (e.range_m - truth.range_m).powi(2);
                self.se_angle += (e.angle_rad - truth.angle_rad).powi(2);
            }
            None => self.failures += 1,
        }
    }

    fn rmse(&self) -> (f64, f64) {
        if self.ok == 0 {
            return (f64::NAN, f64::NAN);
        }
        let k = self.ok as f64;
        ((self.se_range / k).sqrt(), (self.se_angle / k).sqrt())
    }
}

/// Localization RMSE of 2D MUSIC on the linear array and of the wavenumber
/// pipeline on the planar array, at the same SNR and snapshot count.
pub(crate) fn music_vs_wavenumber_exp(cfg: &ScenarioConfig) -> Result<Outcome> {
    let geom = ula(cfg)?;
    let (arr, opts) = upa(cfg)?;
    let f = cfg.req_f64("carrier.center_hz")?;
    let grid = CarrierGrid::narrowband(f)?;
    let dir = cfg.req_f64("target.angle_rad")?;
    let calib = cfg.req_f64_list("sweep.ranges_m")?;
    let tests = cfg.req_f64_list("sweep.test_ranges_m")?;
    let k = cfg.req_usize("music.snapshots")?;
    let noise = 10f64.powf(-cfg.req_f64("music.snr_db")? / 10.0);
    let trials = cfg.req_usize("music.trials")?;
    let hw = cfg.f64_or("music.angle_half_width_rad", 0.02);
    let span = cfg.f64_or("music.range_span_ratio", 1.5);
    let gp = cfg.usize_or("music.grid_points", 41);
    let table = calibrate_radius_range(&arr, f, dir, &calib, &opts)?;

    let mut out = CsvTable::new(
        "comparison",
        &["range_m", "method", "trials", "failures", "rmse_range_m", "rmse_angle_rad"],
    )
    .with_plot(
        PlotSpec::line("Localization RMSE", "range_m", &["rmse_range_m"], "range (m)", "range RMSE (m)")
            .with_kind("grouped-line"),
    );
    let mut records = Vec::new();
    for (ti, &r) in tests.iter().enumerate() {
        let truth = PolarPoint::new(r, dir)?;
        let pg = PolarGrid::new(
            PolarGrid::linspace(dir - hw, dir + hw, gp),
            (0..gp)
                .map(|i| r / span * (span * span).powf(i as f64 / (gp - 1) as f64))
                .collect(),
        )?;
        let base = upa_snapshot(&arr, source_position(&truth), f, 0.0)?;
        let results: Vec<(Option<PolarPoint>, Option<PolarPoint>)> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(cfg.seed(), (ti * trials + t) as u64);
                let music = collect_snapshots_with(&geom, &grid, &[truth], k, noise, &mut rng)
                    .and_then(|x| SampleCovariance::from_snapshots(&x))
                    .and_then(|c| music_localize(&c, &geom, &grid, &pg, 1))
                    .ok()
                    .filter(|e| !e.boundary_warning)
                    .and_then(|e| e.points.first().copied());
                let spectra: Vec<_> = (0..k)
                    .map(|_| {
                        let s = complex_normal(&mut rng, 1.0);
                        let snap = base.map(|v| v * s + complex_normal(&mut rng, noise));
                        wavenumber_transform_padded(&snap, opts.oversample)
                    })
                    .collect();
                let wave = average_spectra(&spectra)
                    .and_then(|s| estimate_from_spectrum(&arr, f, &s, &table))
                    .ok()
                    .map(|(p, _)| p);
                (music, wave)
            })
            .collect();
        let mut ms = MethodStats::new();
        let mut ws = MethodStats::new();
        for (m, w) in &results {
            ms.add(*m, &truth);
            ws.add(*w, &truth);
        }
        for (name, s) in [("music", &ms), ("wavenumber", &ws)] {
            let (rr, ra) = s.rmse();
            out.push(vec![
                fmt_f64(r),
                name.to_string(),
                trials.to_string(),
                s.failures.to_string(),
                fmt_f64(rr),
                fmt_f64(ra),
            ]);
            records.push(record(format!("range_m={r},method={name}"), "rmse_range_m", rr, s.ok));
            records.push(record(format!("range_m={r},method={name}"), "rmse_angle_rad", ra, s.ok));
        }
    }
    Ok((vec![out], records, vec![]))
}

/// Users with exponential gains whose mean equal-power SNR is `mean_snr_db`.
pub fn draw_users<R: Rng + ?Sized>(
    rng: &mut R,
    num_users: usize,
    num_subcarriers: usize,
    mean_snr_db: f64,
    total_power_w: f64,
    noise_power_w: f64,
) -> Result<Vec<UserDemand>> {
    let scale = 10f64.powf(mean_snr_db / 10.0) * noise_power_w * num_subcarriers as f64 / total_power_w;
    (0..num_users)
        .map(|u| {
            let gains = (0..num_subcarriers)
                .map(|_| {
                    let e: f64 = Exp1.sample(rng);
                    e * scale
                })
                .collect();
            UserDemand::new(u, gains, None)
        })
        .collect()
}

fn placement(cfg: &ScenarioConfig, path: &str, default: SensingPlacement) -> SensingPlacement {
    match cfg.str(path) {
        Some("uniform") => SensingPlacement::Uniform,
        Some("rate-optimal") => SensingPlacement::RateOptimal,
        _ => default,
    }
}

fn config_arc(cfg: &ScenarioConfig) -> Arc {
    Arc {
        theta_start_rad: cfg.f64_or("sensing.arc_start_rad", 60f64.to_radians()),
        theta_end_rad: cfg.f64_or("sensing.arc_end_rad", 80f64.to_radians()),
        range_m: cfg.f64_or("sensing.arc_range_m", 20.0),
    }
}

/// Angle RMSE versus SNR for sensing-only, squint-assisted ISAC and a
/// conventional one-direction-per-slot sweep with equal frame energy.
pub(crate) fn rmse_vs_snr_exp(cfg: &ScenarioConfig) -> Result<Outcome> {
    let geom = ula(cfg)?;
    let grid = carrier(cfg)?;
    let n_sub = grid.num_subcarriers();
    let arc = config_arc(cfg);
    let (lo, hi, r) = (arc.theta_start_rad, arc.theta_end_rad, arc.range_m);
    let total_power = cfg.req_f64("allocation.total_power_w")?;
    let p_ref = total_power / n_sub as f64;
    let ks = cfg.req_usize("sensing.num_subcarriers")?;
    let p_min = cfg.req_f64("sensing.p_min_w")?;
    let slots = cfg.usize_or("sensing.frame_slots", 8) as f64;
    let n_dirs = cfg.usize_or("sensing.sweep_directions", 8);
    let sub = cfg.usize_or("sensing.sweep_subarray", 8).min(geom.num_elements());
    let beta = cfg.f64_or("target.reflectivity", 1.0);
    let trials = cfg.req_usize("experiment.trials")?;
    let snrs = cfg.req_f64_list("experiment.snr_db")?;
    let margin = cfg.f64_or("grid.angle_margin_rad", 2f64.to_radians());
    let step = 0.01f64.to_radians();
    let count = cfg.usize_or("grid.angle_count", ((hi - lo + 2.0 * margin) / step).round() as usize + 1);

    // Sensing-only: every subcarrier on the arc.
    let all: Vec<usize> = (0..n_sub).collect();
    let pg = arc_grid(lo, hi, margin, count, r)?;
    let iterations = cfg.usize_or("sensing.calibration_iterations", 3);
    let so_fit = fit_arc_calibrated(&geom, &grid, &all, lo, hi, r, &pg, iterations)?;
    let (so_beams, so_traj) = (&so_fit.beams, &so_fit.trajectory);

    // Squint-assisted ISAC: sensing subcarriers from the allocation plan.
    let users = draw_users(
        &mut stream_rng(cfg.seed(), "users", 0),
        cfg.usize_or("allocation.num_users", 4),
        n_sub,
        cfg.f64_or("allocation.mean_snr_db", 10.0),
        total_power,
        cfg.f64_or("allocation.noise_power_w", 1.0),
    )?;
    let sreq = SensingRequirement {
        arc,
        num_subcarriers: ks,
        p_min_w: p_min,
        placement: placement(cfg, "sensing.placement", SensingPlacement::Uniform),
    };
    let plan = partition_and_allocate(n_sub, &users, &sreq, total_power, cfg.f64_or("allocation.noise_power_w", 1.0))?;
    let sensing = plan.sensing_set();
    let sq_sub: Vec<usize> = sensing.iter().map(|s| s.0).collect();
    let sq_spec = TrajectorySpec::arc_on(&sq_sub, lo, hi, r)?;
    let sq_fit = fit_arc_calibrated(&geom, &grid, &sq_sub, lo, hi, r, &pg, iterations)?;
    let (sq_beams, sq_traj) = (&sq_fit.beams, &sq_fit.trajectory);

    // Conventional sweep: subarray beams focused on each direction at every
    // sensing subcarrier.
    let dirs = PolarGrid::linspace(lo, hi, n_dirs);
    let first = (geom.num_elements() - sub) / 2;
    let cv_beams = dirs
        .iter()
        .map(|&a| {
            let p = PolarPoint::new(r, a)?;
            sq_sub
                .iter()
                .map(|&m| {
                    let s = near_field_steering(&geom, &p, &grid, m)?;
                    let w = s
                        .values
                        .iter()
                        .enumerate()
                        .map(|(n, v)| if n >= first && n < first + sub { *v } else { Complex64::new(0.0, 0.0) })
                        .collect();
                    Beamformer::normalized(w, Some(p), DesignModel::PolarPoint)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let so_len = so_beams.len();
    let sq_len = sq_beams.len();
    let cv_energy = (ks as f64 * p_min).sqrt();
    let per_trial: Vec<Vec<[f64; 3]>> = (0..trials)
        .into_par_iter()
        .map(|k| -> Result<Vec<[f64; 3]>> {
            let mut rng = trial_rng(cfg.seed(), k as u64);
            let u: f64 = rng.random();
            let theta = lo + (k as f64 + u) / trials as f64 * (hi - lo);
            let tgt = PolarPoint::new(r, theta)?;
            let steer = (0..n_sub)
                .map(|m| near_field_steering(&geom, &tgt, &grid, m).map(|s| s.values))
                .collect::<Result<Vec<_>>>()?;
            let n_so: Vec<Complex64> = (0..so_len).map(|_| complex_normal(&mut rng, 1.0)).collect();
            let n_sq: Vec<Complex64> = (0..sq_len).map(|_| complex_normal(&mut rng, 1.0)).collect();
            let n_cv: Vec<Complex64> = (0..n_dirs).map(|_| complex_normal(&mut rng, 1.0)).collect();
            let g_so: Vec<f64> = all.iter().map(|&m| so_beams[m].gain(&steer[m]).sqrt()).collect();
            let g_sq: Vec<f64> = sq_sub
                .iter()
                .zip(sq_beams.iter())
                .map(|(&m, b)| b.gain(&steer[m]).sqrt())
                .collect();
            let g_cv: Vec<f64> = cv_beams
                .iter()
                .map(|bs| {
                    bs.iter()
                        .zip(&sq_sub)
                        .map(|(b, &m)| b.gain(&steer[m]).sqrt())
                        .sum::<f64>()
                        / bs.len() as f64
                })
                .collect();
            snrs.iter()
                .map(|&snr| {
                    let sigma = (beta * beta * p_ref / 10f64.powf(snr / 10.0)).sqrt();
                    let avg = sigma / slots.sqrt();
                    let echoes = |subs: &[usize], g: &[f64], n: &[Complex64], p: f64| -> Vec<Echo> {
                        subs.iter()
                            .enumerate()
                            .map(|(j, &m)| Echo {
                                m,
                                amplitude: echo_sample(g[j], beta, p, n[j] * avg),
                                power_w: p,
                            })
                            .collect()
                    };
                    let e_so = sense_from_echoes(so_traj, &echoes(&all, &g_so, &n_so, p_ref))?;
                    let e_sq = sense_from_echoes(sq_traj, &echoes(&sq_sub, &g_sq, &n_sq, p_min))?;
                    let amps: Vec<f64> = g_cv
                        .iter()
                        .zip(&n_cv)
                        .map(|(&g, &n)| {
                            (Complex64::new(beta * g * cv_energy, 0.0) + n * sigma).norm() / cv_energy
                        })
                        .collect();
                    let e_cv = estimate_on_arc(&dirs, &amps)?;
                    Ok([
                        (e_so - theta).powi(2),
                        (e_sq - theta).powi(2),
                        (e_cv - theta).powi(2),
                    ])
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rt = CsvTable::new(
        "rmse",
        &["snr_db", "rmse_sensing_only_rad", "rmse_squint_isac_rad", "rmse_conventional_rad"],
    )
    .with_plot(
        PlotSpec::line(
            "Angle RMSE versus SNR",
            "snr_db",
            &["rmse_sensing_only_rad", "rmse_squint_isac_rad", "rmse_conventional_rad"],
            "SNR (dB)",
            "angle RMSE (rad)",
        )
        .log_y(),
    );
    let mut records = Vec::new();
    for (i, &snr) in snrs.iter().enumerate() {
        let mut s = [0.0; 3];
        for t in &per_trial {
            for (acc, v) in s.iter_mut().zip(t[i]) {
                *acc += v;
            }
        }
        let rm = s.map(|v| (v / trials as f64).sqrt());
        rt.push(vec![fmt_f64(snr), fmt_f64(rm[0]), fmt_f64(rm[1]), fmt_f64(rm[2])]);
        for (name, v) in ["rmse_sensing_only_rad", "rmse_squint_isac_rad", "rmse_conventional_rad"]
            .iter()
            .zip(rm)
        {
            records.push(record(format!("snr_db={snr}"), name, v, trials));
        }
    }
    records.push(record("", "sensing_only_max_focal_miss_rad", so_fit.max_angle_miss_rad, 1));
    records.push(record("", "squint_isac_max_focal_miss_rad", sq_fit.max_angle_miss_rad, 1));
    records.push(record("", "sensing_only_endpoint_miss_rad", so_fit.endpoint_miss_rad, 1));
    records.push(record("", "squint_isac_endpoint_miss_rad", sq_fit.endpoint_miss_rad, 1));
    let mut warnings = Vec::new();
    if so_traj.boundary_warning || sq_traj.boundary_warning {
        warnings.push("a sensing focal point lies on the angle grid boundary".into());
    }
    Ok((
        vec![
            rt,
            plan_table(&plan),
            delay_phase_table(&sq_fit.config),
            trajectory_table("trajectory", sq_traj, Some(sq_spec.entries())),
        ],
        records,
        warnings,
    ))
}

/// Sum rate with sensing reservations relative to the comm-only optimum on
/// the same channel draws.
pub(crate) fn rate_vs_sensing_budget_exp(cfg: &ScenarioConfig) -> Result<Outcome> {
    let n_sub = cfg.req_usize("carrier.num_subcarriers")?;
    let total = cfg.req_f64("allocation.total_power_w")?;
    let noise = cfg.req_f64("allocation.noise_power_w")?;
    let n_users = cfg.req_usize("allocation.num_users")?;
    let mean_snr = cfg.req_f64("allocation.mean_snr_db")?;
    let draws = cfg.req_usize("allocation.draws")?;
    let counts = cfg
        .usize_list("sweep.sensing_counts")
        .ok_or_else(|| Error::Config("missing key `sweep.sensing_counts`".into()))?;
    let fractions = cfg.req_f64_list("sweep.power_fractions")?;
    let arc = config_arc(cfg);
    let place = placement(cfg, "allocation.placement", SensingPlacement::RateOptimal);

    let channels: Vec<(Vec<UserDemand>, f64)> = (0..draws)
        .into_par_iter()
        .map(|d| {
            let users = draw_users(&mut trial_rng(cfg.seed(), d as u64), n_users, n_sub, mean_snr, total, noise)?;
            let opt = comm_only_rate(n_sub, &users, total, noise);
            Ok((users, opt))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut t = CsvTable::new(
        "rate",
        &[
            "sensing_subcarriers",
            "sensing_power_fraction",
            "draws",
            "mean_rate_ratio",
            "min_rate_ratio",
            "mean_sum_rate",
            "mean_comm_only_rate",
        ],
    )
    .with_plot(
        PlotSpec::line(
            "Rate retained under sensing reservations",
            "sensing_subcarriers",
            &["mean_rate_ratio", "min_rate_ratio"],
            "sensing subcarriers",
            "sum rate / comm-only optimum",
        )
        .with_kind("grouped-line"),
    );
    let mut records = Vec::new();
    let mut first_plan = None;
    for &ks in &counts {
        for &frac in &fractions {
            let sreq = SensingRequirement {
                arc,
                num_subcarriers: ks,
                p_min_w: if ks == 0 { 0.0 } else { frac * total / ks as f64 },
                placement: place,
            };
            let plans: Vec<AllocationPlan> = channels
                .par_iter()
                .map(|(u, _)| partition_and_allocate(n_sub, u, &sreq, total, noise))
                .collect::<Result<Vec<_>>>()?;
            let ratios: Vec<f64> = plans
                .iter()
                .zip(&channels)
                .map(|(p, (_, opt))| if *opt > 0.0 { p.sum_rate / opt } else { 1.0 })
                .collect();
            let mean = ratios.iter().sum::<f64>() / draws as f64;
            let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            let mean_rate = plans.iter().map(|p| p.sum_rate).sum::<f64>() / draws as f64;
            let mean_opt = channels.iter().map(|c| c.1).sum::<f64>() / draws as f64;
            t.push(vec![
                ks.to_string(),
                fmt_f64(frac),
                draws.to_string(),
                fmt_f64(mean),
                fmt_f64(min),
                fmt_f64(mean_rate),
                fmt_f64(mean_opt),
            ]);
            let sweep = format!("sensing_subcarriers={ks},power_fraction={frac}");
            records.push(record(sweep.clone(), "mean_rate_ratio", mean, draws));
            records.push(record(sweep, "min_rate_ratio", min, draws));
            if first_plan.is_none() {
                first_plan = plans.into_iter().next();
            }
        }
    }
    let mut tables = vec![t];
    if let Some(p) = first_plan {
        tables.push(plan_table(&p));
    }
    Ok((tables, records, vec![]))
}
