//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nfisac::array::{max_model_phase_error, rayleigh_distance, ArrayGeometry, CarrierGrid, PolarPoint};
use nfisac::codebook::{dft_codeword, gain_map, PolarGrid};
use nfisac::delay_phase::{apply_delay_phase, fit_trajectory, TrajectorySpec};
use nfisac::isac::{
    kalman_predict_update, partition_and_allocate, sum_rate, Arc, PolarNoise, SensingPlacement, SensingRequirement,
    TrackState, UserDemand,
};
use nfisac::music::{collect_snapshots_with, music_localize, SampleCovariance};
use nfisac::sim::{load_config, run_experiment, ExperimentResult};
use nfisac::squint::focal_points_for;
use nfisac::wavenumber::{forward_support, PlanarArray, WavenumberOptions};
use nfisac::Result;

const FC: f64 = 300e9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.toml"))
}

fn run(name: &str) -> Result<ExperimentResult> {
    run_experiment(&load_config(&config_path(name))?)
}

fn metric(r: &ExperimentResult, sweep: &str, name: &str) -> f64 {
    r.metric(sweep, name).unwrap_or(f64::NAN)
}

fn far_field_convergence() -> Result<Outcome> {
    let g = ArrayGeometry::half_wavelength(256, FC)?;
    let grid = CarrierGrid::narrowband(FC)?;
    let r_ray = rayleigh_distance(&g, &grid);
    let r_far = 1e6 * g.aperture_m();
    let angles = PolarGrid::linspace(0.2, PI - 0.2, 61);
    let (mut near, mut far) = (0.0f64, 0.0f64);
    for &a in angles.iter().chain(std::iter::once(&FRAC_PI_2)) {
        near = near.max(max_model_phase_error(&g, &grid, &PolarPoint::new(r_ray, a)?)?);
        far = far.max(max_model_phase_error(&g, &grid, &PolarPoint::new(r_far, a)?)?);
    }
    Ok(outcome(
        near < PI / 8.0 && far < 1e-3,
        format!("max error {near:.6} rad at Rayleigh (limit {:.6}), {far:.2e} rad at 10^6 apertures", PI / 8.0),
    ))
}

fn squint_reproduction() -> Result<Outcome> {
    let r = run("squint-deviation")?;
    let da = metric(&r, "", "max_angle_deviation_deg");
    let dr = metric(&r, "", "max_range_deviation_m");
    Ok(outcome(
        (4.2..=9.8).contains(&da) && (3.6..=8.4).contains(&dr),
        format!("angle deviation {da:.3} deg in [4.2, 9.8], range deviation {dr:.3} m in [3.6, 8.4]"),
    ))
}

fn far_field_squint_law() -> Result<Outcome> {
    let g = ArrayGeometry::half_wavelength(256, FC)?;
    let grid = CarrierGrid::with_bandwidth(FC, 3, 30e9)?;
    let theta_c = 60f64.to_radians();
    let w = dft_codeword(&g, &grid, theta_c)?;
    let edge = grid.num_subcarriers() - 1;
    let f = grid.freq(edge);
    let expected = ((FC / f) * theta_c.cos()).acos();
    let pg = PolarGrid::new(PolarGrid::linspace(0.9, 1.2, 3001), vec![1e6 * g.aperture_m()])?;
    let map = gain_map(&g, &grid, &w, edge, &pg)?;
    let (ia, _, _) = map.argmax();
    let cell = pg.angles_rad[1] - pg.angles_rad[0];
    let err = (pg.angles_rad[ia] - expected).abs();
    Ok(outcome(
        err <= cell,
        format!("peak {:.5} rad vs law {expected:.5} rad at {f:.4e} Hz, error {err:.2e} (cell {cell:.2e})", pg.angles_rad[ia]),
    ))
}

fn angular_range_coupling() -> Result<Outcome> {
    let r = run("angular-spread")?;
    let t = r.table("spread").expect("spread table");
    let angles = t.f64_column("angle_rad").unwrap_or_default();
    let fracs = t.f64_column("rayleigh_fraction").unwrap_or_default();
    let spread = t.f64_column("strongest_bin_fraction").unwrap_or_default();
    let mut distinct: Vec<f64> = angles.clone();
    distinct.dedup();
    let mut ok = distinct.len() == 10;
    let mut worst = f64::NEG_INFINITY;
    for &a in &distinct {
        let at = |fr: f64| {
            (0..angles.len())
                .find(|&i| angles[i] == a && fracs[i] == fr)
                .map(|i| spread[i])
        };
        match (at(0.05), at(10.0)) {
            (Some(near), Some(far)) => {
                ok &= near < far;
                worst = worst.max(near - far);
            }
            _ => ok = false,
        }
    }
    Ok(outcome(
        ok,
        format!("{} angles, largest near-minus-far strongest-bin fraction {worst:.4}", distinct.len()),
    ))
}

fn wavenumber_pipeline() -> Result<Outcome> {
    let lam = nfisac::array::SPEED_OF_LIGHT / FC;
    let arr = PlanarArray::new(64, 64, 4.0 * lam, 4.0 * lam)?;
    let opts = WavenumberOptions::default();
    let radii = [2.0, 4.0, 8.0, 16.0, 32.0]
        .iter()
        .map(|&r| forward_support(&arr, FC, &PolarPoint::new(r, FRAC_PI_2)?, &opts).map(|s| s.radius_bins))
        .collect::<Result<Vec<_>>>()?;
    let decreasing = radii.windows(2).all(|w| w[1] < w[0]);
    let r = run("wavenumber-calibration")?;
    let worst = metric(&r, "", "worst_error_to_half_spacing");
    let invariant = metric(&r, "", "phase_invariant") == 1.0;
    let radii_s: Vec<String> = radii.iter().map(|q| format!("{q:.2}")).collect();
    Ok(outcome(
        decreasing && worst <= 1.0 && invariant,
        format!(
            "radii [{}] bins, worst error {worst:.3} of half spacing, phase invariant {invariant}",
            radii_s.join(", ")
        ),
    ))
}

fn music_baseline() -> Result<Outcome> {
    let g = ArrayGeometry::half_wavelength(64, FC)?;
    let grid = CarrierGrid::narrowband(FC)?;
    let pg = PolarGrid::new(PolarGrid::linspace(1.1, 1.3, 41), PolarGrid::linspace(0.3, 0.7, 41))?;
    let truth = pg.point(20, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = collect_snapshots_with(&g, &grid, &[truth], 64, 0.0, &mut rng)?;
    let est = music_localize(&SampleCovariance::from_snapshots(&x)?, &g, &grid, &pg, 1)?;
    let exact = est.cells[0] == (20, 20);
    let (mut se_a, mut se_r) = (0.0, 0.0);
    let trials = 100;
    for _ in 0..trials {
        let x = collect_snapshots_with(&g, &grid, &[truth], 256, 0.01, &mut rng)?;
        let est = music_localize(&SampleCovariance::from_snapshots(&x)?, &g, &grid, &pg, 1)?;
        se_a += (est.points[0].angle_rad - truth.angle_rad).powi(2);
        se_r += (est.points[0].range_m - truth.range_m).powi(2);
    }
    let cell_a = pg.angles_rad[1] - pg.angles_rad[0];
    let cell_r = pg.ranges_m[1] - pg.ranges_m[0];
    let ca = (se_a / trials as f64).sqrt() / cell_a;
    let cr = (se_r / trials as f64).sqrt() / cell_r;
    Ok(outcome(
        exact && ca <= 2.0 && cr <= 2.0,
        format!("noiseless on-grid recovery {exact}, 20 dB RMSE {ca:.3} angle cells and {cr:.3} range cells"),
    ))
}

fn delay_phase_fit() -> Result<Outcome> {
    let g = ArrayGeometry::half_wavelength(256, FC)?;
    let grid = CarrierGrid::with_bandwidth(FC, 65, 30e9)?;
    let p = PolarPoint::new(20.0, 70f64.to_radians())?;
    let single = TrajectorySpec::new((0..65).map(|m| (m, p)).collect())?;
    let (_, res) = fit_trajectory(&g, &grid, &single)?;
    let (lo, hi) = (60f64.to_radians(), 80f64.to_radians());
    let spec = TrajectorySpec::arc(&grid, lo, hi, 20.0)?;
    let (cfg, _) = fit_trajectory(&g, &grid, &spec)?;
    let beams = (0..65).map(|m| apply_delay_phase(&cfg, &grid, m)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&[Complex64]> = beams.iter().map(|b| b.weights.as_slice()).collect();
    let subs: Vec<usize> = (0..65).collect();
    let pg = PolarGrid::new(
        PolarGrid::linspace(57f64.to_radians(), 83f64.to_radians(), 1301),
        PolarGrid::linspace(10.0, 40.0, 121),
    )?;
    let traj = focal_points_for(&g, &grid, &refs, &subs, &pg)?;
    let hits = traj
        .points
        .iter()
        .zip(spec.entries())
        .filter(|(fp, (_, want))| {
            (fp.point.angle_rad - want.angle_rad).abs() <= 1f64.to_radians()
                && (fp.point.range_m - want.range_m).abs() <= 1.0
        })
        .count();
    let frac = hits as f64 / 65.0;
    Ok(outcome(
        res < 1e-6 && frac >= 0.9,
        format!("single-point residual {res:.2e} rad, {hits}/65 arc focal points within 1 deg and 1 m"),
    ))
}

fn rmse_ordering() -> Result<Outcome> {
    let r = run("rmse-vs-snr")?;
    let t = r.table("rmse").expect("rmse table");
    let so = t.f64_column("rmse_sensing_only_rad").unwrap_or_default();
    let sq = t.f64_column("rmse_squint_isac_rad").unwrap_or_default();
    let cv = t.f64_column("rmse_conventional_rad").unwrap_or_default();
    let snr = t.f64_column("snr_db").unwrap_or_default();
    let expected: Vec<f64> = (0..7).map(|k| 5.0 * k as f64).collect();
    let grid_ok = snr == expected
        && r.records.iter().filter(|x| x.metric.starts_with("rmse_")).all(|x| x.trials == 200);
    let ordered = (0..so.len()).all(|i| so[i] <= sq[i] && sq[i] <= cv[i]);
    let nonincreasing = [&so, &sq, &cv].iter().all(|c| c.windows(2).all(|w| w[1] <= w[0]));
    let ratio = sq.last().copied().unwrap_or(f64::NAN) / so.last().copied().unwrap_or(f64::NAN);
    Ok(outcome(
        grid_ok && ordered && nonincreasing && ratio <= 1.5,
        format!("ordering {ordered}, nonincreasing {nonincreasing}, squint/sensing-only ratio at 30 dB {ratio:.3}"),
    ))
}

fn rate_claim() -> Result<Outcome> {
    let r = run("rate-vs-sensing-budget")?;
    let t = r.table("rate").expect("rate table");
    let ks = t.f64_column("sensing_subcarriers").unwrap_or_default();
    let pf = t.f64_column("sensing_power_fraction").unwrap_or_default();
    let min = t.f64_column("min_rate_ratio").unwrap_or_default();
    let n_sub = 65.0;
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for i in 0..ks.len() {
        if ks[i] > 0.0 && ks[i] / n_sub <= 0.1 && pf[i] <= 0.1 {
            worst = worst.min(min[i]);
            count += 1;
        }
    }
    Ok(outcome(
        count > 0 && worst >= 0.9,
        format!("{count} budgets within 10% of subcarriers and power, worst per-draw rate ratio {worst:.4}"),
    ))
}

/// Best discretized sum rate over every sensing set, user assignment and
/// power split of the communication budget into `levels` equal units.
fn exhaustive_rate(users: &[UserDemand], ks: usize, budget: f64, levels: usize, noise: f64) -> f64 {
    let n = users[0].gains.len();
    let mut best = 0.0f64;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != ks {
            continue;
        }
        let comm: Vec<usize> = (0..n).filter(|m| mask & (1 << m) == 0).collect();
        let n_assign = users.len().pow(comm.len() as u32);
        for a in 0..n_assign {
            let mut code = a;
            let gains: Vec<f64> = comm
                .iter()
                .map(|&m| {
                    let u = code % users.len();
                    code /= users.len();
                    users[u].gains[m]
                })
                .collect();
            let mut units = vec![0usize; gains.len()];
            best = best.max(split(&gains, &mut units, 0, levels, budget / levels as f64, noise));
        }
    }
    best
}

fn split(gains: &[f64], units: &mut [usize], i: usize, left: usize, unit: f64, noise: f64) -> f64 {
    if i + 1 == gains.len() {
        units[i] = left;
        let p: Vec<f64> = units.iter().map(|&u| u as f64 * unit).collect();
        return sum_rate(gains, &p, noise);
    }
    let mut best = 0.0f64;
    for u in 0..=left {
        units[i] = u;
        best = best.max(split(gains, units, i + 1, left - u, unit, noise));
    }
    best
}

fn allocation_oracle() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (total, p_min, noise, levels) = (1.0, 0.05, 0.1, 50);
    let mut worst = f64::INFINITY;
    for _ in 0..5 {
        let users = (0..2)
            .map(|u| UserDemand::new(u, (0..6).map(|_| rng.random_range(0.05..2.0)).collect(), None))
            .collect::<Result<Vec<_>>>()?;
        let sreq = SensingRequirement {
            arc: Arc {
                theta_start_rad: 1.0,
                theta_end_rad: 1.2,
                range_m: 20.0,
            },
            num_subcarriers: 2,
            p_min_w: p_min,
            placement: SensingPlacement::RateOptimal,
        };
        let plan = partition_and_allocate(6, &users, &sreq, total, noise)?;
        let opt = exhaustive_rate(&users, 2, total - 2.0 * p_min, levels, noise);
        worst = worst.min(plan.sum_rate / opt);
    }
    Ok(outcome(
        worst >= 0.98,
        format!("worst heuristic/exhaustive sum-rate ratio {worst:.5} over 5 instances ({levels} power levels)"),
    ))
}

fn kalman_tracking() -> Result<Outcome> {
    let quiet = PolarNoise {
        sigma_range_m: 0.0,
        sigma_angle_rad: 0.0,
    };
    let (x0, v) = (Vector4::new(-3.0, 15.0, 0.4, -0.1), 0.05);
    let mut ts = TrackState::new(x0, Matrix4::zeros())?;
    let mut exact_err = 0.0f64;
    for k in 1..=1000 {
        ts = kalman_predict_update(&ts, v, None, 0.0, &quiet)?;
        let t = k as f64 * v;
        exact_err = exact_err.max((ts.state[0] - (x0[0] + x0[2] * t)).abs());
        exact_err = exact_err.max((ts.state[1] - (x0[1] + x0[3] * t)).abs());
    }

    let noise = PolarNoise {
        sigma_range_m: 0.2,
        sigma_angle_rad: 0.01,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let gauss = |rng: &mut ChaCha8Rng| -> f64 { rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng) };
    let (mut se_f, mut se_o, mut n) = (0.0, 0.0, 0usize);
    for _ in 0..100 {
        let truth0 = Vector4::new(rng.random_range(-5.0..5.0), rng.random_range(10.0..20.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let p0 = Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 0.25, 0.25));
        let init = truth0 + Vector4::new(gauss(&mut rng), gauss(&mut rng), 0.5 * gauss(&mut rng), 0.5 * gauss(&mut rng));
        let mut filt = TrackState::new(init, p0)?;
        let mut open = TrackState::new(init, p0)?;
        for k in 1..=50 {
            let t = k as f64 * 0.1;
            let (tx, ty) = (truth0[0] + truth0[2] * t, truth0[1] + truth0[3] * t);
            let p = PolarPoint::from_cartesian(tx, ty)?;
            let z = PolarPoint::new(
                (p.range_m + noise.sigma_range_m * gauss(&mut rng)).max(0.1),
                (p.angle_rad + noise.sigma_angle_rad * gauss(&mut rng)).clamp(1e-3, PI - 1e-3),
            )?;
            filt = kalman_predict_update(&filt, 0.1, Some(&z), 1e-4, &noise)?;
            open = kalman_predict_update(&open, 0.1, None, 1e-4, &noise)?;
            se_f += (filt.state[0] - tx).powi(2) + (filt.state[1] - ty).powi(2);
            se_o += (open.state[0] - tx).powi(2) + (open.state[1] - ty).powi(2);
            n += 1;
        }
    }
    let (rf, ro) = ((se_f / n as f64).sqrt(), (se_o / n as f64).sqrt());
    Ok(outcome(
        exact_err < 1e-9 && rf < ro,
        format!("noise-free error {exact_err:.2e} m over 1000 steps, filtered RMSE {rf:.3} m vs open-loop {ro:.3} m"),
    ))
}

fn csv_bytes(r: &ExperimentResult) -> Result<Vec<(String, Vec<u8>)>> {
    r.tables.iter().map(|t| Ok((t.name.clone(), t.to_csv()?))).collect()
}

fn determinism() -> Result<Outcome> {
    let dir_a = tempfile::tempdir().map_err(|e| nfisac::Error::Io(e.to_string()))?;
    let dir_b = tempfile::tempdir().map_err(|e| nfisac::Error::Io(e.to_string()))?;
    let mut mismatched = Vec::new();
    for name in nfisac::sim::EXPERIMENTS {
        let a = run(name)?;
        let b = run(name)?;
        let pa = a.write(&dir_a.path().join(name))?;
        let pb = b.write(&dir_b.path().join(name))?;
        let same_files = pa.iter().zip(&pb).all(|(x, y)| std::fs::read(x).ok() == std::fs::read(y).ok());
        if !(same_files && pa.len() == pb.len() && csv_bytes(&a)? == csv_bytes(&b)?) {
            mismatched.push(name);
        }
    }
    Ok(outcome(
        mismatched.is_empty(),
        format!(
            "{} experiments re-run, mismatched: [{}]",
            nfisac::sim::EXPERIMENTS.len(),
            mismatched.join(", ")
        ),
    ))
}

type Check = fn() -> Result<Outcome>;

fn main() {
    let checks: [(&str, Check, u64); 12] = [
        ("far-field convergence", far_field_convergence, 1),
        ("squint reproduction", squint_reproduction, 120),
        ("far-field squint law", far_field_squint_law, 30),
        ("angular-range coupling", angular_range_coupling, 10),
        ("wavenumber pipeline", wavenumber_pipeline, 60),
        ("MUSIC baseline", music_baseline, 120),
        ("delay-phase fit", delay_phase_fit, 120),
        ("RMSE ordering and shape", rmse_ordering, 600),
        ("rate with sensing budget", rate_claim, 60),
        ("allocation oracle", allocation_oracle, 60),
        ("Kalman tracking", kalman_tracking, 30),
        ("determinism", determinism, 1800),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check, limit_s)) in checks.iter().enumerate() {
        let id = i + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*limit_s);
        let (pass, detail) = match result {
            Ok(o) => (o.pass && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {id:>2} {name}: {detail}; {:.2} s (limit {limit_s} s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
