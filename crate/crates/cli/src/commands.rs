//! Subcommand bodies. Each writes a CSV (or, for `compare`, JSON) with
//! units in the header.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use vessel_dmc::analytic::CgfSeries;
use vessel_dmc::channel::Channel;
use vessel_dmc::eigenmodes::{RadialEigenproblem, Wall};
use vessel_dmc::ook::{analytic_ber, monte_carlo_ber, OokLink};
use vessel_dmc::pbs::{self, PbsConfig, Probe};
use vessel_dmc::quadrature::ball_integral;
use vessel_dmc::CylPoint;

use crate::config::{Resolved, ScenarioConfig};
use crate::points::{requests, PointRow};
use crate::CliError;

const UM: f64 = 1e-6;

fn csv_writer(out: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::Writer::from_writer(out)
}

fn cylinder(resolved: &Resolved, what: &str) -> Result<vessel_dmc::analytic::CylinderEnvironment, CliError> {
    resolved.environment.ok_or_else(|| {
        CliError::Validation(format!("{what} needs a cylinder; k_f_um_per_s = \"none\" selects free space"))
    })
}

#[derive(Serialize)]
struct EigenRow {
    n: usize,
    m: usize,
    lambda_per_m: f64,
    lambda_rho_c: f64,
    residual: f64,
    normalization_m2: f64,
}

/// Eigenvalues, scaled boundary residuals and normalisations for
/// `n = 0..=n_max`, `m = 1..=m_max`.
pub fn eigen(config: &ScenarioConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let resolved = config.resolve()?;
    let env = cylinder(&resolved, "eigen")?;
    let mut w = csv_writer(out);
    for n in 0..=resolved.truncation.n_max {
        let problem = RadialEigenproblem::new(env.diffusion, env.wall, env.radius, n)?;
        for mode in problem.modes(resolved.truncation.m_max)? {
            w.serialize(EigenRow {
                n,
                m: mode.index,
                lambda_per_m: mode.lambda,
                lambda_rho_c: mode.lambda * env.radius,
                residual: problem.residual(mode.lambda),
                normalization_m2: mode.normalization,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct CgfRow {
    t_s: f64,
    rho_um: f64,
    z_um: f64,
    phi_rad: f64,
    c_analytic_per_m3: f64,
    c_unbounded_per_m3: f64,
}

/// Analytic CGF and the free-space reference at every requested point and
/// time.
pub fn cgf(config: &ScenarioConfig, points: &[PointRow], out: &mut dyn Write) -> Result<(), CliError> {
    let resolved = config.resolve()?;
    let series = resolved.series()?;
    let free = resolved.free_space();
    let reqs = requests(points, config.times.as_ref().map(|t| t.t_s.as_slice()))?;
    let rows: Vec<CgfRow> = reqs
        .par_iter()
        .map(|(row, t)| {
            let p = row.point();
            CgfRow {
                t_s: *t,
                rho_um: row.rho_um,
                z_um: row.z_um,
                phi_rad: row.phi_rad,
                c_analytic_per_m3: resolved.concentration(series.as_ref(), &p, *t),
                c_unbounded_per_m3: vessel_dmc::analytic::unbounded_cgf(
                    &p,
                    *t,
                    &free.source,
                    resolved.release_time,
                    free.diffusion,
                    free.degradation,
                    free.velocity,
                ),
            }
        })
        .collect();
    let mut w = csv_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Distinct points in request order, and for every request the index of its
/// point.
fn distinct_points(reqs: &[(PointRow, f64)]) -> (Vec<PointRow>, Vec<usize>) {
    let mut unique: Vec<PointRow> = Vec::new();
    let mut index = Vec::with_capacity(reqs.len());
    for (row, _) in reqs {
        let key = (row.rho_um, row.z_um, row.phi_rad);
        match unique.iter().position(|u| (u.rho_um, u.z_um, u.phi_rad) == key) {
            Some(i) => index.push(i),
            None => {
                index.push(unique.len());
                unique.push(PointRow { t_s: None, ..*row });
            }
        }
    }
    (unique, index)
}

fn distinct_times(reqs: &[(PointRow, f64)]) -> Vec<f64> {
    let mut times: Vec<f64> = reqs.iter().map(|r| r.1).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

/// Simulator output for the requested `(point, t)` pairs.
pub struct PbsOutcome {
    pub points: Vec<PointRow>,
    pub series: pbs::EstimateSeries,
    pub times: Vec<f64>,
    /// `(point index, time index)` per request.
    pub requests: Vec<(usize, usize)>,
    pub probe_radius: f64,
}

pub fn simulate(config: &ScenarioConfig, points: &[PointRow]) -> Result<PbsOutcome, CliError> {
    let resolved = config.resolve()?;
    let env = cylinder(&resolved, "pbs")?;
    let reqs = requests(points, config.times.as_ref().map(|t| t.t_s.as_slice()))?;
    let (unique, index) = distinct_points(&reqs);
    let times = distinct_times(&reqs);
    let probe_radius = config.pbs.probe_radius_um * UM;
    let probes = unique
        .iter()
        .map(|p| Probe::Sphere {
            center: p.point(),
            radius: probe_radius,
        })
        .collect();
    let s = &config.pbs;
    let pbs_config = PbsConfig::new(s.time_step_s, s.particles, s.horizon_s, s.seed)
        .with_flow(resolved.flow)
        .with_probes(probes)
        .with_sample_times(times.clone());
    let series = pbs::run(&pbs_config, &env, resolved.source, resolved.release_time)?;
    let requests = reqs
        .iter()
        .zip(index)
        .map(|((_, t), i)| (i, times.iter().position(|x| x == t).expect("time was collected")))
        .collect();
    Ok(PbsOutcome {
        points: unique,
        series,
        times,
        requests,
        probe_radius,
    })
}

#[derive(Serialize)]
struct PbsRow {
    probe: usize,
    t_s: f64,
    rho_um: f64,
    z_um: f64,
    phi_rad: f64,
    count: u64,
    estimate_per_m3: f64,
    stderr_per_m3: f64,
}

/// Particle-based estimates at every requested point and time; each point
/// is the centre of a spherical probe of `pbs.probe_radius_um`.
pub fn pbs(config: &ScenarioConfig, points: &[PointRow], out: &mut dyn Write) -> Result<(), CliError> {
    let outcome = simulate(config, points)?;
    let n_probes = outcome.points.len();
    let mut w = csv_writer(out);
    for &(probe, sample) in &outcome.requests {
        let r = outcome.series.rows[sample * n_probes + probe];
        let p = &outcome.points[probe];
        w.serialize(PbsRow {
            probe,
            t_s: r.t,
            rho_um: p.rho_um,
            z_um: p.z_um,
            phi_rad: p.phi_rad,
            count: r.count,
            estimate_per_m3: r.estimate,
            stderr_per_m3: r.stderr,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct BerRow {
    slot_s: f64,
    memory_slots: usize,
    sampling_time_s: f64,
    ber_analytic: f64,
    ber_mc: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    mc_errors: Option<u64>,
    mc_bits: Option<u64>,
}

/// Analytic and Monte Carlo BER for every slot duration in `link.slots_s`.
pub fn ber(config: &ScenarioConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let resolved = config.resolve()?;
    let channel = resolved.channel()?;
    let link = &config.link;
    if link.slots_s.is_empty() {
        return Err(CliError::Validation("link.slots_s is empty".into()));
    }
    let (t_s, _) = channel.sampling_time(link.search_horizon_s, link.grid_step_s)?;
    log::info!("sampling time {t_s:.6} s");
    let mut w = csv_writer(out);
    for &slot in &link.slots_s {
        let profile = channel.isi_profile(resolved.molecules, slot, t_s, link.memory_cutoff, link.memory_cap)?;
        let ook = OokLink::new(resolved.molecules, &profile)?;
        let analytic = analytic_ber(&ook)?;
        let mc = if link.bits > 0 {
            Some(monte_carlo_ber(&ook, link.bits, link.seed, link.detector.into())?)
        } else {
            None
        };
        w.serialize(BerRow {
            slot_s: slot,
            memory_slots: profile.memory(),
            sampling_time_s: t_s,
            ber_analytic: analytic,
            ber_mc: mc.map(|m| m.rate),
            ci_low: mc.map(|m| m.ci.0),
            ci_high: mc.map(|m| m.ci.1),
            mc_errors: mc.map(|m| m.errors),
            mc_bits: mc.map(|m| m.bits),
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ChannelRow {
    t_s: f64,
    p_obs: f64,
    y_mean: f64,
    isi_mean_all_ones: f64,
}

/// Observation probability, mean received count and the ISI mean of an
/// all-ones history with slot `link.slots_s[0]`, on the link grid.
pub fn channel_table(config: &ScenarioConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let resolved = config.resolve()?;
    let channel = resolved.channel()?;
    let link = &config.link;
    let slot = *link
        .slots_s
        .first()
        .ok_or_else(|| CliError::Validation("link.slots_s is empty".into()))?;
    let pdf = channel.observation_pdf(link.search_horizon_s, link.grid_step_s)?;
    let n = resolved.molecules;
    let memory = channel.choose_memory(n, slot, pdf.t_s, link.memory_cutoff, link.memory_cap)?;
    let rows = pdf
        .times
        .par_iter()
        .zip(&pdf.values)
        .map(|(&t, &p)| {
            let isi = (1..=memory)
                .map(|i| channel.p_obs(i as f64 * slot + t).map(|q| n * q))
                .sum::<Result<f64, _>>()?;
            Ok(ChannelRow {
                t_s: t,
                p_obs: p,
                y_mean: n * p,
                isi_mean_all_ones: isi,
            })
        })
        .collect::<Result<Vec<_>, vessel_dmc::Error>>()?;
    let mut w = csv_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeComparison {
    pub probe: usize,
    pub rho_um: f64,
    pub z_um: f64,
    pub phi_rad: f64,
    pub peak_time_s: f64,
    pub analytic_peak_per_m3: f64,
    pub pbs_at_peak_per_m3: f64,
    pub peak_relative_error: f64,
    pub max_abs_z: f64,
    pub samples: usize,
    pub samples_within_sigma: usize,
    /// Reflective-wall CGF >= free-space CGF at and after the peak.
    pub reflective_above_unbounded: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareSummary {
    pub peak_tolerance: f64,
    pub sigma: f64,
    pub probes: Vec<ProbeComparison>,
    pub pass: bool,
}

/// Analytic model of `analytic_side` against the simulator run with
/// `pbs_side`. Analytic values are averaged over each probe ball; the
/// pointwise band uses the binomial standard error the analytic value
/// predicts.
pub fn compare_models(
    analytic_side: &ScenarioConfig,
    pbs_side: &ScenarioConfig,
    points: &[PointRow],
) -> Result<CompareSummary, CliError> {
    let analytic = analytic_side.resolve()?;
    let series = analytic.series()?;
    let reflective: Option<CgfSeries> = match analytic.analytic_environment() {
        Some(env) => Some(CgfSeries::new(
            env.with_wall(Wall::REFLECTIVE),
            analytic.source,
            analytic.release_time,
            analytic.truncation,
        )?),
        None => None,
    };
    let free = analytic.free_space();
    let outcome = simulate(pbs_side, points)?;
    let n = outcome.series.n_particles as f64;
    let n_probes = outcome.points.len();
    let tolerance = pbs_side.compare.peak_tolerance;
    let sigma = pbs_side.compare.sigma;

    let mut probes = Vec::with_capacity(n_probes);
    for (j, point) in outcome.points.iter().enumerate() {
        let center = point.point();
        let volume = outcome.series.volumes[j];
        let mut rows = Vec::new();
        for (s, &t) in outcome.times.iter().enumerate() {
            if !outcome.requests.contains(&(j, s)) {
                continue;
            }
            let avg = ball_integral(
                |x| analytic.concentration(series.as_ref(), &CylPoint::from_cartesian(x), t),
                center.to_cartesian(),
                outcome.probe_radius,
                1e-6,
            )? / volume;
            rows.push((t, avg, outcome.series.rows[s * n_probes + j]));
        }
        let (k_peak, _) = rows
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .expect("every probe has a sample");
        let (t_peak, c_peak, r_peak) = rows[k_peak];
        let peak_relative_error = (r_peak.estimate - c_peak).abs() / c_peak;
        let mut within = 0;
        let mut max_abs_z: f64 = 0.0;
        for &(_, c, r) in &rows {
            let p = (c * volume).clamp(0.0, 1.0);
            let se = (p * (1.0 - p) / n).sqrt() / volume;
            let z = if se > 0.0 { (r.estimate - c).abs() / se } else if r.count == 0 { 0.0 } else { f64::INFINITY };
            max_abs_z = max_abs_z.max(z);
            if z <= sigma {
                within += 1;
            }
        }
        let ordering = rows.iter().filter(|row| row.0 >= t_peak).all(|&(t, _, _)| {
            let unbounded = vessel_dmc::analytic::unbounded_cgf(
                &center,
                t,
                &free.source,
                analytic.release_time,
                free.diffusion,
                free.degradation,
                free.velocity,
            );
            match &reflective {
                Some(s) => s.cgf(&center, t) >= unbounded,
                None => true,
            }
        });
        let pass = peak_relative_error <= tolerance && within == rows.len();
        probes.push(ProbeComparison {
            probe: j,
            rho_um: point.rho_um,
            z_um: point.z_um,
            phi_rad: point.phi_rad,
            peak_time_s: t_peak,
            analytic_peak_per_m3: c_peak,
            pbs_at_peak_per_m3: r_peak.estimate,
            peak_relative_error,
            max_abs_z,
            samples: rows.len(),
            samples_within_sigma: within,
            reflective_above_unbounded: ordering,
            pass,
        });
    }
    let pass = probes.iter().all(|p| p.pass);
    Ok(CompareSummary {
        peak_tolerance: tolerance,
        sigma,
        probes,
        pass,
    })
}

/// `compare` with one config for both sides; writes the JSON summary.
pub fn compare(config: &ScenarioConfig, points: &[PointRow], out: &mut dyn Write) -> Result<(), CliError> {
    let summary = compare_models(config, config, points)?;
    serde_json::to_writer_pretty(&mut *out, &summary)
        .map_err(|e| CliError::Validation(format!("json: {e}")))?;
    writeln!(out)?;
    Ok(())
}

/// Builds a channel from a config, for callers outside the subcommands.
pub fn channel(config: &ScenarioConfig) -> Result<Channel, CliError> {
    config.resolve()?.channel()
}

/// Times used by `compare` when neither the points nor the config carry any.
pub const DEFAULT_COMPARE_TIMES: [f64; 12] =
    [0.005, 0.01, 0.02, 0.03, 0.04, 0.05, 0.07, 0.1, 0.13, 0.17, 0.22, 0.28];

/// The receiver's radius and height at azimuths 0, pi/2 and pi.
pub fn default_compare_points(config: &ScenarioConfig) -> Vec<PointRow> {
    let rx = &config.receiver;
    let with_times = config.times.is_some();
    [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI]
        .into_iter()
        .flat_map(|phi| {
            let base = PointRow {
                rho_um: rx.rho_um,
                z_um: rx.z_um,
                phi_rad: phi,
                t_s: None,
            };
            let times: Vec<Option<f64>> = if with_times {
                vec![None]
            } else {
                DEFAULT_COMPARE_TIMES.iter().map(|&t| Some(t + config.transmitter.release_time_s)).collect()
            };
            times.into_iter().map(move |t_s| PointRow { t_s, ..base })
        })
        .collect()
}
