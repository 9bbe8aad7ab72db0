use std::fmt::Write as _;
use std::fs;
use std::io::Write;

use anyhow::{anyhow, bail, Context, Result};
use flowtwin::analysis::{
    loglog_slope, spectral_flatness, stat_summary, welch_psd, write_spectrum_csv, write_summary, Spectrum,
};
use flowtwin::balancing::{balance_power, calibration_curve, fit_sensitivity, write_curve_csv, PointFlag};
use flowtwin::control::{open_loop_run, run_closed_loop, FlowSchedule, LoopSettings, TimeSeries};
use flowtwin::plant::{balanced_dp, influence_table, loop_gain};
use flowtwin::thermal::{
    axial_profile, heater_peak_rise, write_field_csv, write_profile_csv, Heater, ThermalModel,
};
use flowtwin::units::ul_per_min;
use flowtwin::ThermalModel64;
use rayon::prelude::*;

use crate::output::Outputs;
use crate::settings::RunConfig;

pub const RESOLVED_CONFIG: &str = "resolved-config.txt";
const SCHEDULE_COPY: &str = "schedule.csv";

/// Dwell per flow when a step schedule is built from a flow list, and the
/// hold after the last step of a schedule file when no duration is set.
const STEP_DWELL_S: f64 = 500.0;

const FIG8_FLOWS: [f64; 16] = [
    0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5,
];
const STEP_FLOWS: [f64; 5] = [0.0, 0.3, 0.6, 0.3, 0.0];
const DRIFT_SAMPLES: f64 = 11232.0;

fn model(cfg: &RunConfig) -> Result<ThermalModel64> {
    let m = &cfg.model;
    Ok(ThermalModel::new(m.geometry.clone(), m.materials.clone(), m.grid.clone())?
        .with_profile(m.velocity_profile))
}

fn flow_list(cfg: &mut RunConfig, default: &[f64]) -> Result<Vec<f64>> {
    let flows = cfg
        .experiment
        .flows_ul_per_min
        .get_or_insert_with(|| default.to_vec())
        .clone();
    if flows.is_empty() {
        bail!("empty Q list: give at least one flow in flows_ul_per_min or --qt");
    }
    if flows.windows(2).any(|w| !(w[1] > w[0])) {
        bail!("Q list must be strictly increasing");
    }
    Ok(flows)
}

fn single_flow(cfg: &mut RunConfig, default: f64) -> Result<f64> {
    let flows = cfg.experiment.flows_ul_per_min.get_or_insert_with(|| vec![default]);
    match flows.as_slice() {
        [q] => Ok(*q),
        other => bail!("this command takes a single flow, got {} values", other.len()),
    }
}

fn total_power(cfg: &mut RunConfig, default: f64) -> f64 {
    *cfg.experiment.total_power.get_or_insert(default)
}

fn add_resolved(out: &mut Outputs, cfg: &RunConfig, schedule: Option<&str>) {
    out.add(RESOLVED_CONFIG, cfg.resolved_text(schedule).into_bytes());
}

/// Calibration curve and sensitivity report.
pub fn calibrate(mut cfg: RunConfig) -> Result<Outputs> {
    let flows = flow_list(&mut cfg, &FIG8_FLOWS)?;
    let pt = total_power(&mut cfg, 1e-4);
    let range = cfg.experiment.linear_range_ul_per_min;
    let model = model(&cfg)?;
    let si: Vec<f64> = flows.iter().map(|&q| ul_per_min(q)).collect();
    let curve = calibration_curve(&model, &si, pt)?;

    let mut report = String::new();
    writeln!(report, "total_power_W = {pt:e}")?;
    writeln!(report, "points = {}", curve.points.len())?;
    let bad = curve.points.iter().filter(|p| p.flag == PointFlag::Unbalanceable).count();
    writeln!(report, "unbalanceable_points = {bad}")?;
    writeln!(report, "monotone = {}", curve.is_monotone())?;
    writeln!(report, "linear_range_ul_per_min = {range}")?;
    match fit_sensitivity(&curve, ul_per_min(range)) {
        Ok(fit) => {
            writeln!(report, "sensitivity_per_ul_per_min = {:e}", fit.slope)?;
            writeln!(report, "fit_points = {}", fit.points)?;
            writeln!(report, "fit_residual_norm = {:e}", fit.residual_norm)?;
            let worst = flows
                .iter()
                .zip(&curve.points)
                .filter(|(&q, p)| q > 0.0 && q <= range && p.flag == PointFlag::Ok)
                .map(|(&q, p)| ((p.result.ratio - fit.slope * q) / (fit.slope * q)).abs())
                .fold(0.0, f64::max);
            writeln!(report, "max_relative_deviation = {worst:e}")?;
        }
        Err(e) => {
            writeln!(report, "sensitivity_per_ul_per_min = undefined")?;
            writeln!(report, "sensitivity_note = {e}")?;
        }
    }

    let mut out = Outputs::default();
    out.with("calibration.csv", |w| write_curve_csv(&curve, w))?;
    out.add("sensitivity.txt", report.into_bytes());
    add_resolved(&mut out, &cfg, None);
    Ok(out)
}

/// Balanced temperature field at one flow.
pub fn field(mut cfg: RunConfig) -> Result<Outputs> {
    let q = single_flow(&mut cfg, 0.3)?;
    let pt = total_power(&mut cfg, 1e-4);
    let model = model(&cfg)?;
    let bal = balance_power(&model, ul_per_min(q), pt)?;
    let f = model.solve_steady(ul_per_min(q), bal.p1, bal.p2)?;

    let mut summary = String::new();
    writeln!(summary, "Q_ul_per_min = {q}")?;
    writeln!(summary, "total_power_W = {pt:e}")?;
    writeln!(summary, "P1_W = {:e}", bal.p1)?;
    writeln!(summary, "P2_W = {:e}", bal.p2)?;
    writeln!(summary, "ratio = {:e}", bal.ratio)?;
    writeln!(summary, "max_rise_K = {:e}", f.max_rise())?;
    writeln!(summary, "min_rise_K = {:e}", f.min_rise())?;
    writeln!(summary, "energy_imbalance = {:e}", f.energy.relative_imbalance())?;
    writeln!(summary, "solver_residual = {:e}", f.residual)?;

    let mut out = Outputs::default();
    out.with("field.csv", |w| write_field_csv(&f, w))?;
    out.with("profile.csv", |w| write_profile_csv(&axial_profile(&f), w))?;
    out.add("field-summary.txt", summary.into_bytes());
    add_resolved(&mut out, &cfg, None);
    Ok(out)
}

/// Stacked wall-surface profiles at balanced powers, one per flow.
pub fn profile(mut cfg: RunConfig) -> Result<Outputs> {
    let flows = flow_list(&mut cfg, &FIG8_FLOWS)?;
    let pt = total_power(&mut cfg, 1e-4);
    let model = model(&cfg)?;
    let solved = flows
        .par_iter()
        .map(|&q| -> Result<_> {
            let bal = balance_power(&model, ul_per_min(q), pt)?;
            let f = model
                .solve_steady(ul_per_min(q), bal.p1, bal.p2)
                .with_context(|| format!("solving Q = {q} ul/min"))?;
            Ok((q, bal, f))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut stacked = String::from("Q,z_m,temp_rise_K\n");
    let mut peaks = String::from("Q_ul_per_min,ratio,P1_W,P2_W,up_peak_K,down_peak_K,max_rise_K\n");
    for (q, bal, f) in &solved {
        for (z, t) in axial_profile(f) {
            writeln!(stacked, "{q},{z:e},{t:e}")?;
        }
        writeln!(
            peaks,
            "{q},{:e},{:e},{:e},{:e},{:e},{:e}",
            bal.ratio,
            bal.p1,
            bal.p2,
            heater_peak_rise(f, Heater::Up),
            heater_peak_rise(f, Heater::Down),
            f.max_rise()
        )?;
    }
    let mut out = Outputs::default();
    out.add("profiles.csv", stacked.into_bytes());
    out.add("peaks.csv", peaks.into_bytes());
    add_resolved(&mut out, &cfg, None);
    Ok(out)
}

/// Schedule text in `t_s,Q_ul_per_min` form: the schedule file verbatim, or
/// equal dwells over the flow list.
fn schedule_text(cfg: &mut RunConfig) -> Result<String> {
    if let Some(path) = &cfg.experiment.schedule {
        return fs::read_to_string(path).with_context(|| format!("reading schedule {}", path.display()));
    }
    let flows = cfg
        .experiment
        .flows_ul_per_min
        .get_or_insert_with(|| STEP_FLOWS.to_vec())
        .clone();
    if flows.is_empty() {
        bail!("empty Q list: give a schedule file or at least one flow");
    }
    let dwell = match cfg.experiment.duration {
        Some(d) => d / flows.len() as f64,
        None => STEP_DWELL_S,
    };
    let mut s = String::from("t_s,Q_ul_per_min\n");
    for (i, q) in flows.iter().enumerate() {
        writeln!(s, "{},{q}", i as f64 * dwell)?;
    }
    Ok(s)
}

fn loop_settings(cfg: &RunConfig, pt: f64, duration: f64) -> LoopSettings<f64> {
    LoopSettings {
        total_power: pt,
        sample_rate: cfg.experiment.sample_rate,
        duration,
        polarity: cfg.model.controller.polarity,
    }
}

/// Closed-loop response to a flow schedule.
pub fn step(mut cfg: RunConfig) -> Result<Outputs> {
    let text = schedule_text(&mut cfg)?;
    let schedule = FlowSchedule::<f64>::parse_csv(&text).context("in flow schedule")?;
    let last = schedule.steps().last().map_or(0.0, |s| s.0);
    let duration = *cfg.experiment.duration.get_or_insert(last + STEP_DWELL_S);
    let pt = total_power(&mut cfg, 1e-4);
    let settings = loop_settings(&cfg, pt, duration);
    let model = model(&cfg)?;
    let flows = schedule.flows();
    let table = influence_table(&model, &flows)?;
    let params = cfg.model.plant.clone();
    let q0 = schedule.flow_at(0.0);
    let gain = loop_gain(&params, &table, q0)?;
    let mut controller = cfg.model.controller.build(gain, settings.dt(), pt);
    let ts = run_closed_loop(params, table, &mut controller, &schedule, &settings, cfg.experiment.seed)?;

    let segments = segment_report(&cfg, &model, &schedule, &ts, pt)?;
    let mut out = Outputs::default();
    out.with("timeseries.csv", |w| ts.write_csv(w))?;
    out.add("step-segments.csv", segments.into_bytes());
    out.add(SCHEDULE_COPY, text.into_bytes());
    cfg.experiment.schedule = None;
    add_resolved(&mut out, &cfg, Some(SCHEDULE_COPY));
    Ok(out)
}

/// Per constant-flow segment: mean `V_TC` over the last tenth against the
/// `3σ_v/√N` band, and the settled ratio against the direct balance.
fn segment_report(
    cfg: &RunConfig,
    model: &ThermalModel64,
    schedule: &FlowSchedule<f64>,
    ts: &TimeSeries<f64>,
    pt: f64,
) -> Result<String> {
    let sigma = cfg.model.plant.thermopile.voltmeter_noise;
    let steps = schedule.steps();
    let end = ts.records.last().map_or(0.0, |r| r.t) + 1.0 / ts.sample_rate;
    let mut s = String::from(
        "segment,t_start_s,t_end_s,Q_ul_per_min,tail_samples,mean_vtc_V,band_3sigma_V,settled_ratio,direct_ratio,ratio_abs_error,ratio_rel_error\n",
    );
    for (i, &(t0, q)) in steps.iter().enumerate() {
        let t1 = steps.get(i + 1).map_or(end, |s| s.0).min(end);
        let seg: Vec<_> = ts.records.iter().filter(|r| r.t >= t0 && r.t < t1).collect();
        if seg.is_empty() {
            continue;
        }
        let tail = &seg[seg.len() - (seg.len() / 10).max(1)..];
        let n = tail.len() as f64;
        let mean_v = tail.iter().map(|r| r.v_tc).sum::<f64>() / n;
        let ratio = tail.iter().map(|r| r.ratio).sum::<f64>() / n;
        let direct = balance_power(model, q, pt)?.ratio;
        // A relative error means nothing where the direct ratio is round-off.
        let rel = if direct.abs() > 1e-9 { (ratio - direct) / direct } else { f64::NAN };
        writeln!(
            s,
            "{i},{t0:e},{t1:e},{},{},{mean_v:e},{:e},{ratio:e},{direct:e},{:e},{rel:e}",
            flowtwin::units::to_ul_per_min(q),
            tail.len(),
            3.0 * sigma / n.sqrt(),
            ratio - direct,
        )?;
    }
    Ok(s)
}

fn spectrum(name: &str, x: &[f64], cfg: &RunConfig) -> Result<Spectrum<f64>> {
    let e = &cfg.experiment;
    welch_psd(x, e.sample_rate, e.segment_length, e.overlap).map_err(|err| anyhow!("spectrum of {name}: {err}"))
}

/// Long closed-loop run with its open-loop baseline, spectra and statistics.
pub fn drift(mut cfg: RunConfig) -> Result<Outputs> {
    let q = ul_per_min(single_flow(&mut cfg, 0.0)?);
    let pt = total_power(&mut cfg, 1e-3);
    let fs = cfg.experiment.sample_rate;
    let duration = *cfg.experiment.duration.get_or_insert(DRIFT_SAMPLES / fs);
    let settings = loop_settings(&cfg, pt, duration);
    let model = model(&cfg)?;
    let table = influence_table(&model, &[q])?;
    let params = cfg.model.plant.clone();
    let schedule = FlowSchedule::constant(q);
    let seed = cfg.experiment.seed;
    let gain = loop_gain(&params, &table, q)?;
    let dp0 = balanced_dp(&params, &table, q, pt)?;
    let mut controller = cfg.model.controller.build(gain, settings.dt(), pt);
    let (closed, open) = rayon::join(
        || run_closed_loop(params.clone(), table.clone(), &mut controller, &schedule, &settings, seed),
        || open_loop_run(params.clone(), table.clone(), dp0, &schedule, &settings, seed),
    );
    let (closed, open) = (closed?, open?);

    let r_mean = spectrum("R_mean", &closed.r_mean(), &cfg)?;
    let r_delta = spectrum("R_delta", &closed.r_delta(), &cfg)?;
    let vtc = spectrum("Vtc", &closed.v_tc(), &cfg)?;
    let dp = spectrum("dP", &closed.dp(), &cfg)?;
    let vtc_open = spectrum("open-loop Vtc", &open.v_tc(), &cfg)?;
    let dp_stats = stat_summary(&closed.dp()).map_err(|e| anyhow!("statistics of dP: {e}"))?;
    let vtc_stats = stat_summary(&closed.v_tc()).map_err(|e| anyhow!("statistics of Vtc: {e}"))?;

    let (lo, hi) = (r_mean.lowest(), r_mean.highest());
    let slope = |s: &Spectrum<f64>| loglog_slope(s, lo, hi).ok();
    let flatness = spectral_flatness(&dp, hi / 100.0, hi)?;
    let suppression = 10.0 * (vtc.band_mean(lo, 10.0 * lo)? / vtc_open.band_mean(lo, 10.0 * lo)?).log10();
    let offset_band = 3.0 * dp_stats.std_dev / (dp_stats.len as f64).sqrt();

    let mut report = Vec::new();
    let w = &mut report;
    writeln!(w, "samples = {}", closed.len())?;
    writeln!(w, "sample_rate_hz = {fs:e}")?;
    writeln!(w, "total_power_W = {pt:e}")?;
    writeln!(w, "seed = {seed}")?;
    writeln!(w, "r_mean_slope = {:e}", slope(&r_mean).unwrap_or(f64::NAN))?;
    writeln!(w, "r_delta_slope = {:e}", slope(&r_delta).unwrap_or(f64::NAN))?;
    writeln!(w, "vtc_slope = {:e}", slope(&vtc).unwrap_or(f64::NAN))?;
    writeln!(w, "dp_slope = {:e}", slope(&dp).unwrap_or(f64::NAN))?;
    writeln!(w, "dp_flatness_upper_two_decades = {flatness:e}")?;
    writeln!(w, "vtc_lowest_decade_vs_open_loop_dB = {suppression:e}")?;
    writeln!(w, "dp_offset_3sigma_band_W = {offset_band:e}")?;
    writeln!(w, "dp_offset_detected = {}", dp_stats.mean.abs() > offset_band)?;
    writeln!(w)?;
    write_summary(&mut *w, "dP", &dp, slope(&dp), &dp_stats)?;
    writeln!(w)?;
    write_summary(&mut *w, "Vtc", &vtc, slope(&vtc), &vtc_stats)?;

    let mut out = Outputs::default();
    out.with("timeseries.csv", |w| closed.write_csv(w))?;
    out.with("timeseries_open_loop.csv", |w| open.write_csv(w))?;
    out.with("spectrum_r_mean.csv", |w| write_spectrum_csv(&r_mean, w))?;
    out.with("spectrum_r_delta.csv", |w| write_spectrum_csv(&r_delta, w))?;
    out.with("spectrum_vtc.csv", |w| write_spectrum_csv(&vtc, w))?;
    out.with("spectrum_dp.csv", |w| write_spectrum_csv(&dp, w))?;
    out.with("spectrum_vtc_open_loop.csv", |w| write_spectrum_csv(&vtc_open, w))?;
    out.add("drift-report.txt", report);
    add_resolved(&mut out, &cfg, None);
    Ok(out)
}
