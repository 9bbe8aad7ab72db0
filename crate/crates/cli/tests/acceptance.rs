//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! criterion fails. Library-level checks call `flowtwin` directly; the rest
//! drive the `flowtwin` binary and re-read its files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use flowtwin::analysis::{loglog_slope, spectral_flatness, stat_summary, welch_psd};
use flowtwin::balancing::{balance_power, balance_power_bisection};
use flowtwin::thermal::{GridSpec, MaterialSet, SensorGeometry, SourceMode, TemperatureField};
use flowtwin::units::ul_per_min;
use flowtwin::ThermalModel64;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn default_model() -> ThermalModel64 {
    ThermalModel64::new(SensorGeometry::default(), MaterialSet::default(), GridSpec::default()).unwrap()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn flowtwin(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_flowtwin"))
        .args(args)
        .output()
        .map_err(|e| format!("spawning flowtwin: {e}"))?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("flowtwin {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Rows of a CSV keyed by header name.
fn csv(path: &Path) -> Result<Vec<BTreeMap<String, f64>>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty csv")?.split(',').collect();
    Ok(lines
        .map(|l| {
            header
                .iter()
                .zip(l.split(','))
                .map(|(h, v)| (h.to_string(), v.parse().unwrap_or(f64::NAN)))
                .collect()
        })
        .collect())
}

fn column(rows: &[BTreeMap<String, f64>], name: &str) -> Vec<f64> {
    rows.iter().map(|r| r[name]).collect()
}

fn report_value(path: &Path, key: &str) -> Result<String, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    text.lines()
        .find_map(|l| l.split_once(" = ").filter(|(k, _)| *k == key).map(|(_, v)| v.to_string()))
        .ok_or_else(|| format!("{key} missing from {}", path.display()))
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

struct Ctx {
    root: tempfile::TempDir,
    model: ThermalModel64,
    /// Every physically sourced field solved by the library checks.
    solved: Vec<(String, TemperatureField<f64>)>,
}

impl Ctx {
    fn dir(&self, name: &str) -> PathBuf {
        self.root.path().join(name)
    }
}

fn superposition(ctx: &mut Ctx) -> Outcome {
    let (p1, p2) = (3e-5, 7e-5);
    let mut worst_sup: f64 = 0.0;
    let mut worst_bis: f64 = 0.0;
    for q in [0.0, 0.3, 1.2] {
        let op = ctx.model.operator(ul_per_min(q)).map_err(|e| e.to_string())?;
        let (up, down) = op.unit_fields().map_err(|e| e.to_string())?;
        let direct = op.solve(p1, p2, SourceMode::Physical).map_err(|e| e.to_string())?;
        let combined = up.combine(p1, &down, p2);
        let diff: Vec<f64> = direct.rise.iter().zip(&combined.rise).map(|(a, b)| a - b).collect();
        worst_sup = worst_sup.max(max_abs(&diff) / max_abs(&direct.rise));
        ctx.solved.push((format!("Q {q} direct"), direct));

        let a = balance_power(&ctx.model, ul_per_min(q), 1e-4).map_err(|e| e.to_string())?;
        let b = balance_power_bisection(&ctx.model, ul_per_min(q), 1e-4).map_err(|e| e.to_string())?;
        worst_bis = worst_bis.max(((a.p1 - b.p1) / a.p1).abs()).max(((a.p2 - b.p2) / a.p2).abs());
    }
    ensure!(worst_sup <= 1e-8, "superposition error {worst_sup:.2e} > 1e-8");
    ensure!(worst_bis <= 1e-6, "closed form vs bisection {worst_bis:.2e} > 1e-6");
    Ok(format!("superposition {worst_sup:.1e}, bisection {worst_bis:.1e}"))
}

fn energy(ctx: &mut Ctx) -> Outcome {
    for q in [0.0, 0.1, 0.3, 0.6, 1.0, 1.5] {
        let b = balance_power(&ctx.model, ul_per_min(q), 1e-4).map_err(|e| e.to_string())?;
        let f = ctx.model.solve_steady(ul_per_min(q), b.p1, b.p2).map_err(|e| e.to_string())?;
        ctx.solved.push((format!("Q {q} balanced"), f));
        let f = ctx.model.solve_steady(ul_per_min(q), 1e-4, 0.0).map_err(|e| e.to_string())?;
        ctx.solved.push((format!("Q {q} upstream only"), f));
    }
    let fine = ctx.model.refined(2).map_err(|e| e.to_string())?;
    for q in [0.0, 0.3] {
        let f = fine.solve_steady(ul_per_min(q), 5e-5, 5e-5).map_err(|e| e.to_string())?;
        ctx.solved.push((format!("Q {q} refined grid"), f));
    }
    let (name, worst) = ctx
        .solved
        .iter()
        .map(|(n, f)| (n, f.energy.relative_imbalance()))
        .fold((None, 0.0), |acc, (n, e)| if e >= acc.1 { (Some(n), e) } else { acc });
    ensure!(worst <= 1e-6, "imbalance {worst:.2e} at {}", name.unwrap());
    Ok(format!("{} solves, worst imbalance {worst:.1e}", ctx.solved.len()))
}

fn zero_flow(ctx: &mut Ctx) -> Outcome {
    let b = balance_power(&ctx.model, 0.0, 1e-4).map_err(|e| e.to_string())?;
    ensure!(b.ratio.abs() <= 1e-9, "ratio {:.2e} at Q = 0", b.ratio);
    let f = ctx.model.solve_steady(0.0, b.p1, b.p2).map_err(|e| e.to_string())?;
    let nz = f.mesh.n_axial();
    let mut worst: f64 = 0.0;
    for iz in 0..nz {
        for ir in 0..f.mesh.n_radial() {
            worst = worst.max((f.at(ir, iz) - f.at(ir, nz - 1 - iz)).abs());
        }
    }
    let rel = worst / f.max_rise();
    ensure!(rel <= 1e-8, "mirror asymmetry {rel:.2e}");
    Ok(format!("ratio {:.1e}, mirror {rel:.1e}", b.ratio))
}

fn calibration_shape(ctx: &mut Ctx) -> Outcome {
    let out = ctx.dir("calibrate");
    flowtwin(&["calibrate", "--pt", "0.1", "--out", p(&out)])?;
    let rows = csv(&out.join("calibration.csv"))?;
    let q = column(&rows, "Q_ul_per_min");
    let r = column(&rows, "ratio");
    ensure!(q.len() == 16 && (q[15] - 1.5).abs() < 1e-12, "unexpected flow grid {q:?}");
    ensure!(r.windows(2).all(|w| w[1] > w[0]), "ratio not monotone: {r:?}");

    let lin: Vec<(f64, f64)> = q.iter().zip(&r).filter(|(q, _)| **q > 0.0 && **q <= 0.5 + 1e-12).map(|(a, b)| (*a, *b)).collect();
    let s = lin.iter().map(|(q, r)| q * r).sum::<f64>() / lin.iter().map(|(q, _)| q * q).sum::<f64>();
    let reported: f64 = report_value(&out.join("sensitivity.txt"), "sensitivity_per_ul_per_min")?
        .parse()
        .map_err(|e| format!("sensitivity: {e}"))?;
    ensure!(((reported - s) / s).abs() < 1e-9, "reported S {reported} vs refit {s}");
    let dev = lin.iter().map(|(q, r)| ((r - s * q) / (s * q)).abs()).fold(0.0, f64::max);
    ensure!(dev <= 0.05, "linearity deviation {dev:.3} > 5%");

    let at = |x: f64| q.iter().position(|v| (v - x).abs() < 1e-9).ok_or(format!("Q {x} missing"));
    let slope = |x: f64| -> Result<f64, String> {
        let i = at(x)?;
        Ok((r[i + 1] - r[i - 1]) / (q[i + 1] - q[i - 1]))
    };
    let (s02, s10) = (slope(0.2)?, slope(1.0)?);
    ensure!(s10 < s02, "slope at 1.0 ({s10:.3}) not below slope at 0.2 ({s02:.3})");
    ensure!((0.89 / 3.0..=0.89 * 3.0).contains(&s), "S = {s:.3} outside [0.297, 2.67]");
    Ok(format!("S {s:.3}/(ul/min), linearity {:.1}%, slope 0.2 {s02:.3} vs 1.0 {s10:.3}", dev * 100.0))
}

fn saturation(ctx: &mut Ctx) -> Outcome {
    let out = ctx.dir("profile");
    flowtwin(&["profile", "--out", p(&out)])?;
    let rows = csv(&out.join("peaks.csv"))?;
    let peaks: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r["Q_ul_per_min"], r["down_peak_K"]))
        .filter(|(q, _)| *q >= 0.6 - 1e-9)
        .collect();
    ensure!(peaks.len() >= 10, "only {} flows at or above 0.6", peaks.len());
    for (i, a) in peaks.iter().enumerate() {
        for b in &peaks[i + 1..] {
            ensure!(b.1 <= 1.05 * a.1, "downstream peak rises from {:.4} K at {} to {:.4} K at {}", a.1, a.0, b.1, b.0);
        }
    }
    let (first, last) = (peaks[0], peaks[peaks.len() - 1]);
    Ok(format!("downstream peak {:.3} K at {} to {:.3} K at {}", first.1, first.0, last.1, last.0))
}

fn magnitude(ctx: &mut Ctx) -> Outcome {
    let out = ctx.dir("field");
    flowtwin(&["field", "--qt", "0.3", "--pt", "0.1", "--out", p(&out)])?;
    let summary = out.join("field-summary.txt");
    let rise: f64 = report_value(&summary, "max_rise_K")?.parse().map_err(|e| format!("max_rise_K: {e}"))?;
    let imbalance: f64 = report_value(&summary, "energy_imbalance")?.parse().map_err(|e| format!("energy_imbalance: {e}"))?;
    ensure!((0.5..=20.0).contains(&rise), "max rise {rise:.3} K outside [0.5, 20]");
    ensure!(imbalance <= 1e-6, "field run energy imbalance {imbalance:.2e}");
    Ok(format!("max rise {rise:.3} K"))
}

fn step_response(ctx: &mut Ctx) -> Outcome {
    let out = ctx.dir("step");
    flowtwin(&["step", "--out", p(&out)])?;
    let cal = ctx.dir("step-calibration");
    flowtwin(&["calibrate", "--qt", "0,0.3,0.6", "--out", p(&cal)])?;
    let cal_rows = csv(&cal.join("calibration.csv"))?;
    let full_scale = cal_rows.iter().map(|r| r["ratio"].abs()).fold(0.0, f64::max);
    let direct = |q: f64| cal_rows.iter().find(|r| (r["Q_ul_per_min"] - q).abs() < 1e-12).map(|r| r["ratio"]);

    let segments = csv(&out.join("step-segments.csv"))?;
    ensure!(segments.len() == 5, "{} segments", segments.len());
    let (mut worst_rel, mut worst_v): (f64, f64) = (0.0, 0.0);
    for s in &segments {
        let q = s["Q_ul_per_min"];
        let (v, band) = (s["mean_vtc_V"], s["band_3sigma_V"]);
        ensure!(v.abs() <= band, "segment at Q {q}: |mean Vtc| {:.2e} > band {band:.2e}", v.abs());
        worst_v = worst_v.max(v.abs() / band);
        let want = direct(q).ok_or(format!("no calibration point for Q {q}"))?;
        let settled = s["settled_ratio"];
        let err = if q == 0.0 {
            (settled - want).abs() / full_scale
        } else {
            ((settled - want) / want).abs()
        };
        ensure!(err <= 0.005, "segment at Q {q}: settled {settled:e} vs calibrated {want:e}");
        worst_rel = worst_rel.max(err);
    }
    Ok(format!("worst |Vtc|/band {worst_v:.2}, worst ratio error {:.1e}", worst_rel))
}

struct DriftSeries {
    r_mean: Vec<f64>,
    r_delta: Vec<f64>,
    vtc: Vec<f64>,
    dp: Vec<f64>,
}

fn drift_series(path: &Path) -> Result<DriftSeries, String> {
    let rows = csv(path)?;
    let (r1, r2) = (column(&rows, "R1_ohm"), column(&rows, "R2_ohm"));
    Ok(DriftSeries {
        r_mean: r1.iter().zip(&r2).map(|(a, b)| (a + b) / 2.0).collect(),
        r_delta: r1.iter().zip(&r2).map(|(a, b)| a - b).collect(),
        vtc: column(&rows, "Vtc_V"),
        dp: column(&rows, "dP_W"),
    })
}

fn drift(ctx: &mut Ctx) -> Outcome {
    let (fs, seg, overlap) = (0.24, 1024, 0.5);
    let psd = |x: &[f64]| welch_psd(x, fs, seg, overlap).map_err(|e| e.to_string());
    let mut slowest = Duration::ZERO;
    let mut lines = Vec::new();
    for seed in 1..=5 {
        let out = ctx.dir(&format!("drift-{seed}"));
        let t = Instant::now();
        flowtwin(&["drift", "--seed", &seed.to_string(), "--out", p(&out)])?;
        slowest = slowest.max(t.elapsed());
        let closed = drift_series(&out.join("timeseries.csv"))?;
        let open = drift_series(&out.join("timeseries_open_loop.csv"))?;
        ensure!(closed.dp.len() == 11232, "seed {seed}: {} samples", closed.dp.len());

        let r_mean = psd(&closed.r_mean)?;
        let (lo, hi) = (r_mean.lowest(), r_mean.highest());
        let sm = loglog_slope(&r_mean, lo, hi).map_err(|e| e.to_string())?;
        let sd = loglog_slope(&psd(&closed.r_delta)?, lo, hi).map_err(|e| e.to_string())?;
        let vtc = psd(&closed.vtc)?.band_mean(lo, 10.0 * lo).map_err(|e| e.to_string())?;
        let vtc_open = psd(&open.vtc)?.band_mean(lo, 10.0 * lo).map_err(|e| e.to_string())?;
        let suppression = 10.0 * (vtc_open / vtc).log10();
        let flat = spectral_flatness(&psd(&closed.dp)?, hi / 100.0, hi).map_err(|e| e.to_string())?;
        let dps = stat_summary(&closed.dp).map_err(|e| e.to_string())?;
        let vs = stat_summary(&closed.vtc).map_err(|e| e.to_string())?;

        ensure!((-1.3..=-0.7).contains(&sm), "seed {seed}: R_mean slope {sm:.3}");
        ensure!((-1.3..=-0.7).contains(&sd), "seed {seed}: R_delta slope {sd:.3}");
        ensure!(suppression >= 10.0, "seed {seed}: Vtc only {suppression:.1} dB below open loop");
        ensure!(flat >= 0.5, "seed {seed}: dP flatness {flat:.3}");
        for (name, s) in [("dP", &dps), ("Vtc", &vs)] {
            ensure!(s.skewness.abs() < 0.25, "seed {seed}: {name} skew {:.3}", s.skewness);
            ensure!(s.excess_kurtosis.abs() < 0.5, "seed {seed}: {name} kurtosis {:.3}", s.excess_kurtosis);
        }
        lines.push(format!("{sm:.2}/{sd:.2}/{suppression:.0}dB/{flat:.2}"));
    }
    ensure!(slowest < Duration::from_secs(120), "slowest seed took {slowest:.1?}");

    let out = ctx.dir("drift-asym");
    let cfg = ctx.dir("asym.txt");
    fs::write(&cfg, "[plant]\nasymmetry = 1e-3\n").map_err(|e| e.to_string())?;
    flowtwin(&["drift", "--config", p(&cfg), "--out", p(&out)])?;
    let dp = drift_series(&out.join("timeseries.csv"))?.dp;
    let s = stat_summary(&dp).map_err(|e| e.to_string())?;
    let band = 3.0 * s.std_dev / (s.len as f64).sqrt();
    ensure!(s.mean.abs() > band, "asymmetric dP offset {:.2e} inside 3 sigma band {band:.2e}", s.mean);
    Ok(format!(
        "slopes/suppression/flatness per seed {}; offset {:.1e} W vs band {band:.1e}; slowest seed {slowest:.1?}",
        lines.join(" "),
        s.mean
    ))
}

fn grid_convergence(ctx: &mut Ctx) -> Outcome {
    let q = ul_per_min(0.3);
    let fine = ctx.model.refined(2).map_err(|e| e.to_string())?;
    let a = balance_power(&ctx.model, q, 1e-4).map_err(|e| e.to_string())?.ratio;
    let b = balance_power(&fine, q, 1e-4).map_err(|e| e.to_string())?.ratio;
    let change = ((a - b) / b).abs();
    ensure!(change < 0.02, "ratio {a:e} vs refined {b:e}: {:.2}%", change * 100.0);
    Ok(format!("ratio {a:.5} vs {b:.5}, change {:.2}%", change * 100.0))
}

fn determinism(ctx: &mut Ctx) -> Outcome {
    let cfg = ctx.dir("asym.txt");
    let runs: [(&str, Vec<&str>); 6] = [
        ("calibrate", vec!["calibrate", "--pt", "0.1"]),
        ("field", vec!["field", "--qt", "0.3", "--pt", "0.1"]),
        ("profile", vec!["profile"]),
        ("step", vec!["step"]),
        ("drift-1", vec!["drift", "--seed", "1"]),
        ("drift-asym", vec!["drift", "--config", p(&cfg)]),
    ];
    let mut compared = 0;
    for (first, args) in runs {
        let again = ctx.dir(&format!("{first}-again"));
        let mut full = args.clone();
        full.extend(["--out", p(&again)]);
        flowtwin(&full)?;
        let (a, b) = (files(&ctx.dir(first)), files(&again));
        ensure!(a.len() == b.len(), "{first}: {} files vs {}", a.len(), b.len());
        for ((na, da), (nb, db)) in a.iter().zip(&b) {
            ensure!(na == nb && da == db, "{first}: {na} differs on rerun");
            compared += 1;
        }
    }
    Ok(format!("{compared} files byte-identical across reruns"))
}

fn main() {
    let mut ctx = Ctx {
        root: tempfile::tempdir().expect("temporary directory"),
        model: default_model(),
        solved: Vec::new(),
    };
    // Determinism reruns commands from earlier criteria, so order matters.
    let criteria: [(&str, fn(&mut Ctx) -> Outcome, Option<u64>); 10] = [
        ("superposition oracle", superposition, Some(30)),
        ("energy conservation", energy, None),
        ("zero-flow symmetry", zero_flow, None),
        ("calibration shape", calibration_shape, Some(120)),
        ("downstream saturation", saturation, None),
        ("temperature magnitude", magnitude, None),
        ("closed-loop steps", step_response, None),
        ("drift spectra", drift, None),
        ("grid convergence", grid_convergence, None),
        ("determinism", determinism, None),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let mut outcome = check(&mut ctx);
        let elapsed = t.elapsed();
        if let (Ok(msg), Some(s)) = (&outcome, limit) {
            if elapsed > Duration::from_secs(s) {
                outcome = Err(format!("{msg}; took {elapsed:.1?}, limit {s} s"));
            }
        }
        match outcome {
            Ok(msg) => println!("[PASS] {:>2} {name}: {msg} ({elapsed:.1?})", i + 1),
            Err(msg) => {
                failed += 1;
                println!("[FAIL] {:>2} {name}: {msg} ({elapsed:.1?})", i + 1);
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
