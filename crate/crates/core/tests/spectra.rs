use flowtwin::analysis::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Random walk of white noise: spectrum falls as 1/f² away from DC.
fn brown(n: usize, seed: u64) -> Vec<f64> {
    let mut acc = 0.0;
    noise(n, seed)
        .into_iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn normalized_spectrum_integrates_to_one(seed in any::<u64>(), fs in 0.01f64..100.0, k in 3usize..8) {
        let s = welch_psd(&noise(4096, seed), fs, 1 << k, 0.5).unwrap();
        prop_assert!((s.normalized_integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalization_ignores_amplitude_and_offset(seed in any::<u64>(), a in 1e-9f64..1e3, b in -1e3f64..1e3) {
        let x = noise(2048, seed);
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let sx = welch_psd(&x, 1.0, 256, 0.5).unwrap();
        let sy = welch_psd(&y, 1.0, 256, 0.5).unwrap();
        for (p, q) in sx.normalized.iter().zip(&sy.normalized) {
            prop_assert!((p - q).abs() <= 1e-6 * p.abs().max(1e-300) + 1e-9);
        }
    }
}

#[test]
fn absolute_psd_integrates_to_variance() {
    let x: Vec<f64> = noise(1 << 16, 2).iter().map(|v| 3.0 * v).collect();
    let s = welch_psd(&x, 10.0, 1024, 0.5).unwrap();
    let area: f64 = s.psd.iter().sum::<f64>() * s.resolution();
    assert!((area / 9.0 - 1.0).abs() < 0.03, "area {area}");
}

#[test]
fn random_walk_has_inverse_square_slope() {
    let s = welch_psd(&brown(1 << 15, 9), 1.0, 1024, 0.5).unwrap();
    let slope = loglog_slope(&s, 0.01, 0.2).unwrap();
    assert!((slope + 2.0).abs() < 0.2, "slope {slope}");
}

#[test]
fn white_noise_has_flat_spectrum() {
    let s = welch_psd(&noise(11232, 4), 0.24, 1024, 0.5).unwrap();
    let slope = loglog_slope(&s, s.lowest(), s.highest()).unwrap();
    assert!(slope.abs() < 0.15);
    assert!(spectral_flatness(&s, s.highest() / 100.0, s.highest()).unwrap() > 0.8);
}

#[test]
fn summary_report_lists_moments() {
    let x = noise(4096, 1);
    let s = welch_psd(&x, 1.0, 256, 0.5).unwrap();
    let st = stat_summary(&x).unwrap();
    let mut out = Vec::new();
    write_summary(&mut out, "x", &s, Some(0.0), &st).unwrap();
    let text = String::from_utf8(out).unwrap();
    for key in ["series = x", "samples = 4096", "skewness = ", "excess_kurtosis = "] {
        assert!(text.contains(key));
    }
    let mut csv = Vec::new();
    write_spectrum_csv(&s, &mut csv).unwrap();
    assert!(String::from_utf8(csv).unwrap().starts_with("f_hz,S_norm_per_hz\n"));
}
