//! Sampled noise processes against their analytic one-sided spectra, using
//! 100 s of data per process.

use opo_core::detection::{psd_estimate, Spectrum};
use opo_core::noise::{sample_line, sample_ou, NoiseBudget, ResonantLine};
use opo_core::{rng_from_seed, Execution};

/// Analytic PSD folded about multiples of the sample rate, i.e. the spectrum
/// a sampled record of the continuous process actually has.
fn folded(psd: impl Fn(f64) -> f64, f: f64, fs: f64) -> f64 {
    let mut s = psd(f);
    for k in 1..400 {
        let k = k as f64 * fs;
        s += psd(k - f) + psd(k + f);
    }
    s
}

fn band_ratio(est: &Spectrum, model: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (f, p) in est.frequency.iter().zip(&est.psd) {
        if *f >= lo && *f <= hi {
            num += p;
            den += model(*f);
        }
    }
    num / den
}

#[test]
fn band_limited_length_noise_is_flat_then_rolls_off() {
    let p = NoiseBudget::paper().length_process();
    let fs = 25e3;
    let mut rng = rng_from_seed(21);
    let x = sample_ou(&p, 1.0 / fs, (100.0 * fs) as usize, &mut rng);
    let est = psd_estimate(&x, fs, 8192, 4096, Execution::default()).unwrap();
    let model = |f| folded(|g| p.psd(g), f, fs);
    for (lo, hi) in [(10.0, 100.0), (300.0, 1000.0), (2000.0, 4000.0), (8000.0, 12000.0)] {
        let r = band_ratio(&est, model, lo, hi);
        assert!((r - 1.0).abs() < 0.06, "band {lo}-{hi} Hz: ratio {r}");
    }
    // Corner: the level at the bandwidth is half the plateau.
    assert!((p.psd(3e3) / p.psd(0.0) - 0.5).abs() < 1e-12);
}

#[test]
fn vibration_lines_are_lorentzian() {
    let fs = 1e3;
    for (f0, seed) in [(70.0, 22), (100.0, 23)] {
        let line = ResonantLine {
            frequency: f0,
            q: 10.0,
            amplitude: 1e-7,
        };
        let mut rng = rng_from_seed(seed);
        let x = sample_line(&line, 1.0 / fs, (100.0 * fs) as usize, &mut rng);
        let est = psd_estimate(&x, fs, 4096, 2048, Execution::default()).unwrap();
        let model = |f| folded(|g| line.psd(g), f, fs);
        let hw = line.half_width();
        for (lo, hi) in [
            (f0 - hw, f0 + hw),
            (f0 + 2.0 * hw, f0 + 6.0 * hw),
            (f0 - 6.0 * hw, f0 - 2.0 * hw),
        ] {
            let r = band_ratio(&est, model, lo, hi);
            assert!((r - 1.0).abs() < 0.12, "line {f0} Hz, band {lo:.1}-{hi:.1}: ratio {r}");
        }
        let peak = est
            .frequency
            .iter()
            .zip(&est.psd)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(f, _)| *f)
            .unwrap();
        assert!((peak - f0).abs() < hw, "peak at {peak} Hz");
    }
}

#[test]
fn temperature_noise_rms() {
    let b = NoiseBudget::paper();
    let p = b.temperature_process();
    let mut rng = rng_from_seed(24);
    let x = sample_ou(&p, 1e-2, 100_000, &mut rng);
    let est = psd_estimate(&x, 100.0, 4096, 2048, Execution::default()).unwrap();
    let r = band_ratio(&est, |f| folded(|g| p.psd(g), f, 100.0), 0.1, 0.5);
    assert!((r - 1.0).abs() < 0.15, "ratio {r}");
}
