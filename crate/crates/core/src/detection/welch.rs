use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::Spectrum;
use crate::error::{invalid, Result};
use crate::Execution;

fn hann(n: usize) -> Vec<f64> {
    // Periodic form: tiles to a constant under 50% overlap.
    (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos())
        .collect()
}

/// Welch estimate of the one-sided PSD (units² per Hz) of a uniformly sampled
/// series: Hann-windowed segments with their mean removed, `overlap` samples
/// shared between neighbours, periodograms averaged.
///
/// The density is normalized by Σw², so integrating it over frequency returns
/// the variance of the series.
pub fn psd_estimate(
    x: &[f64],
    sample_rate: f64,
    segment_length: usize,
    overlap: usize,
    exec: Execution,
) -> Result<Spectrum> {
    if x.is_empty() {
        return Err(invalid("empty series"));
    }
    if !(sample_rate > 0.0) {
        return Err(invalid("sample_rate must be positive"));
    }
    if segment_length < 2 || segment_length > x.len() {
        return Err(invalid(format!(
            "segment_length {segment_length} must lie in [2, {}]",
            x.len()
        )));
    }
    if overlap >= segment_length {
        return Err(invalid("overlap must be shorter than a segment"));
    }
    let hop = segment_length - overlap;
    let n_segments = (x.len() - segment_length) / hop + 1;
    let window = hann(segment_length);
    let w2: f64 = window.iter().map(|w| w * w).sum();
    let w1: f64 = window.iter().sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_length);
    let n_bins = segment_length / 2 + 1;

    let periodograms = exec.map_range(n_segments, |s| {
        let seg = &x[s * hop..s * hop + segment_length];
        let mean = seg.iter().sum::<f64>() / segment_length as f64;
        let mut buf: Vec<Complex<f64>> = seg
            .iter()
            .zip(&window)
            .map(|(v, w)| Complex::new((v - mean) * w, 0.0))
            .collect();
        fft.process(&mut buf);
        buf[..n_bins].iter().map(|c| c.norm_sqr()).collect::<Vec<f64>>()
    });

    let mut psd = vec![0.0; n_bins];
    for p in &periodograms {
        for (acc, v) in psd.iter_mut().zip(p) {
            *acc += v;
        }
    }
    let scale = 1.0 / (n_segments as f64 * sample_rate * w2);
    for (k, v) in psd.iter_mut().enumerate() {
        let one_sided = if k == 0 || (segment_length.is_multiple_of(2) && k == n_bins - 1) {
            1.0
        } else {
            2.0
        };
        *v *= scale * one_sided;
    }
    let df = sample_rate / segment_length as f64;
    Ok(Spectrum {
        frequency: (0..n_bins).map(|k| k as f64 * df).collect(),
        psd,
        // Equivalent noise bandwidth of the window.
        rbw: sample_rate * w2 / (w1 * w1),
        sweep_time: segment_length as f64 / sample_rate,
        max_hold: None,
    })
}
