//! Swept spectrum-analyzer emulation for the beat note.
//!
//! Each display bin is measured at its own moment in the sweep: the tone
//! with instantaneous frequency ν₋(t) is multiplied by a Gaussian time
//! window centred on that moment and projected onto the bin frequency. The
//! window's power response is a Gaussian whose −3 dB full width is the RBW.

use serde::{Deserialize, Serialize};

use super::{interpolate, rbw_sigma, Spectrum, TWO_PI};
use crate::error::{invalid, Result};
use crate::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerSettings {
    /// Resolution bandwidth, −3 dB full width (Hz).
    pub rbw: f64,
    pub sweep_time: f64,
    pub n_sweeps: usize,
    pub start_frequency: f64,
    pub stop_frequency: f64,
    pub n_bins: usize,
}

impl AnalyzerSettings {
    /// 5 MHz span around `centre`, 30 kHz RBW, 14 ms sweeps.
    pub fn paper(centre: f64, n_sweeps: usize) -> Self {
        Self {
            rbw: 30e3,
            sweep_time: 14e-3,
            n_sweeps,
            start_frequency: centre - 2.5e6,
            stop_frequency: centre + 2.5e6,
            n_bins: 1001,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rbw > 0.0 && self.sweep_time > 0.0) {
            return Err(invalid("rbw and sweep_time must be positive"));
        }
        if self.rbw < 1.0 / self.sweep_time {
            return Err(invalid(format!(
                "rbw {:.3e} Hz is finer than 1/sweep_time = {:.3e} Hz",
                self.rbw,
                1.0 / self.sweep_time
            )));
        }
        if self.n_sweeps == 0 || self.n_bins < 2 {
            return Err(invalid("need at least one sweep and two bins"));
        }
        if !(self.stop_frequency > self.start_frequency) {
            return Err(invalid("stop_frequency must exceed start_frequency"));
        }
        Ok(())
    }

    fn bin_frequency(&self, k: usize) -> f64 {
        self.start_frequency + (self.stop_frequency - self.start_frequency) * k as f64 / (self.n_bins - 1) as f64
    }
}

/// Bins farther than this many filter widths from the tone use the
/// closed-form Gaussian response.
const NUMERIC_REACH: f64 = 8.0;
const WINDOW_REACH: f64 = 5.0;
const SAMPLES_PER_SIGMA: usize = 12;

struct Sweeper<'a> {
    t: &'a [f64],
    nu: &'a [f64],
    settings: &'a AnalyzerSettings,
    sigma_f: f64,
    sigma_t: f64,
    t0: f64,
}

impl Sweeper<'_> {
    fn nu_at(&self, t: f64) -> f64 {
        interpolate(self.t, self.nu, t)
    }

    /// Normalized power response of the bin at `f` measured at time `tc`.
    fn response(&self, f: f64, tc: f64) -> f64 {
        let centre = self.nu_at(tc);
        let d = (f - centre) / self.sigma_f;
        if d.abs() > NUMERIC_REACH {
            return (-0.5 * d * d).exp();
        }
        let m = (WINDOW_REACH as usize) * SAMPLES_PER_SIGMA;
        let h = self.sigma_t / SAMPLES_PER_SIGMA as f64;
        let (mut re, mut im, mut wsum) = (0.0, 0.0, 0.0);
        let mut phase = 0.0;
        let mut prev = self.nu_at(tc - m as f64 * h) - f;
        for j in 0..=2 * m {
            let tau = (j as f64 - m as f64) * h;
            let cur = self.nu_at(tc + tau) - f;
            if j > 0 {
                phase += 0.5 * TWO_PI * h * (prev + cur);
            }
            prev = cur;
            let w = (-0.5 * (tau / self.sigma_t).powi(2)).exp();
            re += w * phase.cos();
            im += w * phase.sin();
            wsum += w;
        }
        (re * re + im * im) / (wsum * wsum)
    }

    fn sweep(&self, s: usize) -> Vec<f64> {
        let st = self.settings;
        let start = self.t0 + s as f64 * st.sweep_time;
        (0..st.n_bins)
            .map(|k| {
                let tc = start + st.sweep_time * k as f64 / (st.n_bins - 1) as f64;
                self.response(st.bin_frequency(k), tc)
            })
            .collect()
    }
}

/// Emulated analyzer display of a unit-amplitude tone following ν₋(t).
///
/// `psd` holds the last single sweep and `max_hold` the pointwise maximum over
/// all sweeps. Values are relative to the peak of a steady tone.
pub fn beat_spectrum(t: &[f64], nu_minus: &[f64], settings: &AnalyzerSettings, exec: Execution) -> Result<Spectrum> {
    settings.validate()?;
    if t.len() != nu_minus.len() || t.len() < 2 {
        return Err(invalid("need at least two (t, nu) samples of equal length"));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("time stamps must be strictly increasing"));
    }
    let span = t[t.len() - 1] - t[0];
    let needed = settings.n_sweeps as f64 * settings.sweep_time;
    if needed > span * (1.0 + 1e-9) + (t[1] - t[0]) {
        return Err(invalid(format!(
            "{} sweeps of {:.3e} s need {needed:.3e} s of data, series spans {span:.3e} s",
            settings.n_sweeps, settings.sweep_time
        )));
    }
    let sigma_f = rbw_sigma(settings.rbw);
    let sweeper = Sweeper {
        t,
        nu: nu_minus,
        settings,
        sigma_f,
        sigma_t: 1.0 / (TWO_PI * std::f64::consts::SQRT_2 * sigma_f),
        t0: t[0],
    };
    let sweeps = exec.map_range(settings.n_sweeps, |s| sweeper.sweep(s));
    let mut max_hold = vec![0.0f64; settings.n_bins];
    for sw in &sweeps {
        for (m, v) in max_hold.iter_mut().zip(sw) {
            *m = m.max(*v);
        }
    }
    Ok(Spectrum {
        frequency: (0..settings.n_bins).map(|k| settings.bin_frequency(k)).collect(),
        psd: sweeps.last().cloned().unwrap_or_default(),
        rbw: settings.rbw,
        sweep_time: settings.sweep_time,
        max_hold: Some(max_hold),
    })
}

/// Half width at half maximum of the highest peak, by linear interpolation of
/// the half-power crossings. `None` if the peak touches either edge.
pub fn half_width_at_half_maximum(freq: &[f64], values: &[f64]) -> Option<f64> {
    let (peak, &top) = values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    let half = 0.5 * top;
    let mut l = peak;
    while l > 0 && values[l] > half {
        l -= 1;
    }
    let mut r = peak;
    while r + 1 < values.len() && values[r] > half {
        r += 1;
    }
    if values[l] > half || values[r] > half {
        return None;
    }
    let cross = |a: usize, b: usize| {
        let (va, vb) = (values[a], values[b]);
        freq[a] + (half - va) / (vb - va) * (freq[b] - freq[a])
    };
    Some(0.5 * (cross(r - 1, r) - cross(l + 1, l)))
}
