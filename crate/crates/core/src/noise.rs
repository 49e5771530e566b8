//! Stochastic drive processes and their analytic spectra.
//!
//! Every process here is advanced with its exact discrete-time propagator, so
//! the sampled statistics do not depend on the step size.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// First-order low-pass filtered white noise with stationary standard
/// deviation `sigma` and correlation time `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrnsteinUhlenbeck {
    pub sigma: f64,
    pub tau: f64,
}

impl OrnsteinUhlenbeck {
    /// Process with a -3 dB corner at `bandwidth` hertz.
    pub fn with_bandwidth(sigma: f64, bandwidth: f64) -> Self {
        Self {
            sigma,
            tau: 1.0 / (2.0 * PI * bandwidth),
        }
    }

    pub fn discretize(&self, dt: f64) -> OuStep {
        let decay = (-dt / self.tau).exp();
        OuStep {
            decay,
            kick: self.sigma * (-(-2.0 * dt / self.tau).exp_m1()).sqrt(),
        }
    }

    /// One-sided PSD 4σ²τ / (1 + (2πfτ)²), integrating to σ².
    pub fn psd(&self, f: f64) -> f64 {
        let w = 2.0 * PI * f * self.tau;
        4.0 * self.sigma * self.sigma * self.tau / (1.0 + w * w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuStep {
    decay: f64,
    kick: f64,
}

impl OuStep {
    #[inline]
    pub fn advance(&self, x: f64, normal: f64) -> f64 {
        self.decay * x + self.kick * normal
    }
}

/// Mechanical resonance driven by white noise: a damped oscillator with
/// centre `frequency`, quality factor `q` and RMS displacement `amplitude`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonantLine {
    pub frequency: f64,
    pub q: f64,
    pub amplitude: f64,
}

impl ResonantLine {
    /// Half width at half maximum of the line (Hz).
    pub fn half_width(&self) -> f64 {
        self.frequency / (2.0 * self.q)
    }

    /// The displacement is the real part of a complex phasor that rotates at
    /// the line frequency and relaxes at the half width.
    pub fn discretize(&self, dt: f64) -> LineStep {
        let gamma = 2.0 * PI * self.half_width();
        let decay = (-gamma * dt).exp();
        let phase = 2.0 * PI * self.frequency * dt;
        LineStep {
            re: decay * phase.cos(),
            im: decay * phase.sin(),
            kick: self.amplitude * (-(-2.0 * gamma * dt).exp_m1()).sqrt(),
        }
    }

    /// One-sided PSD: Lorentzians at ±f₀ folded onto positive frequency,
    /// integrating to amplitude².
    pub fn psd(&self, f: f64) -> f64 {
        let g = self.half_width();
        let lor = |d: f64| g / (PI * (d * d + g * g));
        self.amplitude * self.amplitude * (lor(f - self.frequency) + lor(f + self.frequency))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineStep {
    re: f64,
    im: f64,
    kick: f64,
}

impl LineStep {
    #[inline]
    pub fn advance(&self, z: (f64, f64), n_re: f64, n_im: f64) -> (f64, f64) {
        (
            self.re * z.0 - self.im * z.1 + self.kick * n_re,
            self.im * z.0 + self.re * z.1 + self.kick * n_im,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    /// Fast pump-frequency wander (Hz per ms).
    pub pump_freq_rate: f64,
    /// Correlation time bounding the pump random walk (s).
    pub pump_correlation_time: f64,
    /// Slow pump ramp (Hz per minute).
    pub pump_drift: f64,
    pub temp_sigma: f64,
    pub temp_bandwidth: f64,
    pub length_sigma: f64,
    pub length_bandwidth: f64,
    /// Transverse crystal displacement lines (frequency Hz, Q, RMS metres).
    pub vibration_lines: Vec<ResonantLine>,
    /// Band in which the beat-note jitter is observed (Hz). Informational.
    pub jitter_band: (f64, f64),
}

/// RMS transverse displacement per vibration line that reproduces the
/// 310 kHz locked beat range with the default servo.
pub const DEFAULT_VIBRATION_AMPLITUDE: f64 = 6.8e-8;

impl NoiseBudget {
    pub fn paper() -> Self {
        Self {
            pump_freq_rate: 10e3,
            pump_correlation_time: 10e-3,
            pump_drift: 10e6,
            temp_sigma: 1e-4,
            temp_bandwidth: 1.0,
            length_sigma: 0.01e-9,
            length_bandwidth: 3e3,
            vibration_lines: vec![
                ResonantLine {
                    frequency: 70.0,
                    q: 10.0,
                    amplitude: DEFAULT_VIBRATION_AMPLITUDE,
                },
                ResonantLine {
                    frequency: 100.0,
                    q: 10.0,
                    amplitude: DEFAULT_VIBRATION_AMPLITUDE,
                },
            ],
            jitter_band: (100.0, 500.0),
        }
    }

    /// All amplitudes zero, bandwidths kept.
    pub fn quiet() -> Self {
        let mut b = Self::paper();
        b.pump_freq_rate = 0.0;
        b.pump_drift = 0.0;
        b.temp_sigma = 0.0;
        b.length_sigma = 0.0;
        for line in &mut b.vibration_lines {
            line.amplitude = 0.0;
        }
        b
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("pump_freq_rate", self.pump_freq_rate),
            ("pump_drift", self.pump_drift),
            ("temp_sigma", self.temp_sigma),
            ("length_sigma", self.length_sigma),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be finite and non-negative")));
            }
        }
        let positive = [
            ("pump_correlation_time", self.pump_correlation_time),
            ("temp_bandwidth", self.temp_bandwidth),
            ("length_bandwidth", self.length_bandwidth),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        for line in &self.vibration_lines {
            if !(line.frequency > 0.0 && line.q > 0.0) {
                return Err(invalid("vibration line frequency and Q must be positive"));
            }
            if !(line.amplitude >= 0.0 && line.amplitude.is_finite()) {
                return Err(invalid("vibration amplitude must be non-negative"));
            }
        }
        let (lo, hi) = self.jitter_band;
        if !(lo > 0.0 && hi > lo) {
            return Err(invalid("jitter_band must satisfy 0 < low < high"));
        }
        Ok(())
    }

    /// Same budget with every vibration amplitude multiplied by `scale`.
    pub fn with_vibration_scale(&self, scale: f64) -> Self {
        let mut b = self.clone();
        for line in &mut b.vibration_lines {
            line.amplitude *= scale;
        }
        b
    }

    /// Pump wander as an OU process whose increments over 1 ms have standard
    /// deviation `pump_freq_rate`.
    pub fn pump_process(&self) -> OrnsteinUhlenbeck {
        let tau = self.pump_correlation_time;
        OrnsteinUhlenbeck {
            sigma: self.pump_freq_rate * (tau / 2e-3).sqrt(),
            tau,
        }
    }

    pub fn temperature_process(&self) -> OrnsteinUhlenbeck {
        OrnsteinUhlenbeck::with_bandwidth(self.temp_sigma, self.temp_bandwidth)
    }

    pub fn length_process(&self) -> OrnsteinUhlenbeck {
        OrnsteinUhlenbeck::with_bandwidth(self.length_sigma, self.length_bandwidth)
    }
}

/// Fills `out` with standard normal draws.
#[inline]
pub fn fill_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out {
        *v = rng.sample(StandardNormal);
    }
}

/// Samples `n` values of an OU process started from its stationary law.
pub fn sample_ou<R: Rng + ?Sized>(p: &OrnsteinUhlenbeck, dt: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let step = p.discretize(dt);
    let mut x = p.sigma * rng.sample::<f64, _>(StandardNormal);
    (0..n)
        .map(|_| {
            x = step.advance(x, rng.sample(StandardNormal));
            x
        })
        .collect()
}

/// Samples `n` displacements of a resonant line started from its stationary law.
pub fn sample_line<R: Rng + ?Sized>(line: &ResonantLine, dt: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let step = line.discretize(dt);
    let mut z = (
        line.amplitude * rng.sample::<f64, _>(StandardNormal),
        line.amplitude * rng.sample::<f64, _>(StandardNormal),
    );
    (0..n)
        .map(|_| {
            z = step.advance(z, rng.sample(StandardNormal), rng.sample(StandardNormal));
            z.0
        })
        .collect()
}
