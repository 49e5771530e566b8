//! Semiclassical model of the balanced detection chain.
//!
//! Spectra are in units of the shot-noise reference trace: the difference
//! photocurrent with the half-wave plate at π/8, electronic floor included.
//! A reading of 1.0 is the shot-noise level; squeezing reads below it.

mod analyzer;
mod welch;

pub use analyzer::{beat_spectrum, half_width_at_half_maximum, AnalyzerSettings};
pub use welch::psd_estimate;

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Spectrum {
    pub frequency: Vec<f64>,
    pub psd: Vec<f64>,
    /// Resolution bandwidth (Hz).
    pub rbw: f64,
    /// Time spanned by one trace (s); zero for model spectra.
    pub sweep_time: f64,
    pub max_hold: Option<Vec<f64>>,
}

impl Spectrum {
    /// Linear interpolation of the PSD at `f`, clamped to the grid.
    pub fn value_at(&self, f: f64) -> f64 {
        interpolate(&self.frequency, &self.psd, f)
    }
}

pub(crate) fn interpolate(x: &[f64], y: &[f64], at: f64) -> f64 {
    match x.len() {
        0 => 0.0,
        1 => y[0],
        n => {
            if at <= x[0] {
                return y[0];
            }
            if at >= x[n - 1] {
                return y[n - 1];
            }
            let k = x.partition_point(|&v| v <= at) - 1;
            let w = (at - x[k]) / (x[k + 1] - x[k]);
            y[k] + w * (y[k + 1] - y[k])
        }
    }
}

/// Half-wave plate in front of a polarizing splitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitterConfig {
    /// Half-wave plate angle (rad).
    pub alpha: f64,
    /// Fraction of the beat power surviving at α = 0.
    pub crosstalk_power: f64,
}

/// 52 dB residual beat suppression.
pub const DEFAULT_CROSSTALK_POWER: f64 = 6.309_573_444_801_933e-6;

impl SplitterConfig {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            crosstalk_power: DEFAULT_CROSSTALK_POWER,
        }
    }

    /// Effective reflectivity R = cos²(2α).
    pub fn reflectivity(&self) -> f64 {
        (2.0 * self.alpha).cos().powi(2)
    }

    /// Powers on the two detectors for signal and idler inputs.
    pub fn mix(&self, p_signal: f64, p_idler: f64) -> (f64, f64) {
        let r = self.reflectivity();
        let t = 1.0 - r;
        (r * p_signal + t * p_idler, t * p_signal + r * p_idler)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() {
            return Err(invalid("alpha must be finite"));
        }
        if !(self.crosstalk_power >= 0.0) {
            return Err(invalid("crosstalk_power must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorPair {
    /// Photodiode quantum efficiency; part of the lumped escape efficiency.
    pub quantum_efficiency: f64,
    /// Common-mode rejection (dB), flat in frequency.
    pub cmrr_db: f64,
    /// Dark electronic noise relative to pure shot noise.
    pub electronic_noise_floor: f64,
    /// Lumped twin-beam correlation efficiency η.
    pub escape_efficiency: f64,
}

/// η giving a 4 dB reading at 200 kHz with the default floor and 3 MHz cutoff.
pub const DEFAULT_ESCAPE_EFFICIENCY: f64 = 0.665;

impl Default for DetectorPair {
    fn default() -> Self {
        Self {
            quantum_efficiency: 0.95,
            cmrr_db: 42.0,
            electronic_noise_floor: 0.1,
            escape_efficiency: DEFAULT_ESCAPE_EFFICIENCY,
        }
    }
}

impl DetectorPair {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.quantum_efficiency) {
            return Err(invalid("quantum_efficiency must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.escape_efficiency) {
            return Err(invalid("escape_efficiency must lie in [0, 1]"));
        }
        if !(self.electronic_noise_floor >= 0.0) {
            return Err(invalid("electronic_noise_floor must be non-negative"));
        }
        if !self.cmrr_db.is_finite() {
            return Err(invalid("cmrr_db must be finite"));
        }
        Ok(())
    }

    fn common_mode_leak(&self) -> f64 {
        10f64.powf(-self.cmrr_db / 10.0)
    }
}

/// Classical tone present in both beams (e.g. pump intensity noise).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommonModeTone {
    pub frequency: f64,
    /// Peak level per detector, in shot-noise units.
    pub level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwinBeamModel {
    /// Squeezing cutoff: the cold-cavity half width (Hz).
    pub cutoff: f64,
    pub beat_frequency: f64,
    /// Peak beat-note level at α = π/8, in shot-noise units.
    pub beat_level: f64,
    /// Analyzer resolution bandwidth shaping the tones (Hz).
    pub rbw: f64,
    pub common_mode: Option<CommonModeTone>,
}

impl Default for TwinBeamModel {
    fn default() -> Self {
        Self {
            cutoff: 3e6,
            beat_frequency: 4e6,
            beat_level: 1e6,
            rbw: 100e3,
            common_mode: None,
        }
    }
}

/// 1 − η/(1 + (f/f_c)²): intensity-difference noise relative to shot noise.
pub fn squeezing_psd(f: f64, eta: f64, cutoff: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid(format!("eta {eta} outside [0, 1]")));
    }
    if !(f >= 0.0) || !(cutoff > 0.0) {
        return Err(invalid("frequency must be non-negative and cutoff positive"));
    }
    let u = f / cutoff;
    Ok(1.0 - eta / (1.0 + u * u))
}

/// η that makes the α = 0 trace read `target_db` at `f` relative to the
/// shot-noise trace, with `floor` added to both.
pub fn calibrate_eta(target_db: f64, f: f64, cutoff: f64, floor: f64) -> Result<f64> {
    let level = 10f64.powf(target_db / 10.0);
    let u = f / cutoff;
    let eta = (1.0 + u * u) * (1.0 + floor) * (1.0 - level);
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid(format!("{target_db} dB needs eta {eta}, outside [0, 1]")));
    }
    Ok(eta)
}

fn gaussian_line(f: f64, centre: f64, rbw: f64) -> f64 {
    let sigma = rbw / (2.0 * (2.0 * 2f64.ln()).sqrt());
    let d = (f - centre) / sigma;
    (-0.5 * d * d).exp()
}

/// Model difference-channel spectrum on the grid `freqs`.
pub fn difference_spectrum(
    splitter: &SplitterConfig,
    detectors: &DetectorPair,
    model: &TwinBeamModel,
    freqs: &[f64],
) -> Result<Spectrum> {
    splitter.validate()?;
    detectors.validate()?;
    if !(model.cutoff > 0.0 && model.rbw > 0.0 && model.beat_level >= 0.0) {
        return Err(invalid("cutoff and rbw must be positive, beat level non-negative"));
    }
    if freqs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("frequency grid must be strictly increasing"));
    }
    let r = splitter.reflectivity();
    // Fraction of the difference channel carrying the correlated signal.
    let contrast = (2.0 * r - 1.0).powi(2);
    let beat_weight = 4.0 * r * (1.0 - r) + splitter.crosstalk_power * contrast;
    let floor = detectors.electronic_noise_floor;
    let reference = 1.0 + floor;
    let psd = freqs
        .iter()
        .map(|&f| {
            let sq = squeezing_psd(f.max(0.0), detectors.escape_efficiency, model.cutoff)?;
            let mut s = contrast * sq + (1.0 - contrast) + floor;
            s += model.beat_level * beat_weight * gaussian_line(f, model.beat_frequency, model.rbw);
            if let Some(cm) = model.common_mode {
                s += cm.level * detectors.common_mode_leak() * gaussian_line(f, cm.frequency, model.rbw);
            }
            Ok(s / reference)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Spectrum {
        frequency: freqs.to_vec(),
        psd,
        rbw: model.rbw,
        sweep_time: 0.0,
        max_hold: None,
    })
}

/// Dark-detector trace relative to the shot-noise reference.
pub fn electronic_floor_level(detectors: &DetectorPair) -> f64 {
    detectors.electronic_noise_floor / (1.0 + detectors.electronic_noise_floor)
}

/// Emulates an `n_averages`-trace average: each bin of an averaged power
/// spectrum is Gamma distributed with relative spread 1/√n.
pub fn averaged_measurement<R: Rng + ?Sized>(model: &Spectrum, n_averages: usize, rng: &mut R) -> Result<Spectrum> {
    if n_averages == 0 {
        return Err(invalid("at least one average is needed"));
    }
    let n = n_averages as f64;
    let gamma = Gamma::new(n, 1.0 / n).map_err(|e| invalid(e.to_string()))?;
    let mut out = model.clone();
    for v in &mut out.psd {
        *v *= gamma.sample(rng);
    }
    Ok(out)
}

/// Linear grid of `n` points on [start, stop].
pub fn linear_grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Power ratio in dB.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Standard deviation of a Gaussian RBW filter from its −3 dB width.
pub(crate) fn rbw_sigma(rbw: f64) -> f64 {
    rbw / (2.0 * (2.0 * 2f64.ln()).sqrt())
}

pub(crate) const TWO_PI: f64 = 2.0 * PI;
