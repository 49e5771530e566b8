use serde::{Deserialize, Serialize};

/// Recorded simulation output; each row is an average over one record interval.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub nu_minus: Vec<f64>,
    pub nu_plus_detuning: Vec<f64>,
    pub power: Vec<f64>,
    /// Set on rows during which the oscillating mode pair changed.
    pub hop: Vec<bool>,
    /// Number of loop updates at which the length actuator was at its limit.
    pub saturated_updates: u64,
}

impl TimeSeries {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            t: Vec::with_capacity(n),
            nu_minus: Vec::with_capacity(n),
            nu_plus_detuning: Vec::with_capacity(n),
            power: Vec::with_capacity(n),
            hop: Vec::with_capacity(n),
            saturated_updates: 0,
        }
    }

    pub fn push(&mut self, t: f64, nu_minus: f64, nu_plus_detuning: f64, power: f64, hop: bool) {
        self.t.push(t);
        self.nu_minus.push(nu_minus);
        self.nu_plus_detuning.push(nu_plus_detuning);
        self.power.push(power);
        self.hop.push(hop);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Spacing of the first two samples, if any.
    pub fn sample_interval(&self) -> Option<f64> {
        (self.t.len() >= 2).then(|| self.t[1] - self.t[0])
    }

    /// Max-hold drift range of the beat note: max − min of ν₋.
    pub fn nu_minus_range(&self) -> f64 {
        range(&self.nu_minus)
    }

    pub fn hop_count(&self) -> usize {
        self.hop.iter().filter(|&&h| h).count()
    }
}

pub fn range(x: &[f64]) -> f64 {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if x.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}
