//! Scenario configuration: a TOML file with the sections `[crystal]`,
//! `[cavity]`, `[noise]`, `[servo]`, `[detection]`, `[efficiency]` and a
//! top-level `seed`. Keys carry their SI unit in the name. Missing keys take
//! the tabulated defaults; unknown keys are rejected.
//!
//! Resolution records every value actually used, so the echoed config in an
//! artifact header is complete and can be fed back in.

use opo_core::cavity::{CavityGeometry, DEFAULT_GAIN_HALF_WIDTH, DEFAULT_LINEWIDTH_ASYMMETRY};
use opo_core::crystal::{calibrate_derivatives, CrystalParams, TuningTargets, DEFAULT_DBIREFRINGENCE_DX};
use opo_core::detection::{
    AnalyzerSettings, CommonModeTone, DetectorPair, SplitterConfig, TwinBeamModel, DEFAULT_CROSSTALK_POWER,
    DEFAULT_ESCAPE_EFFICIENCY,
};
use opo_core::efficiency::{EfficiencyModel, SYNTHETIC_RATIO_RANGE};
use opo_core::noise::{NoiseBudget, ResonantLine, DEFAULT_VIBRATION_AMPLITUDE};
use opo_core::servo::{ElectroOpticLoop, Plant, RunConfig, ServoConfig, DEFAULT_INITIAL_BEAT, DEFAULT_PUMP_RATIO};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{key}: {message}")]
pub struct ConfigError {
    /// Offending key as `section.key`, or the bare section name.
    pub key: String,
    pub message: String,
}

fn config_error(key: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.into(),
        message: message.into(),
    }
}

pub const SECTIONS: [&str; 6] = ["crystal", "cavity", "noise", "servo", "detection", "efficiency"];

/// Parses config text into a raw table, checking only the top-level shape.
pub fn parse(text: &str) -> Result<Table, ConfigError> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| config_error("syntax", e.message().to_string()))?;
    for (k, v) in &root {
        if k == "seed" {
            continue;
        }
        if !SECTIONS.contains(&k.as_str()) {
            return Err(config_error(k.clone(), "unknown key"));
        }
        if !v.is_table() {
            return Err(config_error(k.clone(), "section must be a table"));
        }
    }
    Ok(root)
}

/// Sets `section.key` in a raw table, creating the section if needed.
pub fn set(root: &mut Table, section: &str, key: &str, value: Value) {
    let entry = root
        .entry(section.to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    if let Value::Table(t) = entry {
        t.insert(key.to_string(), value);
    }
}

/// Reads keys out of one section and records the resolved values.
struct Section {
    name: &'static str,
    raw: Table,
    resolved: Table,
}

impl Section {
    fn new(root: &Table, name: &'static str) -> Self {
        let raw = root.get(name).and_then(Value::as_table).cloned().unwrap_or_default();
        Self {
            name,
            raw,
            resolved: Table::new(),
        }
    }

    fn key(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    fn err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        config_error(self.key(key), message)
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.raw.remove(key)
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        let Some(v) = self.take(key) else { return Ok(None) };
        let x = match v {
            Value::Float(x) => x,
            Value::Integer(i) => i as f64,
            _ => return Err(self.err(key, "expected a number")),
        };
        if !x.is_finite() {
            return Err(self.err(key, "must be finite"));
        }
        self.resolved.insert(key.to_string(), Value::Float(x));
        Ok(Some(x))
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let x = self.opt_f64(key)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), Value::Float(x));
        Ok(x)
    }

    fn positive(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let x = self.f64(key, default)?;
        if x > 0.0 {
            Ok(x)
        } else {
            Err(self.err(key, format!("must be positive, got {x}")))
        }
    }

    fn non_negative(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let x = self.f64(key, default)?;
        if x >= 0.0 {
            Ok(x)
        } else {
            Err(self.err(key, format!("must be non-negative, got {x}")))
        }
    }

    fn fraction(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let x = self.f64(key, default)?;
        if (0.0..=1.0).contains(&x) {
            Ok(x)
        } else {
            Err(self.err(key, format!("must lie in [0, 1], got {x}")))
        }
    }

    fn opt_positive(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.opt_f64(key)? {
            Some(x) if !(x > 0.0) => Err(self.err(key, format!("must be positive, got {x}"))),
            other => Ok(other),
        }
    }

    fn count(&mut self, key: &str, default: u64, min: u64) -> Result<u64, ConfigError> {
        let n = match self.take(key) {
            None => default,
            Some(Value::Integer(i)) if i >= 0 => i as u64,
            Some(_) => return Err(self.err(key, "expected a non-negative integer")),
        };
        if n < min {
            return Err(self.err(key, format!("must be at least {min}, got {n}")));
        }
        self.resolved.insert(key.to_string(), Value::Integer(n as i64));
        Ok(n)
    }

    fn flag(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        let b = match self.take(key) {
            None => default,
            Some(Value::Boolean(b)) => b,
            Some(_) => return Err(self.err(key, "expected true or false")),
        };
        self.resolved.insert(key.to_string(), Value::Boolean(b));
        Ok(b)
    }

    fn positive_list(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        let xs = match self.take(key) {
            None => default.to_vec(),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Some(*x),
                    Value::Integer(i) => Some(*i as f64),
                    _ => None,
                })
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| self.err(key, "expected an array of numbers"))?,
            Some(_) => return Err(self.err(key, "expected an array of numbers")),
        };
        if xs.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(self.err(key, "every entry must be positive"));
        }
        let arr = xs.iter().map(|&x| Value::Float(x)).collect();
        self.resolved.insert(key.to_string(), Value::Array(arr));
        Ok(xs)
    }

    /// Records a value derived during resolution.
    fn derived(&mut self, key: &str, x: f64) {
        self.resolved.insert(key.to_string(), Value::Float(x));
    }

    fn finish(self, out: &mut Table) -> Result<(), ConfigError> {
        if let Some(k) = self.raw.keys().next() {
            return Err(self.err(k, "unknown key"));
        }
        out.insert(self.name.to_string(), Value::Table(self.resolved));
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DetectionSettings {
    pub detectors: DetectorPair,
    pub splitter: SplitterConfig,
    pub model: TwinBeamModel,
    pub f_start: f64,
    pub f_stop: f64,
    pub n_points: usize,
    /// Number of averaged traces to emulate; 0 emits the model curve.
    pub averages: usize,
    pub analyzer: AnalyzerSettings,
    /// Display centre; the mean beat of the input series when unset.
    pub analyzer_centre: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EfficiencySettings {
    pub model: EfficiencyModel,
    pub n_points: usize,
    pub noise: f64,
    pub ratio_range: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub seed: u64,
    /// Crystal with resolved temperature and voltage derivatives.
    pub crystal: CrystalParams,
    pub targets_temperature: TuningTargets,
    pub targets_voltage: TuningTargets,
    pub geometry: CavityGeometry,
    pub scan_span: f64,
    pub max_beat: f64,
    pub run: RunConfig,
    pub detection: DetectionSettings,
    pub efficiency: EfficiencySettings,
    /// Fully resolved config, serialized.
    pub resolved: String,
}

impl Scenario {
    pub fn config_sha256(&self) -> String {
        Sha256::digest(self.resolved.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn resolve_crystal(s: &mut Section) -> Result<(CrystalParams, TuningTargets, TuningTargets), ConfigError> {
    let length = s.positive("length_m", 0.01)?;
    let n_mean = s.positive("n_mean", 1.8)?;
    let biref = s.f64("birefringence", -0.09)?;
    let mut crystal =
        CrystalParams::from_mean_index(length, n_mean, biref).map_err(|e| s.err("n_mean", e.to_string()))?;
    crystal.dbirefringence_dx = s.f64("dbirefringence_dx_per_m", DEFAULT_DBIREFRINGENCE_DX)?;
    crystal.reference_temperature = s.positive("reference_temperature_K", 298.15)?;
    crystal.linear_range = s.positive("linear_range_K", 0.5)?;

    let tp = TuningTargets::paper_temperature();
    let vp = TuningTargets::paper_voltage();
    let t = TuningTargets::new(
        s.f64("dnu_plus_dT_Hz_per_K", tp.plus)?,
        s.f64("dnu_minus_dT_Hz_per_K", tp.minus)?,
    );
    let v = TuningTargets::new(
        s.f64("dnu_plus_dV_Hz_per_V", vp.plus)?,
        s.f64("dnu_minus_dV_Hz_per_V", vp.minus)?,
    );

    const EXPLICIT: [&str; 4] = [
        "dpath_dT_signal_m_per_K",
        "dpath_dT_idler_m_per_K",
        "dpath_dV_signal_m_per_V",
        "dpath_dV_idler_m_per_V",
    ];
    let mut given = [None; 4];
    for (slot, key) in given.iter_mut().zip(EXPLICIT) {
        *slot = s.opt_f64(key)?;
    }
    match given {
        [None, None, None, None] => {}
        [Some(a), Some(b), Some(c), Some(d)] => {
            crystal.dpath_dt_signal = a;
            crystal.dpath_dt_idler = b;
            crystal.dpath_dv_signal = c;
            crystal.dpath_dv_idler = d;
        }
        _ => {
            let missing = EXPLICIT.iter().zip(&given).find(|(_, g)| g.is_none()).map(|(k, _)| *k);
            return Err(s.err(
                missing.unwrap_or(EXPLICIT[0]),
                "explicit path derivatives must be given all together",
            ));
        }
    }
    Ok((crystal, t, v))
}

/// Resolves a raw table into a scenario.
pub fn resolve(root: &Table) -> Result<Scenario, ConfigError> {
    let mut out = Table::new();
    let seed = match root.get("seed") {
        None => 0,
        Some(Value::Integer(i)) if *i >= 0 => *i as u64,
        Some(_) => return Err(config_error("seed", "expected a non-negative integer")),
    };
    out.insert("seed".into(), Value::Integer(seed as i64));

    let mut s = Section::new(root, "crystal");
    let (mut crystal, targets_t, targets_v) = resolve_crystal(&mut s)?;
    let explicit = s.resolved.contains_key("dpath_dT_signal_m_per_K");

    let mut c = Section::new(root, "cavity");
    let paper = CavityGeometry::paper();
    let geometry = CavityGeometry {
        air_path: c.positive("air_path_m", paper.air_path)?,
        pump_wavelength: c.positive("pump_wavelength_m", paper.pump_wavelength)?,
        cold_hwhm: c.positive("cold_hwhm_Hz", paper.cold_hwhm)?,
        hot_hwhm: c.positive("hot_hwhm_Hz", paper.hot_hwhm)?,
        linewidth_asymmetry: c.f64("linewidth_asymmetry", DEFAULT_LINEWIDTH_ASYMMETRY)?,
        mirror_r_signal_in: c.fraction("mirror_r_signal_in", paper.mirror_r_signal_in)?,
        mirror_r_signal_out: c.fraction("mirror_r_signal_out", paper.mirror_r_signal_out)?,
        mirror_r_pump_in: c.fraction("mirror_r_pump_in", paper.mirror_r_pump_in)?,
        mirror_r_pump_out: c.fraction("mirror_r_pump_out", paper.mirror_r_pump_out)?,
        mirror_curvature: c.positive("mirror_curvature_m", paper.mirror_curvature)?,
        mirror_separation: c.positive("mirror_separation_m", paper.mirror_separation)?,
    };
    let scan_span = c.positive("scan_span_m", 600e-9)?;
    let max_beat = c.positive("gain_half_width_Hz", DEFAULT_GAIN_HALF_WIDTH)?;
    geometry
        .validate(&crystal)
        .map_err(|e| c.err("mirror_separation_m", e.to_string()))?;

    if !explicit {
        crystal = calibrate_derivatives(&crystal, &geometry, targets_t, targets_v)
            .map_err(|e| s.err("dnu_plus_dT_Hz_per_K", e.to_string()))?;
        s.derived("dpath_dT_signal_m_per_K", crystal.dpath_dt_signal);
        s.derived("dpath_dT_idler_m_per_K", crystal.dpath_dt_idler);
        s.derived("dpath_dV_signal_m_per_V", crystal.dpath_dv_signal);
        s.derived("dpath_dV_idler_m_per_V", crystal.dpath_dv_idler);
    }
    crystal.validate().map_err(|e| config_error("crystal", e.to_string()))?;
    s.finish(&mut out)?;
    c.finish(&mut out)?;

    let mut n = Section::new(root, "noise");
    let np = NoiseBudget::paper();
    let freqs = n.positive_list("vibration_frequencies_Hz", &[70.0, 100.0])?;
    let q = n.positive("vibration_q", 10.0)?;
    let amplitude = n.non_negative("vibration_amplitude_m", DEFAULT_VIBRATION_AMPLITUDE)?;
    let jitter_lo = n.positive("jitter_band_low_Hz", np.jitter_band.0)?;
    let jitter_hi = n.positive("jitter_band_high_Hz", np.jitter_band.1)?;
    let noise = NoiseBudget {
        pump_freq_rate: n.non_negative("pump_freq_rate_Hz_per_ms", np.pump_freq_rate)?,
        pump_correlation_time: n.positive("pump_correlation_time_s", np.pump_correlation_time)?,
        pump_drift: n.non_negative("pump_drift_Hz_per_min", np.pump_drift)?,
        temp_sigma: n.non_negative("temp_sigma_K", np.temp_sigma)?,
        temp_bandwidth: n.positive("temp_bandwidth_Hz", np.temp_bandwidth)?,
        length_sigma: n.non_negative("length_sigma_m", np.length_sigma)?,
        length_bandwidth: n.positive("length_bandwidth_Hz", np.length_bandwidth)?,
        vibration_lines: freqs
            .iter()
            .map(|&frequency| ResonantLine {
                frequency,
                q,
                amplitude,
            })
            .collect(),
        jitter_band: (jitter_lo, jitter_hi),
    };
    noise.validate().map_err(|e| config_error("noise", e.to_string()))?;
    n.finish(&mut out)?;

    let mut e = Section::new(root, "efficiency");
    let model = EfficiencyModel {
        p_threshold: e.positive("p_threshold_W", EfficiencyModel::paper().p_threshold)?,
        k_factor: e.positive("k_factor", EfficiencyModel::paper().k_factor)?,
    };
    let ratio_lo = e.positive("ratio_min", SYNTHETIC_RATIO_RANGE.0)?;
    let ratio_hi = e.positive("ratio_max", SYNTHETIC_RATIO_RANGE.1)?;
    if !(ratio_hi > ratio_lo) {
        return Err(e.err("ratio_max", "must exceed ratio_min"));
    }
    let efficiency = EfficiencySettings {
        model,
        n_points: e.count("n_points", 20, 1)? as usize,
        noise: e.non_negative("noise_rel", 0.02)?,
        ratio_range: (ratio_lo, ratio_hi),
    };

    let mut v = Section::new(root, "servo");
    let sd = ServoConfig::default();
    let eo = ElectroOpticLoop::default();
    let eo_enabled = v.flag("eo_enabled", false)?;
    let eo_bandwidth = v.positive("eo_bandwidth_Hz", eo.bandwidth)?;
    let eo_range = v.positive("eo_voltage_range_V", eo.voltage_range)?;
    let servo = ServoConfig {
        dither_frequency: v.positive("dither_frequency_Hz", sd.dither_frequency)?,
        dither_amplitude: v.positive("dither_amplitude_m", sd.dither_amplitude)?,
        lockin_time_constant: v.positive("lockin_time_constant_s", sd.lockin_time_constant)?,
        proportional_gain: v.opt_positive("proportional_gain_m_per_Hz")?,
        integral_gain: v.opt_positive("integral_gain_m_per_Hz_s")?,
        servo_bandwidth: v.positive("servo_bandwidth_Hz", sd.servo_bandwidth)?,
        actuator_range: v.positive("actuator_range_m", sd.actuator_range)?,
        error_signal_snr: v.positive("error_signal_snr", sd.error_signal_snr)?,
        steps_per_period: v.count("steps_per_period", sd.steps_per_period as u64, 10)? as usize,
        electro_optic: eo_enabled.then_some(ElectroOpticLoop {
            bandwidth: eo_bandwidth,
            voltage_range: eo_range,
        }),
    };
    let pump_ratio = v.positive("pump_ratio", DEFAULT_PUMP_RATIO)?;
    if !(pump_ratio > 1.0) {
        return Err(v.err("pump_ratio", "must exceed 1 for oscillation"));
    }
    let plant = Plant {
        crystal: crystal.clone(),
        geometry: geometry.clone(),
        pump_ratio,
        max_output_power: model.output_power(pump_ratio * model.p_threshold),
        initial_beat: v.f64("initial_beat_Hz", DEFAULT_INITIAL_BEAT)?,
        initial_plus_detuning: v.f64("initial_plus_detuning_Hz", 0.0)?,
    };
    let run = RunConfig {
        duration: v.positive("duration_s", 60.0)?,
        sample_rate: v.positive("sample_rate_Hz", opo_core::servo::DEFAULT_SAMPLE_RATE)?,
        plant,
        noise,
        servo,
    };
    run.plant.validate().map_err(|e| config_error("servo", e.to_string()))?;
    run.servo
        .validate(&run.plant.tuning())
        .map_err(|e| config_error("servo", e.to_string()))?;
    run.updates_per_record()
        .map_err(|e| v.err("sample_rate_Hz", e.to_string()))?;
    v.finish(&mut out)?;

    let mut d = Section::new(root, "detection");
    let dd = DetectorPair::default();
    let md = TwinBeamModel::default();
    let detectors = DetectorPair {
        quantum_efficiency: d.fraction("quantum_efficiency", dd.quantum_efficiency)?,
        cmrr_db: d.f64("cmrr_dB", dd.cmrr_db)?,
        electronic_noise_floor: d.non_negative("electronic_noise_floor", dd.electronic_noise_floor)?,
        escape_efficiency: d.fraction("escape_efficiency", DEFAULT_ESCAPE_EFFICIENCY)?,
    };
    let splitter = SplitterConfig {
        alpha: d.f64("alpha_rad", std::f64::consts::PI / 8.0)?,
        crosstalk_power: d.non_negative("crosstalk_power", DEFAULT_CROSSTALK_POWER)?,
    };
    let cm_level = d.non_negative("common_mode_level", 0.0)?;
    let cm_frequency = d.positive("common_mode_frequency_Hz", 100e3)?;
    let model_tb = TwinBeamModel {
        cutoff: d.positive("cutoff_Hz", geometry.cold_hwhm)?,
        beat_frequency: d.positive("beat_frequency_Hz", md.beat_frequency)?,
        beat_level: d.non_negative("beat_level", md.beat_level)?,
        rbw: d.positive("rbw_Hz", md.rbw)?,
        common_mode: (cm_level > 0.0).then_some(CommonModeTone {
            frequency: cm_frequency,
            level: cm_level,
        }),
    };
    let f_start = d.non_negative("f_start_Hz", 0.0)?;
    let f_stop = d.positive("f_stop_Hz", 40e6)?;
    if !(f_stop > f_start) {
        return Err(d.err("f_stop_Hz", "must exceed f_start_Hz"));
    }
    let n_points = d.count("n_points", 2001, 2)? as usize;
    let averages = d.count("averages", 0, 0)? as usize;
    let span = d.positive("analyzer_span_Hz", 5e6)?;
    let analyzer_centre = d.opt_positive("analyzer_centre_Hz")?;
    let pa = AnalyzerSettings::paper(0.0, 1);
    let centre = analyzer_centre.unwrap_or(0.0);
    let analyzer = AnalyzerSettings {
        rbw: d.positive("analyzer_rbw_Hz", pa.rbw)?,
        sweep_time: d.positive("analyzer_sweep_time_s", pa.sweep_time)?,
        n_sweeps: d.count("analyzer_sweeps", 1, 1)? as usize,
        start_frequency: centre - 0.5 * span,
        stop_frequency: centre + 0.5 * span,
        n_bins: d.count("analyzer_bins", pa.n_bins as u64, 2)? as usize,
    };
    if analyzer.rbw < 1.0 / analyzer.sweep_time {
        return Err(d.err("analyzer_rbw_Hz", "finer than 1/analyzer_sweep_time_s"));
    }
    detectors
        .validate()
        .map_err(|e| config_error("detection", e.to_string()))?;
    d.finish(&mut out)?;
    e.finish(&mut out)?;

    let resolved = toml::to_string(&out).map_err(|e| config_error("syntax", e.to_string()))?;
    Ok(Scenario {
        seed,
        crystal,
        targets_temperature: targets_t,
        targets_voltage: targets_v,
        geometry,
        scan_span,
        max_beat,
        run,
        detection: DetectionSettings {
            detectors,
            splitter,
            model: model_tb,
            f_start,
            f_stop,
            n_points,
            averages,
            analyzer,
            analyzer_centre,
        },
        efficiency,
        resolved,
    })
}
