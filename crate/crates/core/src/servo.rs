//! Time-domain simulation of the free-running and dither-locked OPO.
//!
//! The slow drive processes (pump, temperature, length noise and transverse
//! vibration) are advanced once per lock-in interval, which is the loop
//! update rate. Inside an interval the dither is resolved with
//! `steps_per_period` samples per dither cycle; the power seen by the
//! lock-in is evaluated at each of those samples.
//!
//! The sum detuning Δ₊ = ν_s,res + ν_i,res − ν_p and the beat ν₋ are
//! linearized around the starting point with the tuning matrix. An
//! oscillating mode pair keeps running while its detuning leaves it above
//! threshold with the hot-cavity width; once it would stop, the
//! intra-cluster neighbour closest to resonance takes over.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cavity::{
    intra_cluster_steps, transverse_coefficients, tuning_matrix, Actuator, CavityGeometry, TuningMatrix,
};
use crate::crystal::{calibrate_derivatives, CrystalParams, TuningTargets};
use crate::efficiency::EfficiencyModel;
use crate::error::{invalid, Error, Result};
use crate::noise::{fill_normal, LineStep, NoiseBudget, OuStep};
use crate::series::TimeSeries;
use crate::{rng_from_seed, Execution, SimRng};

/// Static description of the oscillator being simulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plant {
    pub crystal: CrystalParams,
    pub geometry: CavityGeometry,
    /// Pump power in units of threshold.
    pub pump_ratio: f64,
    /// Output power at zero sum detuning (W).
    pub max_output_power: f64,
    /// ν₋ at t = 0 (Hz).
    pub initial_beat: f64,
    /// Δ₊ at t = 0 (Hz).
    pub initial_plus_detuning: f64,
}

pub const DEFAULT_PUMP_RATIO: f64 = 4.0;
pub const DEFAULT_INITIAL_BEAT: f64 = 4.0e6;

impl Plant {
    /// Na:KTP crystal with calibrated temperature and voltage coefficients,
    /// four times above threshold, 4 MHz initial beat.
    pub fn paper() -> Self {
        let geometry = CavityGeometry::paper();
        let crystal = calibrate_derivatives(
            &CrystalParams::na_ktp(),
            &geometry,
            TuningTargets::paper_temperature(),
            TuningTargets::paper_voltage(),
        )
        .expect("tabulated tuning targets are solvable");
        let eff = EfficiencyModel::paper();
        Self {
            crystal,
            geometry,
            pump_ratio: DEFAULT_PUMP_RATIO,
            max_output_power: eff.output_power(DEFAULT_PUMP_RATIO * eff.p_threshold),
            initial_beat: DEFAULT_INITIAL_BEAT,
            initial_plus_detuning: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.crystal.validate()?;
        self.geometry.validate(&self.crystal)?;
        if !(self.pump_ratio > 1.0) {
            return Err(invalid("pump_ratio must exceed 1 for oscillation"));
        }
        if !(self.max_output_power > 0.0) {
            return Err(invalid("max_output_power must be positive"));
        }
        if !(self.initial_beat.is_finite() && self.initial_plus_detuning.is_finite()) {
            return Err(invalid("initial frequencies must be finite"));
        }
        Ok(())
    }

    pub fn tuning(&self) -> TuningMatrix {
        tuning_matrix(&self.crystal, &self.geometry)
    }
}

/// Second loop feeding the beat-note error back to the crystal voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectroOpticLoop {
    /// Unity-gain frequency of the integrator (Hz).
    pub bandwidth: f64,
    /// Largest |V| the driver can supply (V).
    pub voltage_range: f64,
}

impl Default for ElectroOpticLoop {
    fn default() -> Self {
        Self {
            bandwidth: 1e3,
            voltage_range: 200.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServoConfig {
    pub dither_frequency: f64,
    /// Peak PZT excursion of the dither (m).
    pub dither_amplitude: f64,
    /// Lock-in integration time, rounded to whole dither periods (s).
    pub lockin_time_constant: f64,
    /// Proportional gain (m per Hz of error). Derived from the bandwidth if unset.
    pub proportional_gain: Option<f64>,
    /// Integral gain (m per Hz·s of error). Derived from the bandwidth if unset.
    pub integral_gain: Option<f64>,
    pub servo_bandwidth: f64,
    /// Largest |PZT offset| (m).
    pub actuator_range: f64,
    /// Cold half width over the RMS error noise of one lock-in output.
    pub error_signal_snr: f64,
    /// Samples per dither period.
    pub steps_per_period: usize,
    pub electro_optic: Option<ElectroOpticLoop>,
}

/// Default proportional gain relative to the loop's natural unit 1/|∂ν₊/∂L|.
pub const DEFAULT_PROPORTIONAL_FRACTION: f64 = 0.3;

impl Default for ServoConfig {
    fn default() -> Self {
        Self {
            dither_frequency: 25e3,
            dither_amplitude: 0.2e-9,
            lockin_time_constant: 40e-6,
            proportional_gain: None,
            integral_gain: None,
            servo_bandwidth: 3e3,
            actuator_range: 1e-6,
            error_signal_snr: 1000.0,
            steps_per_period: 10,
            electro_optic: None,
        }
    }
}

impl ServoConfig {
    pub fn periods_per_update(&self) -> usize {
        ((self.lockin_time_constant * self.dither_frequency).round() as usize).max(1)
    }

    /// Loop update interval (s).
    pub fn update_interval(&self) -> f64 {
        self.periods_per_update() as f64 / self.dither_frequency
    }

    /// (proportional, integral) gains in m/Hz and m/(Hz·s).
    pub fn gains(&self, tuning: &TuningMatrix) -> (f64, f64) {
        let k = tuning.plus(Actuator::Length).abs();
        let kp = self.proportional_gain.unwrap_or(DEFAULT_PROPORTIONAL_FRACTION / k);
        let ki = self.integral_gain.unwrap_or(2.0 * PI * self.servo_bandwidth / k);
        (kp, ki)
    }

    pub fn validate(&self, tuning: &TuningMatrix) -> Result<()> {
        if !(self.dither_frequency > 0.0 && self.servo_bandwidth > 0.0) {
            return Err(invalid("dither_frequency and servo_bandwidth must be positive"));
        }
        if !(self.dither_frequency > self.servo_bandwidth) {
            return Err(invalid("dither_frequency must exceed servo_bandwidth"));
        }
        if !(self.dither_amplitude > 0.0 && self.dither_amplitude.is_finite()) {
            return Err(invalid("dither_amplitude must be positive"));
        }
        if !(self.lockin_time_constant > 0.0) {
            return Err(invalid("lockin_time_constant must be positive"));
        }
        if !(self.actuator_range > 0.0) {
            return Err(invalid("actuator_range must be positive"));
        }
        if !(self.error_signal_snr > 0.0) {
            return Err(invalid("error_signal_snr must be positive"));
        }
        if self.steps_per_period < 10 {
            return Err(invalid("steps_per_period must be at least 10 to resolve the dither"));
        }
        if let Some(eo) = self.electro_optic {
            if !(eo.bandwidth > 0.0 && eo.voltage_range > 0.0) {
                return Err(invalid("electro-optic bandwidth and voltage range must be positive"));
            }
        }
        let (kp, ki) = self.gains(tuning);
        if !(kp.is_finite() && ki.is_finite() && kp >= 0.0 && ki >= 0.0) {
            return Err(invalid("loop gains must be finite and non-negative"));
        }
        // Sampled PI with one update of delay: z² + (a + b − 1)z − a = 0.
        let k = tuning.plus(Actuator::Length).abs();
        let (a, b) = (kp * k, ki * k * self.update_interval());
        if !loop_is_stable(a, b) {
            return Err(invalid(format!(
                "loop gains unstable at this update rate (normalized P {a:.3}, I {b:.3})"
            )));
        }
        Ok(())
    }
}

fn loop_is_stable(a: f64, b: f64) -> bool {
    // Jury conditions for z² + c1 z + c0.
    let (c1, c0) = (a + b - 1.0, -a);
    c0.abs() < 1.0 && 1.0 + c1 + c0 > 0.0 && 1.0 - c1 + c0 > 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RunMode {
    Locked,
    Free,
}

/// Dynamic values during a run. Lengths, temperature, voltage and pump are
/// deviations from the starting operating point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimState {
    pub time: f64,
    /// Air-path deviation: PZT offset plus length noise (m).
    pub length: f64,
    pub actuator: f64,
    pub length_noise: f64,
    /// Transverse crystal displacement (m).
    pub transverse: f64,
    pub temperature: f64,
    pub voltage: f64,
    pub pump: f64,
    /// Sum detuning without the dither (Hz).
    pub nu_plus_detuning: f64,
    pub nu_minus: f64,
    /// Instantaneous output power including dither modulation (W).
    pub output_power: f64,
    /// Last lock-in output, in Hz of equivalent Δ₊.
    pub error_signal: f64,
    pub integrator: f64,
    pub saturated: bool,
    pub hops: u64,
}

/// Stepper for a single run; holds its own RNG so a seed fixes everything.
#[derive(Debug, Clone)]
pub struct Simulator {
    state: SimState,
    rng: SimRng,
    locked: bool,
    // Tuning coefficients: columns of the ν₊ and ν₋ rows.
    plus_l: f64,
    plus_t: f64,
    plus_v: f64,
    plus_x: f64,
    minus_l: f64,
    minus_t: f64,
    minus_v: f64,
    minus_x: f64,
    asymmetry: f64,
    // Offsets fixing Δ₊ and ν₋ at the start, updated by mode hops.
    plus_offset: f64,
    minus_offset: f64,
    hop_plus: f64,
    hop_minus: f64,
    survival_limit: f64,
    cold_hwhm: f64,
    max_power: f64,
    // Noise propagators at the update interval.
    pump_step: OuStep,
    temp_step: OuStep,
    length_step: OuStep,
    line_steps: Vec<LineStep>,
    lines: Vec<(f64, f64)>,
    pump_wander: f64,
    ramp_rate: f64,
    ramp_center: f64,
    normals: Vec<f64>,
    // Dither and lock-in.
    dither_table: Vec<f64>,
    dither_depth: f64,
    /// d⟨P·sin⟩/dΔ₊ at zero detuning, for the actual dither depth.
    discriminant_slope: f64,
    phase_index: usize,
    demod_sum: f64,
    power_sum: f64,
    update_interval: f64,
    fast_dt: f64,
    polarity: f64,
    kp: f64,
    ki: f64,
    actuator_range: f64,
    error_sigma: f64,
    eo: Option<(f64, f64)>,
    beat_target: f64,
    // Per-update results for recording.
    last_update_power: f64,
    hop_pending: bool,
    started: bool,
}

impl Simulator {
    /// `ramp_center` is the time at which the pump ramp crosses zero.
    pub fn new(
        plant: &Plant,
        noise: &NoiseBudget,
        servo: &ServoConfig,
        mode: RunMode,
        ramp_center: f64,
        seed: u64,
    ) -> Result<Self> {
        plant.validate()?;
        noise.validate()?;
        let tuning = plant.tuning();
        servo.validate(&tuning)?;
        let (kp, ki) = servo.gains(&tuning);
        let (plus_x, minus_x) = transverse_coefficients(&plant.crystal, &plant.geometry);
        let (hop_plus, hop_minus) = intra_cluster_steps(&plant.crystal, &plant.geometry);
        let dt = servo.update_interval();
        let steps = servo.periods_per_update() * servo.steps_per_period;
        let dither_table = (0..steps)
            .map(|j| (2.0 * PI * j as f64 / servo.steps_per_period as f64).sin())
            .collect();
        let plus_l = tuning.plus(Actuator::Length);
        let minus_v = tuning.minus(Actuator::Voltage);
        let eo = match servo.electro_optic {
            Some(eo) if minus_v != 0.0 => Some((2.0 * PI * eo.bandwidth * dt / minus_v, eo.voltage_range)),
            Some(_) => {
                return Err(invalid(
                    "electro-optic loop needs a nonzero voltage coefficient on the beat",
                ))
            }
            None => None,
        };
        // A pair dies once (1 + (Δ₊/2γ_hot)²)² reaches the pump ratio.
        let survival_limit = 2.0 * plant.geometry.hot_hwhm * (plant.pump_ratio.sqrt() - 1.0).sqrt();

        let mut sim = Self {
            state: SimState::default(),
            rng: rng_from_seed(seed),
            locked: mode == RunMode::Locked,
            plus_l,
            plus_t: tuning.plus(Actuator::Temperature),
            plus_v: tuning.plus(Actuator::Voltage),
            plus_x,
            minus_l: tuning.minus(Actuator::Length),
            minus_t: tuning.minus(Actuator::Temperature),
            minus_v,
            minus_x,
            asymmetry: plant.geometry.linewidth_asymmetry,
            plus_offset: 0.0,
            minus_offset: 0.0,
            hop_plus,
            hop_minus,
            survival_limit,
            cold_hwhm: plant.geometry.cold_hwhm,
            max_power: plant.max_output_power,
            pump_step: noise.pump_process().discretize(dt),
            temp_step: noise.temperature_process().discretize(dt),
            length_step: noise.length_process().discretize(dt),
            line_steps: noise.vibration_lines.iter().map(|l| l.discretize(dt)).collect(),
            lines: vec![(0.0, 0.0); noise.vibration_lines.len()],
            pump_wander: 0.0,
            ramp_rate: noise.pump_drift / 60.0,
            ramp_center,
            normals: vec![0.0; 4 + 2 * noise.vibration_lines.len()],
            dither_table,
            dither_depth: plus_l * servo.dither_amplitude,
            discriminant_slope: 0.0,
            phase_index: 0,
            demod_sum: 0.0,
            power_sum: 0.0,
            update_interval: dt,
            fast_dt: dt / steps as f64,
            polarity: -plus_l.signum(),
            kp,
            ki,
            actuator_range: servo.actuator_range,
            error_sigma: plant.geometry.cold_hwhm / servo.error_signal_snr,
            eo,
            beat_target: plant.initial_beat,
            last_update_power: 0.0,
            hop_pending: false,
            started: false,
        };

        let gamma2 = plant.geometry.cold_hwhm * plant.geometry.cold_hwhm;
        sim.discriminant_slope = sim
            .dither_table
            .iter()
            .map(|&sin| {
                let u = sim.dither_depth * sin;
                let q = 1.0 + u * u / gamma2;
                -2.0 * sim.max_power * u / (gamma2 * q * q) * sin
            })
            .sum::<f64>()
            / sim.dither_table.len() as f64;

        // Stationary start for every process, in a fixed draw order.
        let mut init = vec![0.0; 3 + 2 * noise.vibration_lines.len()];
        fill_normal(&mut sim.rng, &mut init);
        sim.pump_wander = noise.pump_process().sigma * init[0];
        sim.state.temperature = noise.temp_sigma * init[1];
        sim.state.length_noise = noise.length_sigma * init[2];
        for (k, line) in noise.vibration_lines.iter().enumerate() {
            sim.lines[k] = (line.amplitude * init[3 + 2 * k], line.amplitude * init[4 + 2 * k]);
        }
        sim.state.transverse = sim.lines.iter().map(|z| z.0).sum();
        sim.state.pump = sim.pump_wander + sim.ramp_rate * (0.0 - ramp_center);

        // PZT starts where it cancels the noise so that Δ₊(0) is the
        // requested detuning; ν₋(0) is pinned by the offset.
        let plus_noise = sim.raw_plus(sim.state.length_noise, 0.0);
        sim.state.actuator = (-plus_noise / plus_l).clamp(-servo.actuator_range, servo.actuator_range);
        sim.state.length = sim.state.actuator + sim.state.length_noise;
        sim.plus_offset = plant.initial_plus_detuning - sim.raw_plus(sim.state.length, 0.0);
        sim.state.nu_plus_detuning = plant.initial_plus_detuning;
        sim.minus_offset = 0.0;
        sim.minus_offset = plant.initial_beat - sim.current_minus();
        sim.state.nu_minus = plant.initial_beat;
        sim.state.integrator = sim.polarity * sim.state.actuator;
        sim.state.output_power = sim.power(sim.state.nu_plus_detuning);
        sim.last_update_power = sim.state.output_power;
        Ok(sim)
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn fast_dt(&self) -> f64 {
        self.fast_dt
    }

    pub fn update_interval(&self) -> f64 {
        self.update_interval
    }

    pub fn steps_per_update(&self) -> usize {
        self.dither_table.len()
    }

    fn raw_plus(&self, length: f64, pump_extra: f64) -> f64 {
        let s = &self.state;
        self.plus_l * length + self.plus_t * s.temperature + self.plus_v * s.voltage + self.plus_x * s.transverse
            - (s.pump + pump_extra)
    }

    fn current_minus(&self) -> f64 {
        let s = &self.state;
        self.minus_offset
            + self.minus_l * s.length
            + self.minus_t * s.temperature
            + self.minus_v * s.voltage
            + self.minus_x * s.transverse
            - self.asymmetry * s.nu_plus_detuning
    }

    #[inline]
    fn power(&self, detuning: f64) -> f64 {
        let u = detuning / self.cold_hwhm;
        self.max_power / (1.0 + u * u)
    }

    /// Advances the drive processes to the start of the next update interval.
    fn advance_noise(&mut self) {
        let n = &self.normals;
        self.pump_wander = self.pump_step.advance(self.pump_wander, n[0]);
        let s = &mut self.state;
        s.temperature = self.temp_step.advance(s.temperature, n[1]);
        s.length_noise = self.length_step.advance(s.length_noise, n[2]);
        let mut x = 0.0;
        for (k, step) in self.line_steps.iter().enumerate() {
            self.lines[k] = step.advance(self.lines[k], n[4 + 2 * k], n[5 + 2 * k]);
            x += self.lines[k].0;
        }
        s.transverse = x;
        s.pump = self.pump_wander + self.ramp_rate * (s.time - self.ramp_center);
        s.length = s.actuator + s.length_noise;
    }

    fn refresh_frequencies(&mut self) {
        let mut plus = self.plus_offset + self.raw_plus(self.state.length, 0.0);
        while plus.abs() > self.survival_limit {
            // Neighbour (p_s ± 1, p_i ∓ 1) shifts Δ₊ by ±(Δ_s − Δ_i).
            let dir = -plus.signum() * self.hop_plus.signum();
            let next = plus + dir * self.hop_plus;
            if next.abs() >= plus.abs() {
                break;
            }
            self.plus_offset += dir * self.hop_plus;
            self.minus_offset += dir * self.hop_minus;
            plus = next;
            self.state.hops += 1;
            self.hop_pending = true;
        }
        self.state.nu_plus_detuning = plus;
        self.state.nu_minus = self.current_minus();
    }

    /// Closes the lock-in interval: demodulated error, PI update, EO loop.
    fn close_update(&mut self) {
        let steps = self.dither_table.len() as f64;
        let demod = self.demod_sum / steps;
        self.last_update_power = self.power_sum / steps;
        self.demod_sum = 0.0;
        self.power_sum = 0.0;
        let error = demod / self.discriminant_slope + self.error_sigma * self.normals[3];
        let s = &mut self.state;
        s.error_signal = error;
        if self.locked {
            s.integrator += self.ki * self.update_interval * error;
            let command = self.polarity * (self.kp * error + s.integrator);
            let clamped = command.clamp(-self.actuator_range, self.actuator_range);
            s.saturated = clamped != command;
            if s.saturated {
                s.integrator = self.polarity * clamped - self.kp * error;
            }
            s.actuator = clamped;
        }
        if let Some((gain, range)) = self.eo {
            s.voltage = (s.voltage - gain * (s.nu_minus - self.beat_target)).clamp(-range, range);
        }
        s.time += self.update_interval;
    }

    /// One sample of the dither cycle.
    pub fn step(&mut self) -> &SimState {
        if self.phase_index == 0 {
            // Every interval draws the same set of normals, used or not.
            fill_normal(&mut self.rng, &mut self.normals);
            if self.started {
                self.advance_noise();
            }
            self.started = true;
            self.refresh_frequencies();
        }
        let sin = self.dither_table[self.phase_index];
        let p = self.power(self.state.nu_plus_detuning + self.dither_depth * sin);
        self.state.output_power = p;
        self.demod_sum += p * sin;
        self.power_sum += p;
        self.phase_index += 1;
        if self.phase_index == self.dither_table.len() {
            self.phase_index = 0;
            self.close_update();
        }
        &self.state
    }

    /// Runs one full lock-in interval; returns (mean power, hop happened).
    pub fn step_update(&mut self) -> (f64, bool) {
        for _ in 0..self.dither_table.len() {
            self.step();
        }
        let hop = std::mem::take(&mut self.hop_pending);
        (self.last_update_power, hop)
    }
}

/// Everything needed for a run besides mode and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub plant: Plant,
    pub noise: NoiseBudget,
    pub servo: ServoConfig,
    pub duration: f64,
    pub sample_rate: f64,
}

pub const DEFAULT_SAMPLE_RATE: f64 = 5e3;

/// Hard cap on recorded rows.
pub const MAX_RECORDS: usize = 50_000_000;

impl RunConfig {
    pub fn paper(duration: f64) -> Self {
        Self {
            plant: Plant::paper(),
            noise: NoiseBudget::paper(),
            servo: ServoConfig::default(),
            duration,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }

    /// Lock-in updates per recorded row.
    pub fn updates_per_record(&self) -> Result<usize> {
        let per = (1.0 / (self.sample_rate * self.servo.update_interval())).round();
        if !(self.sample_rate > 0.0) || !(per >= 1.0) {
            return Err(invalid(format!(
                "sample_rate must be positive and at most the loop update rate {:.1} Hz",
                1.0 / self.servo.update_interval()
            )));
        }
        Ok(per as usize)
    }
}

/// Simulates `duration` seconds and records dither-averaged rows at
/// (approximately) `sample_rate`. Rows are interval means; `t` is the start.
pub fn run(cfg: &RunConfig, mode: RunMode, seed: u64) -> Result<TimeSeries> {
    if !(cfg.duration > 0.0 && cfg.duration.is_finite()) {
        return Err(invalid("duration must be positive"));
    }
    let per = cfg.updates_per_record()?;
    let record_dt = per as f64 * cfg.servo.update_interval();
    let n_rows = (cfg.duration / record_dt + 1e-9).floor() as usize;
    if n_rows > MAX_RECORDS {
        return Err(invalid(format!("{n_rows} rows exceed the record limit {MAX_RECORDS}")));
    }
    let mut sim = Simulator::new(&cfg.plant, &cfg.noise, &cfg.servo, mode, 0.5 * cfg.duration, seed)?;
    let mut out = TimeSeries::with_capacity(n_rows);
    for row in 0..n_rows {
        let (mut nm, mut np, mut pw, mut hop) = (0.0, 0.0, 0.0, false);
        for _ in 0..per {
            let (p, h) = sim.step_update();
            let f = sim.state();
            nm += f.nu_minus;
            np += f.nu_plus_detuning;
            pw += p;
            hop |= h;
            if sim.state().saturated {
                out.saturated_updates += 1;
            }
        }
        let k = per as f64;
        out.push(row as f64 * record_dt, nm / k, np / k, pw / k, hop);
    }
    Ok(out)
}

/// Locked ν₋ range averaged over several seeds.
pub fn mean_locked_range(cfg: &RunConfig, seeds: &[u64], exec: Execution) -> Result<f64> {
    let ranges = exec.map(seeds, |&s| run(cfg, RunMode::Locked, s).map(|ts| ts.nu_minus_range()));
    let mut total = 0.0;
    for r in ranges {
        total += r?;
    }
    Ok(total / seeds.len().max(1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VibrationCalibration {
    pub noise: NoiseBudget,
    /// Factor applied to the input amplitudes.
    pub scale: f64,
    pub achieved_range: f64,
    pub probes: usize,
}

/// Scales the vibration amplitudes by bisection until the mean locked ν₋
/// range over `seeds` is within `tolerance` (relative) of `target`.
pub fn calibrate_vibration_coupling(
    target: f64,
    cfg: &RunConfig,
    seeds: &[u64],
    tolerance: f64,
    exec: Execution,
) -> Result<VibrationCalibration> {
    if !(target >= 0.0 && target.is_finite()) {
        return Err(invalid("target range must be finite and non-negative"));
    }
    if seeds.is_empty() {
        return Err(invalid("at least one seed is needed"));
    }
    let mut probes = 0usize;
    let mut eval = |scale: f64| -> Result<f64> {
        probes += 1;
        let mut c = cfg.clone();
        c.noise = cfg.noise.with_vibration_scale(scale);
        mean_locked_range(&c, seeds, exec)
    };
    let done = |scale: f64, achieved: f64, probes: usize| VibrationCalibration {
        noise: cfg.noise.with_vibration_scale(scale),
        scale,
        achieved_range: achieved,
        probes,
    };
    let close = |r: f64| (r - target).abs() <= tolerance * target;

    let total_amplitude: f64 = cfg.noise.vibration_lines.iter().map(|l| l.amplitude).sum();
    let base = eval(1.0)?;
    if close(base) || (target == 0.0 && base == 0.0) {
        return Ok(done(1.0, base, probes));
    }
    if total_amplitude == 0.0 {
        return Err(Error::NotBracketed { target, achieved: base });
    }
    let floor = eval(0.0)?;
    if floor > target {
        return Err(Error::NotBracketed {
            target,
            achieved: floor,
        });
    }
    let (mut lo, mut hi, mut f_hi) = if base < target {
        (1.0, 2.0, f64::NAN)
    } else {
        (0.0, 1.0, base)
    };
    if base < target {
        loop {
            f_hi = eval(hi)?;
            if close(f_hi) {
                return Ok(done(hi, f_hi, probes));
            }
            if f_hi > target {
                break;
            }
            lo = hi;
            hi *= 2.0;
            if hi > 65536.0 {
                return Err(Error::NotBracketed { target, achieved: f_hi });
            }
        }
    }
    let mut best = (hi, f_hi);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let f = eval(mid)?;
        if (f - target).abs() < (best.1 - target).abs() {
            best = (mid, f);
        }
        if close(f) {
            return Ok(done(mid, f, probes));
        }
        if f < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NotBracketed {
        target,
        achieved: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quiet(duration: f64) -> RunConfig {
        let mut c = RunConfig::paper(duration);
        c.noise = NoiseBudget::quiet();
        c.servo.error_signal_snr = f64::INFINITY;
        c
    }

    #[test]
    fn stability_region() {
        assert!(loop_is_stable(0.3, 0.754));
        assert!(!loop_is_stable(1.5, 0.754));
        assert!(!loop_is_stable(0.3, 2.5));
        let t = Plant::paper().tuning();
        assert!(ServoConfig::default().validate(&t).is_ok());
        let slow_lockin = ServoConfig {
            lockin_time_constant: 200e-6,
            ..ServoConfig::default()
        };
        assert!(slow_lockin.validate(&t).is_err());
        let coarse = ServoConfig {
            steps_per_period: 4,
            ..ServoConfig::default()
        };
        assert!(coarse.validate(&t).is_err());
        let slow_dither = ServoConfig {
            dither_frequency: 2e3,
            ..ServoConfig::default()
        };
        assert!(slow_dither.validate(&t).is_err());
    }

    #[test]
    fn noiseless_lock_acquisition() {
        let mut c = quiet(0.01);
        c.plant.initial_plus_detuning = 1e6;
        let mut sim = Simulator::new(&c.plant, &c.noise, &c.servo, RunMode::Locked, 0.0, 1).unwrap();
        let settle = 5.0 / c.servo.servo_bandwidth;
        let n = (settle / sim.update_interval()).ceil() as usize;
        for _ in 0..n {
            sim.step_update();
        }
        assert!(
            sim.state().nu_plus_detuning.abs() < 1e3,
            "{}",
            sim.state().nu_plus_detuning
        );
        assert!(sim.state().error_signal.abs() < 2e3);
    }

    #[test]
    fn error_signal_is_odd() {
        let mut errs = Vec::new();
        for d in [2e5, -2e5] {
            let mut c = quiet(0.01);
            c.plant.initial_plus_detuning = d;
            let mut sim = Simulator::new(&c.plant, &c.noise, &c.servo, RunMode::Free, 0.0, 1).unwrap();
            sim.step_update();
            errs.push(sim.state().error_signal);
        }
        assert!(errs[0] > 0.0 && errs[1] < 0.0);
        assert_relative_eq!(errs[0], -errs[1], max_relative = 1e-12);
        // The discriminant is normalized to read Δ₊ near zero.
        assert_relative_eq!(errs[0], 2e5, max_relative = 0.02);
    }

    #[test]
    fn free_quiet_run_is_constant() {
        let c = quiet(0.05);
        let ts = run(&c, RunMode::Free, 3).unwrap();
        assert!(ts.nu_minus.iter().all(|&v| v == c.plant.initial_beat));
        assert!(ts.nu_plus_detuning.iter().all(|&v| v == 0.0));
        let p0 = ts.power[0];
        assert!(ts.power.iter().all(|&p| p == p0));
        assert!(p0 < c.plant.max_output_power);
    }

    #[test]
    fn locked_quiet_run_is_constant() {
        let c = quiet(0.05);
        let ts = run(&c, RunMode::Locked, 3).unwrap();
        assert!(ts.nu_minus_range() < 1e-6);
    }

    #[test]
    fn same_seed_same_series() {
        let c = RunConfig::paper(0.2);
        let a = run(&c, RunMode::Locked, 11).unwrap();
        let b = run(&c, RunMode::Locked, 11).unwrap();
        assert_eq!(a, b);
        let d = run(&c, RunMode::Locked, 12).unwrap();
        assert_ne!(a.nu_minus, d.nu_minus);
    }

    #[test]
    fn saturation_is_flagged() {
        let mut c = RunConfig::paper(0.2);
        c.servo.actuator_range = 1e-13;
        c.noise.length_sigma = 1e-9;
        let ts = run(&c, RunMode::Locked, 5).unwrap();
        assert!(ts.saturated_updates > 0);
    }

    #[test]
    fn large_detuning_hops_to_neighbour() {
        let mut c = quiet(0.002);
        let (hop_plus, hop_minus) = intra_cluster_steps(&c.plant.crystal, &c.plant.geometry);
        c.plant.initial_plus_detuning = 40e6;
        let ts = run(&c, RunMode::Free, 0).unwrap();
        assert!(ts.hop[0]);
        let shifts = ((40e6 - ts.nu_plus_detuning[0]) / hop_plus).round();
        assert_eq!(shifts, 2.0);
        assert!(ts.nu_plus_detuning[0].abs() <= 20e6);
        // Each hop moves the beat by one intra-cluster beat step.
        let expect = c.plant.initial_beat - shifts * hop_minus
            + c.plant.geometry.linewidth_asymmetry * (40e6 - ts.nu_plus_detuning[0]);
        assert_relative_eq!(ts.nu_minus[0], expect, max_relative = 1e-9);
    }

    #[test]
    fn sample_rate_must_fit_loop_rate() {
        let mut c = quiet(0.01);
        c.sample_rate = 1e6;
        assert!(run(&c, RunMode::Free, 0).is_err());
    }

    #[test]
    fn zero_target_with_silent_vibration() {
        let mut c = quiet(0.05);
        c.noise = c.noise.with_vibration_scale(0.0);
        let cal = calibrate_vibration_coupling(0.0, &c, &[1], 0.1, Execution::Sequential).unwrap();
        assert_eq!(cal.achieved_range, 0.0);
    }
}
