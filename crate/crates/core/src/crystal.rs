//! Linearized optical model of the birefringent Na:KTP crystal.
//!
//! Each polarization eigenaxis carries an optical path `n·ℓ` that responds
//! linearly to temperature, applied voltage and transverse position. The
//! temperature and voltage derivatives are not known independently; they are
//! fitted so that the cavity tuning matrix reproduces measured coefficients
//! (see [`calibrate_derivatives`]).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cavity::CavityGeometry;
use crate::error::{invalid, Error, Result};

/// Polarization eigenaxis of the type-II crystal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    Signal,
    Idler,
}

impl Polarization {
    pub fn other(self) -> Self {
        match self {
            Polarization::Signal => Polarization::Idler,
            Polarization::Idler => Polarization::Signal,
        }
    }
}

impl FromStr for Polarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "signal" | "s" => Ok(Polarization::Signal),
            "idler" | "i" => Ok(Polarization::Idler),
            other => Err(invalid(format!("unknown polarization tag '{other}'"))),
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::Signal => "signal",
            Polarization::Idler => "idler",
        })
    }
}

/// Environmental operating point of the crystal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrystalState {
    /// Kelvin.
    pub temperature: f64,
    /// Volts across the crystal.
    pub voltage: f64,
    /// Transverse beam position (m) relative to the calibration point.
    pub transverse: f64,
}

impl CrystalState {
    pub fn at_reference(crystal: &CrystalParams) -> Self {
        Self {
            temperature: crystal.reference_temperature,
            voltage: 0.0,
            transverse: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrystalParams {
    /// Physical length ℓ (m).
    pub length: f64,
    pub n_signal: f64,
    pub n_idler: f64,
    /// d(n·ℓ)/dT per axis (m/K), thermal expansion included.
    pub dpath_dt_signal: f64,
    pub dpath_dt_idler: f64,
    /// d(n·ℓ)/dV per axis (m/V).
    pub dpath_dv_signal: f64,
    pub dpath_dv_idler: f64,
    /// ∂(δn)/∂x, transverse birefringence gradient (1/m).
    pub dbirefringence_dx: f64,
    /// Calibration temperature T₀ (K).
    pub reference_temperature: f64,
    /// Largest |T − T₀| (K) for which the linear model is declared valid.
    pub linear_range: f64,
}

impl CrystalParams {
    /// Builds indices symmetrically around the mean: `n_signal = n̄ + δn/2`,
    /// `n_idler = n̄ − δn/2`. All derivatives start at zero.
    pub fn from_mean_index(length: f64, n_mean: f64, birefringence: f64) -> Result<Self> {
        let params = Self {
            length,
            n_signal: n_mean + birefringence / 2.0,
            n_idler: n_mean - birefringence / 2.0,
            dpath_dt_signal: 0.0,
            dpath_dt_idler: 0.0,
            dpath_dv_signal: 0.0,
            dpath_dv_idler: 0.0,
            dbirefringence_dx: 0.0,
            reference_temperature: 298.15,
            linear_range: 0.5,
        };
        params.validate()?;
        Ok(params)
    }

    /// 10 mm Na:KTP, n̄ = 1.8, δn = −0.09, uncalibrated derivatives.
    ///
    /// The negative birefringence makes the ν₋ length coefficient negative.
    pub fn na_ktp() -> Self {
        let mut p = Self::from_mean_index(0.01, 1.8, -0.09).expect("static parameters are valid");
        p.dbirefringence_dx = DEFAULT_DBIREFRINGENCE_DX;
        p
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(invalid("crystal length must be positive"));
        }
        if !(self.n_signal > 1.0 && self.n_idler > 1.0) {
            return Err(invalid("refractive indices must exceed 1"));
        }
        if !(self.linear_range > 0.0) {
            return Err(invalid("linear_range must be positive"));
        }
        let derivs = [
            self.dpath_dt_signal,
            self.dpath_dt_idler,
            self.dpath_dv_signal,
            self.dpath_dv_idler,
            self.dbirefringence_dx,
            self.reference_temperature,
        ];
        if derivs.iter().any(|v| !v.is_finite()) {
            return Err(invalid("crystal derivatives must be finite"));
        }
        Ok(())
    }

    pub fn n_mean(&self) -> f64 {
        0.5 * (self.n_signal + self.n_idler)
    }

    /// δn = n_signal − n_idler.
    pub fn birefringence(&self) -> f64 {
        self.n_signal - self.n_idler
    }

    pub fn index(&self, pol: Polarization) -> f64 {
        match pol {
            Polarization::Signal => self.n_signal,
            Polarization::Idler => self.n_idler,
        }
    }

    pub fn dpath_dt(&self, pol: Polarization) -> f64 {
        match pol {
            Polarization::Signal => self.dpath_dt_signal,
            Polarization::Idler => self.dpath_dt_idler,
        }
    }

    pub fn dpath_dv(&self, pol: Polarization) -> f64 {
        match pol {
            Polarization::Signal => self.dpath_dv_signal,
            Polarization::Idler => self.dpath_dv_idler,
        }
    }

    /// ∂(n·ℓ)/∂x for one axis. The birefringence gradient is split evenly:
    /// the signal path grows by half of it and the idler path shrinks by half.
    pub fn dpath_dx(&self, pol: Polarization) -> f64 {
        let half = 0.5 * self.dbirefringence_dx * self.length;
        match pol {
            Polarization::Signal => half,
            Polarization::Idler => -half,
        }
    }

    /// Optical path n·ℓ (m) of one axis at the given operating point.
    pub fn optical_path(&self, pol: Polarization, state: &CrystalState) -> f64 {
        self.index(pol) * self.length
            + self.dpath_dt(pol) * (state.temperature - self.reference_temperature)
            + self.dpath_dv(pol) * state.voltage
            + self.dpath_dx(pol) * state.transverse
    }

    /// Rejects operating points outside the declared linearization range.
    pub fn check_linear_range(&self, state: &CrystalState) -> Result<()> {
        let dt = (state.temperature - self.reference_temperature).abs();
        if dt > self.linear_range {
            return Err(invalid(format!(
                "|T - T0| = {dt:.3e} K exceeds the linear range {:.3e} K",
                self.linear_range
            )));
        }
        Ok(())
    }

    /// Relabels the axes: signal becomes idler and vice versa.
    pub fn swapped(&self) -> Self {
        Self {
            n_signal: self.n_idler,
            n_idler: self.n_signal,
            dpath_dt_signal: self.dpath_dt_idler,
            dpath_dt_idler: self.dpath_dt_signal,
            dpath_dv_signal: self.dpath_dv_idler,
            dpath_dv_idler: self.dpath_dv_signal,
            dbirefringence_dx: -self.dbirefringence_dx,
            ..self.clone()
        }
    }
}

/// Default transverse birefringence gradient (1/m). Only its product with the
/// vibration amplitude is constrained, and that product is calibrated.
pub const DEFAULT_DBIREFRINGENCE_DX: f64 = 1.0e-2;

/// A pair of target coefficients (∂ν₊/∂X, ∂ν₋/∂X).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningTargets {
    pub plus: f64,
    pub minus: f64,
}

impl TuningTargets {
    pub fn new(plus: f64, minus: f64) -> Self {
        Self { plus, minus }
    }

    /// (−2.12, +0.24) MHz/mK expressed in Hz/K.
    pub fn paper_temperature() -> Self {
        Self::new(-2.12e9, 0.24e9)
    }

    /// (1.34, 0.59) MHz/V expressed in Hz/V.
    pub fn paper_voltage() -> Self {
        Self::new(1.34e6, 0.59e6)
    }
}

/// Per-axis frequency pull coefficients c_j = ν/(L + n_j·ℓ) at the reference
/// point, with ν the degenerate frequency ν_p/2. A path change `a` on axis j
/// moves that axis' resonance by `−c_j·a`.
pub(crate) fn pull_coefficients(crystal: &CrystalParams, geometry: &CavityGeometry) -> (f64, f64) {
    let state = CrystalState::at_reference(crystal);
    let nu = 0.5 * geometry.pump_frequency();
    let c_s = nu / (geometry.air_path + crystal.optical_path(Polarization::Signal, &state));
    let c_i = nu / (geometry.air_path + crystal.optical_path(Polarization::Idler, &state));
    (c_s, c_i)
}

/// Solves −c_s·a_s ∓ c_i·a_i = (target₊, target₋) for the per-axis
/// derivatives (a_s, a_i).
fn solve_axis_pair(c_s: f64, c_i: f64, targets: TuningTargets) -> Result<(f64, f64)> {
    if c_s == 0.0 || c_i == 0.0 || !c_s.is_finite() || !c_i.is_finite() {
        return Err(Error::Singular(format!("pull coefficients c_s={c_s:e}, c_i={c_i:e}")));
    }
    let a_s = -(targets.plus + targets.minus) / (2.0 * c_s);
    let a_i = -(targets.plus - targets.minus) / (2.0 * c_i);
    Ok((a_s, a_i))
}

/// Fits the temperature and voltage path derivatives of `base` so that the
/// tuning matrix at `geometry` reproduces the given (∂ν₊, ∂ν₋) targets.
pub fn calibrate_derivatives(
    base: &CrystalParams,
    geometry: &CavityGeometry,
    targets_t: TuningTargets,
    targets_v: TuningTargets,
) -> Result<CrystalParams> {
    base.validate()?;
    let (c_s, c_i) = pull_coefficients(base, geometry);
    let (dt_s, dt_i) = solve_axis_pair(c_s, c_i, targets_t)?;
    let (dv_s, dv_i) = solve_axis_pair(c_s, c_i, targets_v)?;
    Ok(CrystalParams {
        dpath_dt_signal: dt_s,
        dpath_dt_idler: dt_i,
        dpath_dv_signal: dv_s,
        dpath_dv_idler: dv_i,
        ..base.clone()
    })
}
