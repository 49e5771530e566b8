//! Doubly resonant standing-wave cavity around the birefringent crystal.
//!
//! Signal and idler resonate on orthogonal axes of one cavity, so each sees
//! its own free spectral range. Requiring both to be resonant while their
//! frequencies add up to the pump selects a sparse set of cavity lengths: the
//! cluster structure. Clusters repeat every λ_p/2 of air path; inside a
//! cluster neighbouring modes are a birefringence-sized step apart.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::crystal::{pull_coefficients, CrystalParams, CrystalState, Polarization};
use crate::error::{invalid, Result};
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    /// Air path L outside the crystal (m).
    pub air_path: f64,
    /// Pump wavelength λ_p (m).
    pub pump_wavelength: f64,
    /// Cold-cavity half width at half maximum (Hz).
    pub cold_hwhm: f64,
    /// Half width of an oscillating ("hot") mode (Hz). Sets how far a running
    /// mode can be detuned before a neighbour takes over.
    pub hot_hwhm: f64,
    /// (γ_s − γ_i)/(γ_s + γ_i): relative imbalance of the signal and idler
    /// cavity decay rates. Controls how a sum detuning pulls the beat note.
    pub linewidth_asymmetry: f64,
    pub mirror_r_signal_in: f64,
    pub mirror_r_signal_out: f64,
    pub mirror_r_pump_in: f64,
    pub mirror_r_pump_out: f64,
    /// Mirror radius of curvature (m).
    pub mirror_curvature: f64,
    /// Mirror separation (m); should equal air path plus crystal length.
    pub mirror_separation: f64,
}

impl CavityGeometry {
    /// Near-concentric 10.2 cm resonator with 5 cm mirrors, 3 MHz cold HWHM.
    pub fn paper() -> Self {
        Self {
            air_path: 0.092,
            pump_wavelength: 532e-9,
            cold_hwhm: 3.0e6,
            hot_hwhm: 10.0e6,
            linewidth_asymmetry: DEFAULT_LINEWIDTH_ASYMMETRY,
            mirror_r_signal_in: 0.999,
            mirror_r_signal_out: 0.990,
            mirror_r_pump_in: 0.6,
            mirror_r_pump_out: 0.1,
            mirror_curvature: 0.05,
            mirror_separation: 0.102,
        }
    }

    pub fn pump_frequency(&self) -> f64 {
        SPEED_OF_LIGHT / self.pump_wavelength
    }

    pub fn validate(&self, crystal: &CrystalParams) -> Result<()> {
        if !(self.air_path > 0.0) {
            return Err(invalid("air_path must be positive"));
        }
        if !(self.pump_wavelength > 0.0) {
            return Err(invalid("pump_wavelength must be positive"));
        }
        if !(self.cold_hwhm > 0.0 && self.hot_hwhm > 0.0) {
            return Err(invalid("cavity half widths must be positive"));
        }
        if !(self.linewidth_asymmetry.abs() < 1.0) {
            return Err(invalid("linewidth_asymmetry must lie in (-1, 1)"));
        }
        for (name, r) in [
            ("mirror_r_signal_in", self.mirror_r_signal_in),
            ("mirror_r_signal_out", self.mirror_r_signal_out),
            ("mirror_r_pump_in", self.mirror_r_pump_in),
            ("mirror_r_pump_out", self.mirror_r_pump_out),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        let expected = self.air_path + crystal.length;
        if ((self.mirror_separation - expected) / expected).abs() > 0.01 {
            return Err(invalid(format!(
                "mirror_separation {:.4e} m differs from air path + crystal {:.4e} m by more than 1%",
                self.mirror_separation, expected
            )));
        }
        Ok(())
    }
}

/// Chosen with the default noise budget so that a free-running record shows
/// a beat-note drift of about 2 MHz.
pub const DEFAULT_LINEWIDTH_ASYMMETRY: f64 = 0.17;

/// Resonance frequency ν = p·c / (2(L + n·ℓ)) of mode number `p` on one axis.
pub fn resonance_frequency(
    crystal: &CrystalParams,
    pol: Polarization,
    p: u64,
    air_path: f64,
    state: &CrystalState,
) -> Result<f64> {
    if p == 0 {
        return Err(invalid("mode number must be at least 1"));
    }
    Ok(p as f64 * fsr(crystal, pol, air_path, state))
}

/// Free spectral range c / (2(L + n·ℓ)) of one axis.
pub fn fsr(crystal: &CrystalParams, pol: Polarization, air_path: f64, state: &CrystalState) -> f64 {
    SPEED_OF_LIGHT / (2.0 * (air_path + crystal.optical_path(pol, state)))
}

/// dν/dL at fixed mode number for one axis at degeneracy: −ν/(L + n·ℓ).
pub fn length_tuning_rate(
    crystal: &CrystalParams,
    geometry: &CavityGeometry,
    pol: Polarization,
    state: &CrystalState,
) -> f64 {
    let nu = 0.5 * geometry.pump_frequency();
    -nu / (geometry.air_path + crystal.optical_path(pol, state))
}

/// Tuning knob of the OPO frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Actuator {
    /// Air path (Hz/m).
    Length,
    /// Crystal temperature (Hz/K).
    Temperature,
    /// Crystal voltage (Hz/V).
    Voltage,
    /// Pump frequency (Hz/Hz).
    Pump,
}

impl Actuator {
    pub const ALL: [Actuator; 4] = [
        Actuator::Length,
        Actuator::Temperature,
        Actuator::Voltage,
        Actuator::Pump,
    ];

    fn column(self) -> usize {
        self as usize
    }
}

/// Partial derivatives of ν₊ = ν_s + ν_i and ν₋ = ν_s − ν_i with respect to
/// each actuator, evaluated at degeneracy with the mode numbers frozen.
///
/// For L, T and V the ν₊ row describes how the sum of the two cavity
/// resonances moves; the pump column is (1, 0) because the oscillating sum is
/// pinned to the pump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningMatrix {
    pub plus: [f64; 4],
    pub minus: [f64; 4],
}

impl TuningMatrix {
    pub fn plus(&self, a: Actuator) -> f64 {
        self.plus[a.column()]
    }

    pub fn minus(&self, a: Actuator) -> f64 {
        self.minus[a.column()]
    }
}

pub fn tuning_matrix(crystal: &CrystalParams, geometry: &CavityGeometry) -> TuningMatrix {
    let (c_s, c_i) = pull_coefficients(crystal, geometry);
    // Each axis moves by −c_j times its own path change.
    let pair = |da_s: f64, da_i: f64| {
        let (dnu_s, dnu_i) = (-c_s * da_s, -c_i * da_i);
        (dnu_s + dnu_i, dnu_s - dnu_i)
    };
    let (lp, lm) = pair(1.0, 1.0);
    let (tp, tm) = pair(crystal.dpath_dt_signal, crystal.dpath_dt_idler);
    let (vp, vm) = pair(crystal.dpath_dv_signal, crystal.dpath_dv_idler);
    TuningMatrix {
        plus: [lp, tp, vp, 1.0],
        minus: [lm, tm, vm, 0.0],
    }
}

/// (∂ν₊/∂x, ∂ν₋/∂x) from the transverse birefringence gradient (Hz/m).
/// ∂ν₋/∂x ≈ −ν·(∂δn/∂x)·ℓ/(L + n̄ℓ); ∂ν₊/∂x is smaller by the birefringence.
pub fn transverse_coefficients(crystal: &CrystalParams, geometry: &CavityGeometry) -> (f64, f64) {
    let (c_s, c_i) = pull_coefficients(crystal, geometry);
    let dnu_s = -c_s * crystal.dpath_dx(Polarization::Signal);
    let dnu_i = -c_i * crystal.dpath_dx(Polarization::Idler);
    (dnu_s + dnu_i, dnu_s - dnu_i)
}

/// Intra-cluster hop length |δn|/(n̄ + L/ℓ) · λ_p/2, first order in δn.
pub fn mode_hop_spacing(crystal: &CrystalParams, geometry: &CavityGeometry) -> f64 {
    crystal.birefringence().abs() / (crystal.n_mean() + geometry.air_path / crystal.length) * geometry.pump_wavelength
        / 2.0
}

/// Signed changes of (Σ resonances, beat) when the running pair moves to its
/// intra-cluster neighbour (p_s + 1, p_i − 1): (Δ_s − Δ_i, Δ_s + Δ_i).
pub fn intra_cluster_steps(crystal: &CrystalParams, geometry: &CavityGeometry) -> (f64, f64) {
    let state = CrystalState::at_reference(crystal);
    let fs = fsr(crystal, Polarization::Signal, geometry.air_path, &state);
    let fi = fsr(crystal, Polarization::Idler, geometry.air_path, &state);
    (fs - fi, fs + fi)
}

/// Signal/idler mode pair with energy conservation imposed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModePair {
    pub p_signal: u64,
    pub p_idler: u64,
    pub nu_signal: f64,
    pub nu_idler: f64,
    /// Offset of each oscillation frequency from its own cavity resonance.
    pub detuning_signal: f64,
    pub detuning_idler: f64,
    /// ν_s − ν_i.
    pub beat: f64,
}

impl ModePair {
    /// Builds the pair from its cavity resonances. The mismatch to the pump is
    /// shared equally between the two fields and ν_i is set to ν_p − ν_s.
    fn from_resonances(p_signal: u64, p_idler: u64, res_s: f64, res_i: f64, nu_pump: f64) -> Self {
        let detuning = 0.5 * (nu_pump - (res_s + res_i));
        let nu_signal = res_s + detuning;
        let nu_idler = nu_pump - nu_signal;
        Self {
            p_signal,
            p_idler,
            nu_signal,
            nu_idler,
            detuning_signal: detuning,
            detuning_idler: detuning,
            beat: nu_signal - nu_idler,
        }
    }
}

/// Air path L at which the pair (p_s, p_i) is doubly resonant with
/// ν_s + ν_i = ν_p, i.e. p_s/(L + P_s) + p_i/(L + P_i) = 2/λ_p.
pub fn doubly_resonant_length(
    crystal: &CrystalParams,
    state: &CrystalState,
    pump_wavelength: f64,
    p_signal: u64,
    p_idler: u64,
) -> f64 {
    let a = crystal.optical_path(Polarization::Signal, state);
    let b = crystal.optical_path(Polarization::Idler, state);
    let (ps, pi) = (p_signal as f64, p_idler as f64);
    let k = 2.0 / pump_wavelength;
    let mut u = 0.5 * (ps + pi) * pump_wavelength - 0.5 * (a + b);
    for _ in 0..60 {
        let (xa, xb) = (u + a, u + b);
        let f = ps / xa + pi / xb - k;
        let df = -ps / (xa * xa) - pi / (xb * xb);
        let step = f / df;
        u -= step;
        if step.abs() <= 1e-18 * u.abs().max(1e-12) {
            break;
        }
    }
    u
}

/// Scan window in air-path offset relative to the geometry's nominal L.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterScan {
    pub offset_min: f64,
    pub offset_max: f64,
    /// Largest |beat| kept (Hz); stands in for the phase-matching gain window.
    pub max_beat: f64,
}

impl ClusterScan {
    /// Window of width `span` centred on the nominal air path.
    pub fn centered(span: f64, max_beat: f64) -> Self {
        Self {
            offset_min: -0.5 * span,
            offset_max: 0.5 * span,
            max_beat,
        }
    }
}

/// Default phase-matching window for enumeration (|beat| ≤ 30 GHz).
pub const DEFAULT_GAIN_HALF_WIDTH: f64 = 30e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterMode {
    /// Doubly resonant air path minus the nominal air path (m).
    pub offset: f64,
    pub pair: ModePair,
    /// δp_s + δp_i relative to the reference pair.
    pub cluster_label: i64,
    /// δp_s − δp_i relative to the reference pair.
    pub intra_label: i64,
}

/// Reference pair: mode numbers closest to degeneracy at the nominal length.
fn reference_pair(crystal: &CrystalParams, geometry: &CavityGeometry, state: &CrystalState) -> (i64, i64) {
    let l = geometry.air_path;
    let lp = geometry.pump_wavelength;
    let ps = ((l + crystal.optical_path(Polarization::Signal, state)) / lp).round() as i64;
    let pi = ((l + crystal.optical_path(Polarization::Idler, state)) / lp).round() as i64;
    (ps, pi)
}

fn cluster_mode(
    crystal: &CrystalParams,
    geometry: &CavityGeometry,
    state: &CrystalState,
    reference: (i64, i64),
    sigma: i64,
    d: i64,
) -> Option<ClusterMode> {
    debug_assert_eq!((sigma - d).rem_euclid(2), 0);
    let ps = reference.0 + (sigma + d) / 2;
    let pi = reference.1 + (sigma - d) / 2;
    if ps < 1 || pi < 1 {
        return None;
    }
    let (ps, pi) = (ps as u64, pi as u64);
    let u = doubly_resonant_length(crystal, state, geometry.pump_wavelength, ps, pi);
    let res_s = ps as f64 * fsr(crystal, Polarization::Signal, u, state);
    let res_i = pi as f64 * fsr(crystal, Polarization::Idler, u, state);
    Some(ClusterMode {
        offset: u - geometry.air_path,
        pair: ModePair::from_resonances(ps, pi, res_s, res_i, geometry.pump_frequency()),
        cluster_label: sigma,
        intra_label: d,
    })
}

/// Enumerates doubly resonant pairs whose length falls inside the scan window
/// and whose beat lies inside the gain window, ordered by length offset.
pub fn find_cluster_modes(
    crystal: &CrystalParams,
    geometry: &CavityGeometry,
    scan: &ClusterScan,
    state: &CrystalState,
) -> Vec<ClusterMode> {
    if !(scan.offset_max > scan.offset_min) || !(scan.max_beat >= 0.0) {
        return Vec::new();
    }
    let reference = reference_pair(crystal, geometry, state);
    let (_, beat_step) = intra_cluster_steps(crystal, geometry);
    let half_pump = 0.5 * geometry.pump_wavelength;
    // Length of the reference pair sets the origin of cluster labels.
    let Some(origin) = cluster_mode(crystal, geometry, state, reference, 0, 0) else {
        return Vec::new();
    };
    // Intra-cluster spread inside the gain window, plus margin.
    let hop = mode_hop_spacing(crystal, geometry);
    let d_extent = (2.0 * scan.max_beat / beat_step).ceil() as i64 + 4;
    let spread = 0.5 * hop * d_extent as f64;
    let sigma_lo = ((scan.offset_min - origin.offset - spread) / half_pump).floor() as i64 - 1;
    let sigma_hi = ((scan.offset_max - origin.offset + spread) / half_pump).ceil() as i64 + 1;

    let mut modes = Vec::new();
    for sigma in sigma_lo..=sigma_hi {
        let parity = sigma.rem_euclid(2);
        let Some(probe) = cluster_mode(crystal, geometry, state, reference, sigma, parity) else {
            continue;
        };
        // Beat grows by Δ_s + Δ_i each time d increases by 2.
        let d_zero = parity as f64 - 2.0 * probe.pair.beat / beat_step;
        let lo = (d_zero - d_extent as f64).floor() as i64;
        let hi = (d_zero + d_extent as f64).ceil() as i64;
        let mut d = lo + (parity - lo).rem_euclid(2);
        while d <= hi {
            if let Some(m) = cluster_mode(crystal, geometry, state, reference, sigma, d) {
                if m.pair.beat.abs() <= scan.max_beat && m.offset >= scan.offset_min && m.offset <= scan.offset_max {
                    modes.push(m);
                }
            }
            d += 2;
        }
    }
    modes.sort_by(|a, b| a.offset.total_cmp(&b.offset));
    modes
}

/// Candidate pairs at a fixed air path: for every intra label the pair
/// closest to resonance, with the pump mismatch shared as detuning.
pub fn modes_at_length(
    crystal: &CrystalParams,
    geometry: &CavityGeometry,
    state: &CrystalState,
    air_path: f64,
    max_beat: f64,
) -> Vec<ModePair> {
    let nu_p = geometry.pump_frequency();
    let fs = fsr(crystal, Polarization::Signal, air_path, state);
    let fi = fsr(crystal, Polarization::Idler, air_path, state);
    // Σres(S, d) = fs·(S + d)/2 + fi·(S − d)/2 with S = p_s + p_i, d = p_s − p_i.
    // The beat at S ≈ 2ν_p/(fs + fi) is roughly d·(fs + fi)/2 plus an offset
    // from the unequal ranges, so centre the d window on where it vanishes.
    let s_mid = 2.0 * nu_p / (fs + fi);
    let d_zero = -s_mid * (fs - fi) / (fs + fi);
    let d_extent = (2.0 * max_beat / (fs + fi)).ceil() as i64 + 2;
    let d_centre = d_zero.round() as i64;
    let mut out = Vec::new();
    for d in (d_centre - d_extent)..=(d_centre + d_extent) {
        let s_real = (2.0 * nu_p - (fs - fi) * d as f64) / (fs + fi);
        let mut s = s_real.round() as i64;
        if (s - d).rem_euclid(2) != 0 {
            s += if s_real > s as f64 { 1 } else { -1 };
        }
        let (ps, pi) = ((s + d) / 2, (s - d) / 2);
        if ps < 1 || pi < 1 {
            continue;
        }
        let res_s = ps as f64 * fs;
        let res_i = pi as f64 * fi;
        let pair = ModePair::from_resonances(ps as u64, pi as u64, res_s, res_i, nu_p);
        if pair.beat.abs() <= max_beat {
            out.push(pair);
        }
    }
    out
}

/// Effective threshold of a pair: `threshold_min·(1 + δ_s²)(1 + δ_i²)` with
/// detunings in units of the cold half width.
pub fn effective_threshold(pair: &ModePair, threshold_min: f64, cold_hwhm: f64) -> f64 {
    let ds = pair.detuning_signal / cold_hwhm;
    let di = pair.detuning_idler / cold_hwhm;
    threshold_min * (1.0 + ds * ds) * (1.0 + di * di)
}

fn compare_candidates(a: &(f64, &ModePair), b: &(f64, &ModePair)) -> Ordering {
    let scale = a.0.abs().max(b.0.abs());
    if (a.0 - b.0).abs() > 1e-12 * scale {
        return a.0.total_cmp(&b.0);
    }
    a.1.beat
        .abs()
        .total_cmp(&b.1.beat.abs())
        .then(a.1.p_signal.cmp(&b.1.p_signal))
}

/// Picks the oscillating pair: lowest effective threshold, ties (relative
/// 1e-12) broken by smaller |beat| and then smaller p_s. Returns `None` when
/// the pump is below every effective threshold.
pub fn select_oscillating_mode(
    candidates: &[ModePair],
    pump_power: f64,
    threshold_min: f64,
    cold_hwhm: f64,
) -> Option<ModePair> {
    candidates
        .iter()
        .map(|p| (effective_threshold(p, threshold_min, cold_hwhm), p))
        .min_by(compare_candidates)
        .filter(|(thr, _)| pump_power > *thr)
        .map(|(_, p)| *p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waists {
    /// Confocal-focusing waist sqrt(ℓλ/(2πn)) (m).
    pub boyd_ashkin: f64,
    /// Optimum-focusing waist, 0.59 × confocal (m).
    pub boyd_kleinman: f64,
}

/// Focusing waists at the degenerate wavelength 2λ_p in the mean index.
pub fn waists(geometry: &CavityGeometry, crystal: &CrystalParams) -> Waists {
    let lambda = 2.0 * geometry.pump_wavelength;
    let w_ba = (crystal.length * lambda / (2.0 * std::f64::consts::PI * crystal.n_mean())).sqrt();
    Waists {
        boyd_ashkin: w_ba,
        boyd_kleinman: 0.59 * w_ba,
    }
}

/// Spacings measured from an enumerated cluster map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterStatistics {
    pub n_clusters: usize,
    /// Mean distance between consecutive cluster centres (m).
    pub cluster_spacing: f64,
    /// Mean distance between neighbours (d, d+2) inside a cluster (m).
    pub intra_spacing: f64,
    /// Mean change of the beat between intra-cluster neighbours (Hz).
    pub intra_beat_step: f64,
}

pub fn cluster_statistics(modes: &[ClusterMode]) -> Option<ClusterStatistics> {
    use std::collections::BTreeMap;
    let mut by_cluster: BTreeMap<i64, Vec<&ClusterMode>> = BTreeMap::new();
    for m in modes {
        by_cluster.entry(m.cluster_label).or_default().push(m);
    }
    // Centre: midpoint of the two modes with the smallest |d| (d = ±1 for odd
    // clusters, d = 0 for even ones).
    let mut centres = Vec::new();
    let (mut intra_sum, mut beat_sum, mut intra_n) = (0.0, 0.0, 0usize);
    for (&sigma, ms) in &by_cluster {
        let mut ms = ms.clone();
        ms.sort_by_key(|m| m.intra_label);
        let parity = sigma.rem_euclid(2);
        let centre = if parity == 0 {
            ms.iter().find(|m| m.intra_label == 0).map(|m| m.offset)
        } else {
            let a = ms.iter().find(|m| m.intra_label == -1);
            let b = ms.iter().find(|m| m.intra_label == 1);
            a.zip(b).map(|(a, b)| 0.5 * (a.offset + b.offset))
        };
        if let Some(c) = centre {
            centres.push((sigma, c));
        }
        for w in ms.windows(2) {
            if w[1].intra_label - w[0].intra_label == 2 {
                intra_sum += (w[1].offset - w[0].offset).abs();
                beat_sum += w[1].pair.beat - w[0].pair.beat;
                intra_n += 1;
            }
        }
    }
    let mut spacing_sum = 0.0;
    let mut spacing_n = 0usize;
    for w in centres.windows(2) {
        if w[1].0 - w[0].0 == 1 {
            spacing_sum += w[1].1 - w[0].1;
            spacing_n += 1;
        }
    }
    if spacing_n == 0 || intra_n == 0 {
        return None;
    }
    Some(ClusterStatistics {
        n_clusters: by_cluster.len(),
        cluster_spacing: spacing_sum / spacing_n as f64,
        intra_spacing: intra_sum / intra_n as f64,
        intra_beat_step: beat_sum / intra_n as f64,
    })
}
