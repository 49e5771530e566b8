//! Subcommand implementations. Each takes a resolved scenario and returns the
//! rendered artifact text.

use std::path::Path;

use opo_core::cavity::{
    cluster_statistics, find_cluster_modes, intra_cluster_steps, mode_hop_spacing, transverse_coefficients,
    tuning_matrix, Actuator, ClusterScan, TuningMatrix,
};
use opo_core::crystal::{calibrate_derivatives, CrystalState};
use opo_core::detection::{
    averaged_measurement, beat_spectrum, difference_spectrum, half_width_at_half_maximum, linear_grid, to_db,
};
use opo_core::efficiency::{fit, EfficiencyDataset, EfficiencyPoint, FitReport};
use opo_core::servo::{run, RunMode};
use opo_core::{rng_from_seed, series, Execution};
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, Scenario};
use crate::output::{num, Artifact, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error("{module}: {source}")]
    Core {
        module: &'static str,
        source: opo_core::Error,
    },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input { .. } => 2,
            CliError::Core {
                source: opo_core::Error::InvalidInput(_),
                ..
            } => 2,
            CliError::Core { .. } => 3,
            CliError::Io { .. } => 1,
        }
    }

    /// Single `error kind=... ` line for scripts.
    pub fn machine_line(&self) -> String {
        match self {
            CliError::Config(e) => format!("error kind=config key={} message={:?}", e.key, e.message),
            CliError::Input { path, message } => format!("error kind=input path={path:?} message={message:?}"),
            CliError::Core { module, source } => {
                let kind = if self.exit_code() == 2 { "input" } else { "numeric" };
                format!("error kind={kind} module={module} message={:?}", source.to_string())
            }
            CliError::Io { path, source } => format!("error kind=io path={path:?} message={:?}", source.to_string()),
        }
    }
}

fn core(module: &'static str) -> impl Fn(opo_core::Error) -> CliError {
    move |source| CliError::Core { module, source }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Numeric columns of a CSV file with `#` comment lines, keyed by header.
struct InputTable {
    columns: Vec<String>,
    values: Vec<Vec<f64>>,
    sha256: String,
}

impl InputTable {
    fn read(path: &Path) -> Result<Self, CliError> {
        let shown = path.display().to_string();
        let bytes = std::fs::read(path).map_err(|source| CliError::Io {
            path: shown.clone(),
            source,
        })?;
        let input_err = |message: String| CliError::Input {
            path: shown.clone(),
            message,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(bytes.as_slice());
        let columns: Vec<String> = rdr
            .headers()
            .map_err(|e| input_err(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut values = vec![Vec::new(); columns.len()];
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| input_err(e.to_string()))?;
            for (col, field) in values.iter_mut().zip(rec.iter()) {
                let x = field
                    .parse::<f64>()
                    .map_err(|_| input_err(format!("row {}: {field:?} is not a number", i + 1)))?;
                col.push(x);
            }
        }
        Ok(Self {
            columns,
            values,
            sha256: sha256_hex(&bytes),
        })
    }

    fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .position(|c| c == name)
            .map(|k| self.values[k].as_slice())
    }

    fn require(&self, name: &str, path: &Path) -> Result<&[f64], CliError> {
        self.column(name).ok_or_else(|| CliError::Input {
            path: path.display().to_string(),
            message: format!("missing column {name}"),
        })
    }
}

pub fn cluster_map(sc: &Scenario) -> Result<String, CliError> {
    let scan = ClusterScan::centered(sc.scan_span, sc.max_beat);
    let state = CrystalState::at_reference(&sc.crystal);
    let modes = find_cluster_modes(&sc.crystal, &sc.geometry, &scan, &state);
    let mut table = Table::new(&[
        "L_offset_nm",
        "p_s",
        "p_i",
        "nu_s_Hz",
        "nu_i_Hz",
        "beat_Hz",
        "cluster_label",
        "intra_label",
    ]);
    for m in &modes {
        table.push(vec![
            num(m.offset * 1e9),
            m.pair.p_signal.to_string(),
            m.pair.p_idler.to_string(),
            num(m.pair.nu_signal),
            num(m.pair.nu_idler),
            num(m.pair.beat),
            m.cluster_label.to_string(),
            m.intra_label.to_string(),
        ]);
    }
    let mut art = Artifact::new("cluster map", table);
    art.note("modes", modes.len().to_string());
    art.note(
        "intra_spacing_formula_nm",
        num(mode_hop_spacing(&sc.crystal, &sc.geometry) * 1e9),
    );
    art.note(
        "cluster_spacing_formula_nm",
        num(0.5 * sc.geometry.pump_wavelength * 1e9),
    );
    let (sigma_step, beat_step) = intra_cluster_steps(&sc.crystal, &sc.geometry);
    art.note("intra_beat_step_formula_Hz", num(beat_step));
    art.note("intra_sum_step_formula_Hz", num(sigma_step));
    if let Some(stats) = cluster_statistics(&modes) {
        art.note("clusters", stats.n_clusters.to_string());
        art.note("cluster_spacing_nm", num(stats.cluster_spacing * 1e9));
        art.note("intra_spacing_nm", num(stats.intra_spacing * 1e9));
        art.note("intra_beat_step_Hz", num(stats.intra_beat_step));
    }
    Ok(art.render(sc))
}

pub fn tune_matrix(sc: &Scenario) -> Result<String, CliError> {
    let m = tuning_matrix(&sc.crystal, &sc.geometry);
    let (x_plus, x_minus) = transverse_coefficients(&sc.crystal, &sc.geometry);
    let mut table = Table::new(&[
        "output",
        "dL_MHz_per_nm",
        "dT_MHz_per_mK",
        "dV_MHz_per_V",
        "dnu_p_Hz_per_Hz",
        "dx_MHz_per_um",
    ]);
    type Row = fn(&TuningMatrix, Actuator) -> f64;
    let rows: [(&str, Row, f64); 2] = [
        ("nu_plus", TuningMatrix::plus, x_plus),
        ("nu_minus", TuningMatrix::minus, x_minus),
    ];
    for (name, coeff, x) in rows {
        let get = |a| coeff(&m, a);
        table.push(vec![
            name.to_string(),
            num(get(Actuator::Length) * 1e-15),
            num(get(Actuator::Temperature) * 1e-9),
            num(get(Actuator::Voltage) * 1e-6),
            num(get(Actuator::Pump)),
            num(x * 1e-12),
        ]);
    }
    let mut art = Artifact::new("tune matrix", table);
    art.note(
        "mode_hop_spacing_nm",
        num(mode_hop_spacing(&sc.crystal, &sc.geometry) * 1e9),
    );
    Ok(art.render(sc))
}

pub fn tune_calibrate(sc: &Scenario) -> Result<String, CliError> {
    let c = calibrate_derivatives(&sc.crystal, &sc.geometry, sc.targets_temperature, sc.targets_voltage)
        .map_err(core("crystal"))?;
    let m = tuning_matrix(&c, &sc.geometry);
    let pairs = [
        (m.plus(Actuator::Temperature), sc.targets_temperature.plus),
        (m.minus(Actuator::Temperature), sc.targets_temperature.minus),
        (m.plus(Actuator::Voltage), sc.targets_voltage.plus),
        (m.minus(Actuator::Voltage), sc.targets_voltage.minus),
    ];
    let worst = pairs
        .iter()
        .map(|(got, want)| {
            if *want == 0.0 {
                got.abs()
            } else {
                ((got - want) / want).abs()
            }
        })
        .fold(0.0, f64::max);
    let mut table = Table::new(&["axis", "dpath_dT_m_per_K", "dpath_dV_m_per_V"]);
    table.push(vec!["signal".into(), num(c.dpath_dt_signal), num(c.dpath_dv_signal)]);
    table.push(vec!["idler".into(), num(c.dpath_dt_idler), num(c.dpath_dv_idler)]);
    let mut art = Artifact::new("tune calibrate", table);
    art.note("round_trip_max_relative_error", num(worst));
    Ok(art.render(sc))
}

pub fn sim(sc: &Scenario, mode: RunMode) -> Result<String, CliError> {
    let ts = run(&sc.run, mode, sc.seed).map_err(core("servo"))?;
    let mut table = Table::new(&["t_s", "nu_minus_Hz", "nu_plus_detuning_Hz", "power_W", "hop_flag"]);
    for k in 0..ts.len() {
        table.push(vec![
            num(ts.t[k]),
            num(ts.nu_minus[k]),
            num(ts.nu_plus_detuning[k]),
            num(ts.power[k]),
            u8::from(ts.hop[k]).to_string(),
        ]);
    }
    let command = match mode {
        RunMode::Locked => "sim lock",
        RunMode::Free => "sim free",
    };
    let mut art = Artifact::new(command, table);
    art.note("noise_update_rate_Hz", num(1.0 / sc.run.servo.update_interval()));
    art.note("nu_minus_range_Hz", num(ts.nu_minus_range()));
    art.note(
        "nu_plus_detuning_variance_Hz2",
        num(series::variance(&ts.nu_plus_detuning)),
    );
    art.note("hops", ts.hop_count().to_string());
    art.note("saturated_updates", ts.saturated_updates.to_string());
    Ok(art.render(sc))
}

pub fn spectrum_beat(sc: &Scenario, input: &Path) -> Result<String, CliError> {
    let data = InputTable::read(input)?;
    let t = data.require("t_s", input)?;
    let nu = data.require("nu_minus_Hz", input)?;
    let d = &sc.detection;
    let centre = d.analyzer_centre.unwrap_or_else(|| series::mean(nu));
    let half = 0.5 * (d.analyzer.stop_frequency - d.analyzer.start_frequency);
    let mut settings = d.analyzer;
    settings.start_frequency = centre - half;
    settings.stop_frequency = centre + half;
    let sp = beat_spectrum(t, nu, &settings, Execution::default()).map_err(core("detection"))?;
    let max_hold = sp.max_hold.clone().unwrap_or_default();
    let mut table = Table::new(&["f_Hz", "sweep_rel_peak", "maxhold_rel_peak"]);
    for ((f, p), m) in sp.frequency.iter().zip(&sp.psd).zip(&max_hold) {
        table.push(vec![num(*f), num(*p), num(*m)]);
    }
    let mut art = Artifact::new("spectrum beat", table);
    art.input_sha256 = Some(data.sha256.clone());
    art.note("centre_Hz", num(centre));
    if let Some(hw) = half_width_at_half_maximum(&sp.frequency, &sp.psd) {
        art.note("sweep_hwhm_Hz", num(hw));
    }
    if let Some(hw) = half_width_at_half_maximum(&sp.frequency, &max_hold) {
        art.note("maxhold_hwhm_Hz", num(hw));
    }
    Ok(art.render(sc))
}

pub fn spectrum_diff(sc: &Scenario) -> Result<String, CliError> {
    let d = &sc.detection;
    let freqs = linear_grid(d.f_start, d.f_stop, d.n_points);
    let mut sp = difference_spectrum(&d.splitter, &d.detectors, &d.model, &freqs).map_err(core("detection"))?;
    if d.averages > 0 {
        let mut rng = rng_from_seed(sc.seed);
        sp = averaged_measurement(&sp, d.averages, &mut rng).map_err(core("detection"))?;
    }
    let mut table = Table::new(&["f_Hz", "psd_rel_shot", "psd_dB_rel_shot"]);
    for (f, v) in sp.frequency.iter().zip(&sp.psd) {
        table.push(vec![num(*f), num(*v), num(to_db(*v))]);
    }
    let mut art = Artifact::new("spectrum diff", table);
    art.note("reflectivity", num(d.splitter.reflectivity()));
    Ok(art.render(sc))
}

fn read_dataset(path: &Path) -> Result<(EfficiencyDataset, String), CliError> {
    let data = InputTable::read(path)?;
    let pump = data.require("pump_W", path)?;
    let rho = data.require("rho", path)?;
    let sigma = data.column("sigma");
    let points = (0..pump.len())
        .map(|k| EfficiencyPoint {
            pump_power: pump[k],
            efficiency: rho[k],
            sigma: sigma.map(|s| s[k]),
        })
        .collect();
    let ds = EfficiencyDataset { points };
    ds.validate().map_err(|e| CliError::Input {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok((ds, data.sha256))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// JSON when the output path ends in `.json`, CSV otherwise.
    pub fn for_path(path: Option<&Path>) -> Self {
        match path.and_then(Path::extension) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

#[derive(serde::Serialize)]
struct JsonReport<'a> {
    tool: String,
    command: &'static str,
    seed: u64,
    config_sha256: String,
    input_sha256: &'a str,
    config: &'a str,
    report: &'a FitReport,
}

pub fn fit_efficiency(sc: &Scenario, data: &Path, weighted: bool, format: ReportFormat) -> Result<String, CliError> {
    let (ds, sha) = read_dataset(data)?;
    let report = fit(&ds, None, weighted).map_err(core("efficiency"))?;
    match format {
        ReportFormat::Json => {
            let doc = JsonReport {
                tool: format!("opo {}", crate::output::VERSION),
                command: "fit efficiency",
                seed: sc.seed,
                config_sha256: sc.config_sha256(),
                input_sha256: &sha,
                config: &sc.resolved,
                report: &report,
            };
            let mut s = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Input {
                path: data.display().to_string(),
                message: e.to_string(),
            })?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => {
            let mut table = Table::new(&[
                "p_threshold_W",
                "sigma_p_threshold_W",
                "k_factor",
                "sigma_k",
                "chi_squared",
                "degrees_of_freedom",
                "iterations",
                "weighted",
            ]);
            table.push(vec![
                num(report.model.p_threshold),
                num(report.sigma_p_threshold),
                num(report.model.k_factor),
                num(report.sigma_k),
                num(report.chi_squared),
                report.degrees_of_freedom.to_string(),
                report.iterations.to_string(),
                report.weighted.to_string(),
            ]);
            let mut art = Artifact::new("fit efficiency", table);
            art.input_sha256 = Some(sha);
            art.note("points", ds.points.len().to_string());
            art.note("physical_k_range", report.model.is_physical().to_string());
            Ok(art.render(sc))
        }
    }
}

pub fn gen_efficiency(sc: &Scenario) -> Result<String, CliError> {
    let e = &sc.efficiency;
    let mut rng = rng_from_seed(sc.seed);
    let ds = EfficiencyDataset::synthetic(&e.model, e.n_points, e.ratio_range, e.noise, &mut rng);
    let with_sigma = e.noise > 0.0;
    let mut table = Table::new(if with_sigma {
        &["pump_W", "rho", "sigma"]
    } else {
        &["pump_W", "rho"]
    });
    for p in &ds.points {
        let mut row = vec![num(p.pump_power), num(p.efficiency)];
        if let Some(s) = p.sigma {
            row.push(num(s));
        }
        table.push(row);
    }
    Ok(Artifact::new("gen efficiency", table).render(sc))
}
