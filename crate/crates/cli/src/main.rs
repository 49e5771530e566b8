use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use opo_cli::commands::{self, CliError, ReportFormat};
use opo_cli::config::{self, Scenario};
use opo_core::servo::RunMode;
use toml::{Table, Value};

#[derive(Parser)]
#[command(name = "opo", version, about = "Doubly resonant OPO scenario runner")]
struct Cli {
    /// TOML scenario file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's top-level seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Doubly resonant mode clusters.
    #[command(subcommand)]
    Cluster(ClusterCmd),
    /// Tuning coefficients.
    #[command(subcommand)]
    Tune(TuneCmd),
    /// Time-domain servo simulation.
    #[command(subcommand)]
    Sim(SimCmd),
    /// Beat-note and difference-channel spectra.
    #[command(subcommand)]
    Spectrum(SpectrumCmd),
    /// Fits to measured data.
    #[command(subcommand)]
    Fit(FitCmd),
    /// Synthetic datasets.
    #[command(subcommand)]
    Gen(GenCmd),
}

#[derive(Subcommand)]
enum ClusterCmd {
    /// Enumerate doubly resonant lengths around the nominal cavity.
    Map {
        #[arg(long)]
        span_nm: Option<f64>,
    },
}

#[derive(Subcommand)]
enum TuneCmd {
    /// Print the 2x4 frequency tuning matrix.
    Matrix,
    /// Fit the temperature and voltage path derivatives to the target coefficients.
    Calibrate,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    duration_s: Option<f64>,
    #[arg(long)]
    sample_rate_hz: Option<f64>,
    /// Enable the electro-optic beat-note loop.
    #[arg(long)]
    eo: bool,
}

#[derive(Subcommand)]
enum SimCmd {
    /// Dither-locked run.
    Lock(SimArgs),
    /// Unlocked run.
    Free(SimArgs),
}

#[derive(Subcommand)]
enum SpectrumCmd {
    /// Emulated swept-analyzer display of a simulated beat note.
    Beat {
        /// CSV from `sim lock` or `sim free`.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        rbw_hz: Option<f64>,
        #[arg(long)]
        sweep_ms: Option<f64>,
        #[arg(long)]
        maxhold_n: Option<u64>,
        #[arg(long)]
        centre_hz: Option<f64>,
    },
    /// Difference-channel noise spectrum relative to shot noise.
    Diff {
        /// Half-wave plate angle in radians, or a fraction of pi such as `pi/8`.
        #[arg(long)]
        alpha: Option<String>,
        /// Emulate an average of this many traces (0 = model curve).
        #[arg(long)]
        averages: Option<u64>,
    },
}

#[derive(Subcommand)]
enum FitCmd {
    /// Fit threshold and K to (pump_W, rho[, sigma]) data.
    Efficiency {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        weighted: bool,
    },
}

#[derive(Subcommand)]
enum GenCmd {
    /// Synthetic efficiency dataset.
    Efficiency {
        #[arg(long)]
        pth: Option<f64>,
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        n_points: Option<u64>,
        #[arg(long)]
        noise: Option<f64>,
    },
}

/// Parses `1.2`, `pi`, `pi/8`, `3pi/8` or `3*pi/8`.
fn parse_angle(s: &str) -> Option<f64> {
    let t = s.trim().to_ascii_lowercase().replace(' ', "");
    if let Ok(x) = t.parse::<f64>() {
        return Some(x);
    }
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.to_string(), d.parse::<f64>().ok()?),
        None => (t.clone(), 1.0),
    };
    let coeff = num.strip_suffix("pi")?.trim_end_matches('*');
    let c = if coeff.is_empty() {
        1.0
    } else {
        coeff.parse::<f64>().ok()?
    };
    Some(c * std::f64::consts::PI / den)
}

struct Overrides(Table);

impl Overrides {
    fn float(&mut self, section: &str, key: &str, v: Option<f64>) {
        if let Some(x) = v {
            config::set(&mut self.0, section, key, Value::Float(x));
        }
    }

    fn int(&mut self, section: &str, key: &str, v: Option<u64>) {
        if let Some(n) = v {
            config::set(&mut self.0, section, key, Value::Integer(n as i64));
        }
    }
}

fn load(path: Option<&Path>) -> Result<Table, CliError> {
    match path {
        None => Ok(Table::new()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::Io {
                path: p.display().to_string(),
                source,
            })?;
            Ok(config::parse(&text)?)
        }
    }
}

fn execute(cli: &Cli) -> Result<String, CliError> {
    let mut o = Overrides(load(cli.config.as_deref())?);
    if let Some(seed) = cli.seed {
        o.0.insert("seed".into(), Value::Integer(seed as i64));
    }
    match &cli.command {
        Command::Cluster(ClusterCmd::Map { span_nm }) => o.float("cavity", "scan_span_m", span_nm.map(|x| x * 1e-9)),
        Command::Sim(SimCmd::Lock(a) | SimCmd::Free(a)) => {
            o.float("servo", "duration_s", a.duration_s);
            o.float("servo", "sample_rate_Hz", a.sample_rate_hz);
            if a.eo {
                config::set(&mut o.0, "servo", "eo_enabled", Value::Boolean(true));
            }
        }
        Command::Spectrum(SpectrumCmd::Beat {
            rbw_hz,
            sweep_ms,
            maxhold_n,
            centre_hz,
            ..
        }) => {
            o.float("detection", "analyzer_rbw_Hz", *rbw_hz);
            o.float("detection", "analyzer_sweep_time_s", sweep_ms.map(|x| x * 1e-3));
            o.int("detection", "analyzer_sweeps", *maxhold_n);
            o.float("detection", "analyzer_centre_Hz", *centre_hz);
        }
        Command::Spectrum(SpectrumCmd::Diff { alpha, averages }) => {
            if let Some(a) = alpha {
                let x = parse_angle(a).ok_or_else(|| {
                    CliError::Config(config::ConfigError {
                        key: "detection.alpha_rad".into(),
                        message: format!("cannot parse angle {a:?}"),
                    })
                })?;
                o.float("detection", "alpha_rad", Some(x));
            }
            o.int("detection", "averages", *averages);
        }
        Command::Gen(GenCmd::Efficiency {
            pth,
            k,
            n_points,
            noise,
        }) => {
            o.float("efficiency", "p_threshold_W", *pth);
            o.float("efficiency", "k_factor", *k);
            o.int("efficiency", "n_points", *n_points);
            o.float("efficiency", "noise_rel", *noise);
        }
        _ => {}
    }
    let sc: Scenario = config::resolve(&o.0)?;
    match &cli.command {
        Command::Cluster(ClusterCmd::Map { .. }) => commands::cluster_map(&sc),
        Command::Tune(TuneCmd::Matrix) => commands::tune_matrix(&sc),
        Command::Tune(TuneCmd::Calibrate) => commands::tune_calibrate(&sc),
        Command::Sim(SimCmd::Lock(_)) => commands::sim(&sc, RunMode::Locked),
        Command::Sim(SimCmd::Free(_)) => commands::sim(&sc, RunMode::Free),
        Command::Spectrum(SpectrumCmd::Beat { input, .. }) => commands::spectrum_beat(&sc, input),
        Command::Spectrum(SpectrumCmd::Diff { .. }) => commands::spectrum_diff(&sc),
        Command::Fit(FitCmd::Efficiency { data, weighted }) => {
            commands::fit_efficiency(&sc, data, *weighted, ReportFormat::for_path(cli.out.as_deref()))
        }
        Command::Gen(GenCmd::Efficiency { .. }) => commands::gen_efficiency(&sc),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = execute(&cli).and_then(|text| match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.machine_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
