//! `donorlab` command line: level diagrams, resonance fields, polarizer
//! scans, Rabi traces and trace fitting, written as CSV and JSON plot data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use donorlab::{Observable, ParameterSpace};

use crate::config::RunConfig;

/// Error carrying the process exit code: 1 for bad input, 2 for numerical
/// failure or a fit that did not converge.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn context(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl From<donorlab::Error> for Failure {
    fn from(e: donorlab::Error) -> Self {
        Self {
            code: if e.is_numerical() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "donorlab",
    version,
    about = "Shallow-donor THz spectroscopy simulations and fits"
)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Donor levels and the two lowest Landau levels versus field.
    Spectrum(SpectrumArgs),
    /// Field at which a transition matches a radiation frequency.
    Resonance(ResonanceArgs),
    /// Photocurrent versus mirror spacing for both field directions.
    Polscan(PolscanArgs),
    /// Photoconductivity versus pulse width, one trace per polarization.
    Rabi(RabiArgs),
    /// Fit the Bloch model to a measured or simulated trace.
    Fit(FitArgs),
    /// Reduced deterministic run of the whole pipeline.
    Selftest,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[arg(long)]
    b_min: Option<f64>,
    #[arg(long)]
    b_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args, Debug)]
struct ResonanceArgs {
    #[arg(long, value_name = "THZ")]
    frequency: Option<f64>,
    /// Target state: 2p+ or 2p-.
    #[arg(long)]
    transition: Option<String>,
    #[arg(long, value_name = "TESLA")]
    b_lo: Option<f64>,
    #[arg(long, value_name = "TESLA")]
    b_hi: Option<f64>,
}

#[derive(Args, Debug)]
struct PolscanArgs {
    #[arg(long, value_name = "THZ")]
    frequency: Option<f64>,
    #[arg(long, value_name = "MM")]
    wavelength: Option<f64>,
    #[arg(long)]
    transition: Option<String>,
    #[arg(long, value_name = "MM")]
    spacing_min: Option<f64>,
    #[arg(long, value_name = "MM")]
    spacing_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_name = "RAD")]
    phase_offset: Option<f64>,
    /// Retardance of the optics after the stage.
    #[arg(long, value_name = "RAD")]
    retardance: Option<f64>,
    /// Diattenuation of the optics after the stage, in [0, 1).
    #[arg(long)]
    diattenuation: Option<f64>,
    #[arg(long, value_name = "RAD")]
    distortion_axis: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args, Debug)]
struct RabiArgs {
    /// sigma+, sigma-, pi_x, pi_y or jones:ex_re,ex_im,ey_re,ey_im; repeatable.
    #[arg(long = "polarization", value_name = "POL")]
    polarizations: Vec<String>,
    #[arg(long)]
    transition: Option<String>,
    /// +z or -z.
    #[arg(long, allow_hyphen_values = true)]
    field_sign: Option<String>,
    /// Peak THz field, V/m.
    #[arg(long, value_name = "V_PER_M")]
    peak_field: Option<f64>,
    /// σ⁺ Rabi period that sets the peak field when none is given.
    #[arg(long, value_name = "PS")]
    rabi_period: Option<f64>,
    #[arg(long, value_name = "NM")]
    x12: Option<f64>,
    #[arg(long, value_name = "PER_S")]
    gamma1: Option<f64>,
    #[arg(long, value_name = "PER_S")]
    gamma2: Option<f64>,
    #[arg(long, value_name = "PER_S")]
    gamma3: Option<f64>,
    #[arg(long, value_name = "RAD_PER_S", allow_hyphen_values = true)]
    detuning: Option<f64>,
    #[arg(long, value_name = "PS")]
    width_min: Option<f64>,
    #[arg(long, value_name = "PS")]
    width_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_name = "PS")]
    rise_time: Option<f64>,
    #[arg(long, value_parser = parse_observable)]
    observable: Option<Observable>,
    #[arg(long, value_name = "RAD")]
    retardance: Option<f64>,
    #[arg(long)]
    diattenuation: Option<f64>,
    #[arg(long, value_name = "RAD")]
    distortion_axis: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Trace CSV (pulse_width_ps, photocurrent, polarization).
    #[arg(long, value_name = "PATH")]
    trace: PathBuf,
    /// JSON metadata written next to the trace by `rabi`.
    #[arg(long, value_name = "PATH")]
    metadata: Option<PathBuf>,
    /// Which trace to fit; defaults to the first in the file.
    #[arg(long)]
    polarization: Option<String>,
    /// Comma-separated free parameters.
    #[arg(long, value_delimiter = ',')]
    free: Option<Vec<String>>,
    /// NAME=VALUE for a parameter held fixed; repeatable.
    #[arg(long, value_parser = parse_assignment)]
    fix: Vec<(String, f64)>,
    /// NAME=VALUE starting value; repeatable.
    #[arg(long, value_parser = parse_assignment)]
    guess: Vec<(String, f64)>,
    #[arg(long, value_parser = parse_space)]
    space: Option<ParameterSpace>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long, value_parser = parse_observable)]
    observable: Option<Observable>,
}

fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got '{s}'"))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|e| format!("bad value in '{s}': {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_space(s: &str) -> Result<ParameterSpace, String> {
    match s {
        "log" => Ok(ParameterSpace::Log),
        "linear" => Ok(ParameterSpace::Linear),
        _ => Err(format!("expected log or linear, got '{s}'")),
    }
}

fn parse_observable(s: &str) -> Result<Observable, String> {
    match s {
        "ground_depletion" => Ok(Observable::GroundDepletion),
        "ionized_only" => Ok(Observable::IonizedOnly),
        _ => Err(format!(
            "expected ground_depletion or ionized_only, got '{s}'"
        )),
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_overrides(cfg: &mut RunConfig, command: &Command) {
    match command {
        Command::Spectrum(a) => {
            set(&mut cfg.spectrum.b_min, a.b_min);
            set(&mut cfg.spectrum.b_max, a.b_max);
            set(&mut cfg.spectrum.steps, a.steps);
        }
        Command::Resonance(a) => {
            let r = &mut cfg.resonance;
            set(&mut r.frequency_thz, a.frequency);
            set(&mut r.transition, a.transition.clone());
            set(&mut r.b_lo, a.b_lo);
            set(&mut r.b_hi, a.b_hi);
        }
        Command::Polscan(a) => {
            let s = &mut cfg.stage;
            set(&mut s.frequency_thz, a.frequency);
            if a.wavelength.is_some() {
                s.wavelength_mm = a.wavelength;
            }
            set(&mut s.transition, a.transition.clone());
            set(&mut s.spacing_min_mm, a.spacing_min);
            set(&mut s.spacing_max_mm, a.spacing_max);
            set(&mut s.steps, a.steps);
            set(&mut s.phase_offset_rad, a.phase_offset);
            set(&mut s.retardance_rad, a.retardance);
            set(&mut s.diattenuation, a.diattenuation);
            set(&mut s.distortion_axis_rad, a.distortion_axis);
            set(&mut s.noise, a.noise);
        }
        Command::Rabi(a) => {
            let r = &mut cfg.rabi;
            if !a.polarizations.is_empty() {
                r.polarizations = a.polarizations.clone();
            }
            set(&mut r.transition, a.transition.clone());
            set(&mut r.field_sign, a.field_sign.clone());
            if a.peak_field.is_some() {
                r.peak_field = a.peak_field;
            }
            set(&mut r.rabi_period_ps, a.rabi_period);
            if a.x12.is_some() {
                r.x12_nm = a.x12;
            }
            set(&mut r.detuning, a.detuning);
            set(&mut r.width_min_ps, a.width_min);
            set(&mut r.width_max_ps, a.width_max);
            set(&mut r.steps, a.steps);
            set(&mut r.rise_time_ps, a.rise_time);
            set(&mut r.observable, a.observable);
            set(&mut r.retardance_rad, a.retardance);
            set(&mut r.diattenuation, a.diattenuation);
            set(&mut r.distortion_axis_rad, a.distortion_axis);
            set(&mut r.noise, a.noise);
            set(&mut cfg.rates.gamma1, a.gamma1);
            set(&mut cfg.rates.gamma2, a.gamma2);
            set(&mut cfg.rates.gamma3, a.gamma3);
        }
        Command::Fit(a) => {
            let f = &mut cfg.fit;
            set(&mut f.free, a.free.clone());
            f.fixed.extend(a.fix.iter().cloned());
            f.guess.extend(a.guess.iter().cloned());
            set(&mut f.space, a.space);
            set(&mut f.restarts, a.restarts);
            set(&mut f.max_iterations, a.max_iterations);
            set(&mut f.observable, a.observable);
        }
        Command::Selftest => {}
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    apply_overrides(&mut cfg, &cli.command);

    let output = match &cli.command {
        Command::Spectrum(_) => commands::spectrum(&cfg)?,
        Command::Resonance(_) => commands::resonance(&cfg)?,
        Command::Polscan(_) => commands::polscan(&cfg)?,
        Command::Rabi(_) => commands::rabi(&cfg)?,
        Command::Fit(a) => {
            let trace = read_text(&a.trace)?;
            let meta = a.metadata.as_deref().map(read_text).transpose()?;
            commands::fit_file(&cfg, &trace, meta.as_deref(), a.polarization.as_deref())?
        }
        Command::Selftest => commands::selftest(&cfg)?,
    };

    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure::input(format!("cannot create {}: {e}", dir.display())))?;
    let mut files: BTreeMap<String, Vec<u8>> = output.files.into_iter().collect();
    files.insert("config.toml".into(), cfg.to_toml()?.into_bytes());
    for (name, bytes) in &files {
        donorlab::io::write_atomic(&dir.join(name), bytes)?;
    }
    let mut stdout = std::io::stdout().lock();
    for line in &output.summary {
        // A closed pipe is not a failure of the run.
        let _ = writeln!(stdout, "{line}");
    }
    match output.deferred {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
