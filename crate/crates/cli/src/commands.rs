use std::collections::BTreeMap;
use std::f64::consts::PI;

use donorlab::constants::mev_to_thz;
use donorlab::dynamics::field_for_rabi_frequency;
use donorlab::experiment::{
    add_gaussian_noise, fit_sinusoid, linspace, phase_difference, simulate_polarizer_scan,
    simulate_rabi_trace,
};
use donorlab::fitting::{fit, initial_guess, timescales};
use donorlab::io::{self, TraceMetadata, SCHEMA_VERSION};
use donorlab::polarization::{polarization_state_row, wavelength_mm};
use donorlab::{
    CircularTransition, DampingRates, Distortion, FieldDirection, FitProblem, FitResult,
    HydrogenicState, JonesVector, LevelSolver, MirrorPolarizerStage, Parameter, PolarizationLabel,
    RabiSetup, RabiTrace, ScanModel, SinusoidFit,
};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::RunConfig;
use crate::Failure;

/// Files produced by a command, written by the caller.
#[derive(Debug, Default)]
pub struct Output {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Vec<String>,
    /// Set when the outputs are written but the run should still fail.
    pub deferred: Option<Failure>,
}

impl Output {
    fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        self.file(name, io::to_json_bytes(value)?);
        Ok(())
    }
}

fn level_solver(cfg: &RunConfig) -> Result<LevelSolver, Failure> {
    cfg.donor.validate()?;
    Ok(LevelSolver::new(cfg.basis)?)
}

fn transition_state(s: &str) -> Result<HydrogenicState, Failure> {
    let state = HydrogenicState::parse(s.trim_start_matches("1s-").trim_start_matches("1s->"))?;
    if state == HydrogenicState::S1 {
        return Err(Failure::input("transition target must be a 2p state"));
    }
    Ok(state)
}

pub fn spectrum(cfg: &RunConfig) -> Result<Output, Failure> {
    let s = &cfg.spectrum;
    if !(s.b_min >= 0.0 && s.b_min < s.b_max) || s.steps < 2 {
        return Err(Failure::input(format!(
            "need 0 <= b_min < b_max and steps >= 2, got [{}, {}] with {} steps",
            s.b_min, s.b_max, s.steps
        )));
    }
    let solver = level_solver(cfg)?;
    let mut rows = Vec::with_capacity(s.steps);
    for b in linspace(s.b_min, s.b_max, s.steps) {
        let row = solver
            .diagram_row(b, &cfg.donor)
            .map_err(|e| Failure::from(e).context(&format!("level diagram row at B = {b} T")))?;
        rows.push(row);
    }
    let mut out = Output::default();
    out.file("levels.csv", io::level_diagram_csv(&rows)?);
    out.summary.push(format!(
        "levels.csv: {} field points over [{}, {}] T",
        rows.len(),
        s.b_min,
        s.b_max
    ));
    Ok(out)
}

#[derive(Serialize)]
struct ResonanceDoc {
    schema_version: u32,
    #[serde(rename = "frequency_THz")]
    frequency_thz: f64,
    transition: String,
    search_range_tesla: [f64; 2],
    field_tesla: f64,
    #[serde(rename = "transition_energy_meV")]
    transition_energy_mev: f64,
}

fn resonance_doc(
    solver: &LevelSolver,
    cfg: &RunConfig,
    frequency_thz: f64,
    transition: &str,
    range: (f64, f64),
) -> Result<ResonanceDoc, Failure> {
    let to = transition_state(transition)?;
    let b = solver.resonance_field(frequency_thz, to, &cfg.donor, range)?;
    let e = solver.transition_energy(HydrogenicState::S1, to, b, &cfg.donor)?;
    Ok(ResonanceDoc {
        schema_version: SCHEMA_VERSION,
        frequency_thz,
        transition: format!("1s-{}", to.label()),
        search_range_tesla: [range.0, range.1],
        field_tesla: b,
        transition_energy_mev: e,
    })
}

pub fn resonance(cfg: &RunConfig) -> Result<Output, Failure> {
    let r = &cfg.resonance;
    let solver = level_solver(cfg)?;
    let doc = resonance_doc(
        &solver,
        cfg,
        r.frequency_thz,
        &r.transition,
        (r.b_lo, r.b_hi),
    )?;
    let mut out = Output::default();
    out.summary.push(format!(
        "{} at {} THz: B = {:.4} T",
        doc.transition, doc.frequency_thz, doc.field_tesla
    ));
    out.json("resonance.json", &doc)?;
    Ok(out)
}

#[derive(Serialize)]
struct PolscanDoc {
    schema_version: u32,
    transition: String,
    #[serde(rename = "frequency_THz")]
    frequency_thz: f64,
    wavelength_mm: f64,
    phase_offset_rad: f64,
    distortion: Distortion,
    plus_z: SinusoidFit,
    minus_z: SinusoidFit,
    phase_difference_rad: f64,
}

pub fn polscan(cfg: &RunConfig) -> Result<Output, Failure> {
    let s = &cfg.stage;
    let transition = CircularTransition::parse(&s.transition)?;
    let lambda = match s.wavelength_mm {
        Some(l) => l,
        None => {
            if !(s.frequency_thz > 0.0) {
                return Err(Failure::input("frequency must be positive"));
            }
            wavelength_mm(s.frequency_thz)
        }
    };
    if !(s.spacing_max_mm > s.spacing_min_mm) || s.steps < 4 {
        return Err(Failure::input(format!(
            "spacing range [{}, {}] mm with {} steps is empty",
            s.spacing_min_mm, s.spacing_max_mm, s.steps
        )));
    }
    let model = ScanModel {
        wavelength_mm: lambda,
        phase_offset: s.phase_offset_rad,
        intensity: s.intensity,
        responsivity: 1.0,
        distortion: Distortion {
            retardance: s.retardance_rad,
            diattenuation: s.diattenuation,
            axis: s.distortion_axis_rad,
        },
        offset: s.offset,
    };
    let spacings = linspace(s.spacing_min_mm, s.spacing_max_mm, s.steps);
    let mut scans = Vec::new();
    for (k, field) in [FieldDirection::PlusZ, FieldDirection::MinusZ]
        .into_iter()
        .enumerate()
    {
        let mut scan = simulate_polarizer_scan(&spacings, &model, transition, field)?;
        add_gaussian_noise(
            &mut scan.photocurrent,
            s.noise,
            cfg.seed.wrapping_add(k as u64),
        )?;
        scans.push(scan);
    }
    let plus = fit_sinusoid(&scans[0])?;
    let minus = fit_sinusoid(&scans[1])?;
    let dphi = phase_difference(&plus, &minus);

    let stage = MirrorPolarizerStage::new(s.spacing_min_mm, lambda, s.phase_offset_rad)?;
    let states: Vec<_> = spacings
        .iter()
        .map(|&d| polarization_state_row(&stage.with_spacing(d)))
        .collect();

    let mut out = Output::default();
    out.file("polscan.csv", io::polarizer_scans_csv(&scans)?);
    out.file(
        "polarization_states.csv",
        io::polarization_states_csv(&states)?,
    );
    out.json(
        "polscan_fit.json",
        &PolscanDoc {
            schema_version: SCHEMA_VERSION,
            transition: transition.label().to_string(),
            frequency_thz: s.frequency_thz,
            wavelength_mm: lambda,
            phase_offset_rad: s.phase_offset_rad,
            distortion: model.distortion,
            plus_z: plus,
            minus_z: minus,
            phase_difference_rad: dphi,
        },
    )?;
    out.summary.push(format!(
        "{}: phase difference {:.6} rad ({:.4} pi), minimum photocurrent {:.4}",
        transition.label(),
        dphi,
        dphi / PI,
        scans[0].min_photocurrent().min(scans[1].min_photocurrent())
    ));
    Ok(out)
}

fn parse_polarization(spec: &str) -> Result<(String, JonesVector), Failure> {
    if let Some(rest) = spec.strip_prefix("jones:") {
        let v: Vec<f64> = rest
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| Failure::input(format!("bad Jones vector '{spec}': {e}")))?;
        if v.len() != 4 {
            return Err(Failure::input(format!(
                "Jones vector needs ex_re,ex_im,ey_re,ey_im, got '{rest}'"
            )));
        }
        let j = JonesVector::new(Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3]));
        if j.intensity() == 0.0 {
            return Err(donorlab::Error::ZeroJonesVector.into());
        }
        // Commas would need quoting in the trace CSV.
        return Ok((spec.replace(',', " "), j));
    }
    let label = PolarizationLabel::parse(spec)?;
    Ok((label.label().to_string(), label.jones()))
}

/// Dipole length and peak field of a Rabi run.
fn rabi_drive(cfg: &RunConfig, solver: Option<&LevelSolver>) -> Result<(f64, f64), Failure> {
    let r = &cfg.rabi;
    let transition = CircularTransition::parse(&r.transition)?;
    let x12 = match r.x12_nm {
        Some(x) => x,
        None => {
            let owned;
            let solver = match solver {
                Some(s) => s,
                None => {
                    owned = level_solver(cfg)?;
                    &owned
                }
            };
            solver.dipole_matrix_element(transition.target(), r.field_tesla, &cfg.donor)?
        }
    };
    if !(x12 > 0.0) {
        return Err(Failure::input(format!(
            "dipole length must be positive, got {x12} nm"
        )));
    }
    let peak = match r.peak_field {
        Some(e) => e,
        None => {
            if !(r.rabi_period_ps > 0.0) {
                return Err(Failure::input("Rabi period must be positive"));
            }
            field_for_rabi_frequency(2.0 * PI / (r.rabi_period_ps * 1e-12), x12)
        }
    };
    if !(peak >= 0.0 && peak.is_finite()) {
        return Err(Failure::input(format!(
            "peak field must be >= 0, got {peak} V/m"
        )));
    }
    Ok((x12, peak))
}

fn rabi_traces(
    cfg: &RunConfig,
    solver: Option<&LevelSolver>,
) -> Result<(Vec<RabiTrace>, TraceMetadata), Failure> {
    let r = &cfg.rabi;
    if !(r.width_max_ps > r.width_min_ps && r.width_min_ps >= 0.0) || r.steps < 4 {
        return Err(Failure::input(format!(
            "pulse-width range [{}, {}] ps with {} steps is invalid",
            r.width_min_ps, r.width_max_ps, r.steps
        )));
    }
    if r.polarizations.is_empty() {
        return Err(Failure::input("no polarizations requested"));
    }
    let rates = DampingRates::new(cfg.rates.gamma1, cfg.rates.gamma2, cfg.rates.gamma3)?;
    let (x12, peak) = rabi_drive(cfg, solver)?;
    let transition = CircularTransition::parse(&r.transition)?;
    let field = FieldDirection::parse(&r.field_sign)?;
    let widths = linspace(r.width_min_ps, r.width_max_ps, r.steps);
    let mut traces = Vec::new();
    for (k, spec) in r.polarizations.iter().enumerate() {
        let (label, jones) = parse_polarization(spec)?;
        let setup = RabiSetup {
            polarization: jones,
            polarization_label: label,
            transition,
            field,
            peak_field: peak,
            x12_nm: x12,
            rates,
            detuning: r.detuning,
            rise_time_ps: r.rise_time_ps,
            observable: r.observable,
            distortion: Distortion {
                retardance: r.retardance_rad,
                diattenuation: r.diattenuation,
                axis: r.distortion_axis_rad,
            },
            frequency_thz: r.frequency_thz,
            field_tesla: r.field_tesla,
        };
        let mut trace = simulate_rabi_trace(&widths, &setup)?;
        add_gaussian_noise(
            &mut trace.photocurrent,
            r.noise,
            cfg.seed.wrapping_add(k as u64),
        )?;
        traces.push(trace);
    }
    let mut meta = TraceMetadata::new(r.frequency_thz, r.field_tesla);
    meta.wavelength_mm = (r.frequency_thz > 0.0).then(|| wavelength_mm(r.frequency_thz));
    meta.transition = Some(transition);
    meta.rates = Some(rates);
    meta.peak_field = Some(peak);
    meta.x12_nm = Some(x12);
    meta.seed = Some(cfg.seed);
    Ok((traces, meta))
}

pub fn rabi(cfg: &RunConfig) -> Result<Output, Failure> {
    let (traces, meta) = rabi_traces(cfg, None)?;
    let mut out = Output::default();
    for t in &traces {
        let min = t
            .first_minimum()
            .map(|m| format!("first minimum at {m:.2} ps"))
            .unwrap_or_else(|| "no minimum".into());
        out.summary.push(format!("{}: {min}", t.polarization));
    }
    out.file("rabi.csv", io::rabi_traces_csv(&traces)?);
    out.json("rabi_meta.json", &meta)?;
    Ok(out)
}

#[derive(Serialize)]
struct Timescales {
    dephasing: f64,
    ionization: f64,
}

#[derive(Serialize)]
struct FitDoc {
    schema_version: u32,
    polarization: String,
    #[serde(flatten)]
    result: FitResult,
    timescales_ps: Option<Timescales>,
}

fn parameter_map(m: &BTreeMap<String, f64>) -> Result<Vec<(Parameter, f64)>, Failure> {
    m.iter()
        .map(|(k, &v)| Ok((Parameter::parse(k)?, v)))
        .collect()
}

fn build_problem(cfg: &RunConfig, trace: RabiTrace) -> Result<FitProblem, Failure> {
    let f = &cfg.fit;
    let mut initial = initial_guess(&trace)?;
    for (p, v) in parameter_map(&f.guess)? {
        initial.set(p, v);
    }
    let fixed = parameter_map(&f.fixed)?;
    let free: Vec<Parameter> = f
        .free
        .iter()
        .map(|s| Parameter::parse(s))
        .collect::<Result<_, _>>()?;
    for &(p, v) in &fixed {
        if free.contains(&p) {
            return Err(Failure::input(format!("{p} is both free and fixed")));
        }
        initial.set(p, v);
    }
    let mut problem = FitProblem::new(trace, initial).with_free(&free);
    problem.space = f.space;
    problem.restarts = f.restarts;
    problem.seed = cfg.seed;
    problem.max_iterations = f.max_iterations;
    problem.tolerance = f.tolerance;
    problem.observable = f.observable;
    Ok(problem)
}

fn fit_trace(cfg: &RunConfig, trace: RabiTrace) -> Result<(FitDoc, bool), Failure> {
    let label = trace.polarization.clone();
    let problem = build_problem(cfg, trace)?;
    let result = fit(&problem)?;
    let converged = result.converged;
    let timescales_ps = timescales(&result.parameter_set())
        .ok()
        .map(|(dephasing, ionization)| Timescales {
            dephasing,
            ionization,
        });
    Ok((
        FitDoc {
            schema_version: SCHEMA_VERSION,
            polarization: label,
            result,
            timescales_ps,
        },
        converged,
    ))
}

fn fit_summary(doc: &FitDoc) -> String {
    let r = &doc.result;
    let mut s = format!(
        "{}: omega_r = {:.4e} rad/s, gamma2 = {:.4e} 1/s, gamma3 = {:.4e} 1/s, sse = {:.3e}, converged = {}",
        doc.polarization,
        r.value(Parameter::OmegaR),
        r.value(Parameter::Gamma2),
        r.value(Parameter::Gamma3),
        r.sse,
        r.converged
    );
    if let Some(t) = &doc.timescales_ps {
        s.push_str(&format!(
            ", dephasing {:.2} ps, ionization {:.2} ps",
            t.dephasing, t.ionization
        ));
    }
    s
}

pub fn fit_file(
    cfg: &RunConfig,
    trace_text: &str,
    metadata_text: Option<&str>,
    polarization: Option<&str>,
) -> Result<Output, Failure> {
    let meta = metadata_text.map(TraceMetadata::parse).transpose()?;
    let traces = io::read_rabi_traces(trace_text, meta.as_ref())?;
    let trace = match polarization {
        Some(p) => {
            let wanted = PolarizationLabel::parse(p)
                .map(|l| l.label().to_string())
                .unwrap_or_else(|_| p.to_string());
            traces
                .into_iter()
                .find(|t| t.polarization == wanted)
                .ok_or_else(|| Failure::input(format!("trace file has no '{wanted}' trace")))?
        }
        None => traces
            .into_iter()
            .next()
            .expect("reader returns at least one trace"),
    };
    let (doc, converged) = fit_trace(cfg, trace)?;
    let mut out = Output::default();
    out.summary.push(fit_summary(&doc));
    out.json("fit.json", &doc)?;
    if !converged {
        out.deferred = Some(Failure::numerical(
            "fit did not converge within the iteration cap",
        ));
    }
    Ok(out)
}

#[derive(Serialize)]
struct SelftestDoc {
    schema_version: u32,
    seed: u64,
    resonances: Vec<ResonanceDoc>,
    #[serde(rename = "zero_field_transition_THz")]
    zero_field_transition_thz: f64,
    polscan_phase_difference_rad: f64,
    rabi_first_minimum_ps: BTreeMap<String, Option<f64>>,
    fit: FitDoc,
}

/// Reference pipeline: a coarse level diagram, the three resonance pairs,
/// ideal polarizer scans, four noisy Rabi traces and a fit of the σ⁺ trace.
pub fn selftest(cfg: &RunConfig) -> Result<Output, Failure> {
    let mut cfg = cfg.clone();
    cfg.spectrum.b_min = 0.0;
    cfg.spectrum.b_max = 4.0;
    cfg.spectrum.steps = 9;
    let mut out = spectrum(&cfg)?;
    out.summary.clear();

    let solver = level_solver(&cfg)?;
    let resonances = [
        (2.53, "2p+", (2.0, 5.0)),
        (1.57, "2p+", (0.5, 3.0)),
        (1.01, "2p-", (2.0, 5.0)),
    ]
    .into_iter()
    .map(|(f, t, r)| resonance_doc(&solver, &cfg, f, t, r))
    .collect::<Result<Vec<_>, _>>()?;
    let zero = mev_to_thz(solver.transition_energy(
        HydrogenicState::S1,
        HydrogenicState::P2Plus,
        0.0,
        &cfg.donor,
    )?);

    let scan = polscan(&cfg)?;
    let mut dphi = f64::NAN;
    for (name, bytes) in scan.files {
        if name == "polscan_fit.json" {
            let v: serde_json::Value =
                serde_json::from_slice(&bytes).map_err(donorlab::Error::from)?;
            dphi = v["phase_difference_rad"].as_f64().unwrap_or(f64::NAN);
        }
        out.files.push((name, bytes));
    }

    if cfg.rabi.noise == 0.0 {
        cfg.rabi.noise = 0.02;
    }
    let (traces, meta) = rabi_traces(&cfg, Some(&solver))?;
    out.file("rabi.csv", io::rabi_traces_csv(&traces)?);
    out.json("rabi_meta.json", &meta)?;
    let minima = traces
        .iter()
        .map(|t| (t.polarization.clone(), t.first_minimum()))
        .collect();
    let circular = traces
        .iter()
        .find(|t| t.polarization == "sigma+")
        .cloned()
        .unwrap_or_else(|| traces[0].clone());
    let (fit_doc, converged) = fit_trace(&cfg, circular)?;
    out.summary.push(fit_summary(&fit_doc));
    for r in &resonances {
        out.summary.push(format!(
            "{} at {} THz: B = {:.4} T",
            r.transition, r.frequency_thz, r.field_tesla
        ));
    }
    out.summary.push(format!("1s-2p+ at 0 T: {zero:.4} THz"));
    out.summary
        .push(format!("polarizer scan phase difference: {:.6} rad", dphi));
    out.json(
        "selftest.json",
        &SelftestDoc {
            schema_version: SCHEMA_VERSION,
            seed: cfg.seed,
            resonances,
            zero_field_transition_thz: zero,
            polscan_phase_difference_rad: dphi,
            rabi_first_minimum_ps: minima,
            fit: fit_doc,
        },
    )?;
    if !converged {
        out.deferred = Some(Failure::numerical("self-test fit did not converge"));
    }
    Ok(out)
}
