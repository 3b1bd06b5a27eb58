//! Least-squares extraction of Rabi frequency and damping rates from
//! stroboscopic Rabi traces.

pub mod simplex;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{rectangular_sweep, DampingRates, Drive, Observable};
use crate::experiment::RabiTrace;
use crate::{Error, Result};
use simplex::{SimplexOptions, SimplexOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    OmegaR,
    Gamma1,
    Gamma2,
    Gamma3,
    Detuning,
    Scale,
    Offset,
}

impl Parameter {
    pub const ALL: [Parameter; 7] = [
        Parameter::OmegaR,
        Parameter::Gamma1,
        Parameter::Gamma2,
        Parameter::Gamma3,
        Parameter::Detuning,
        Parameter::Scale,
        Parameter::Offset,
    ];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Parameter::OmegaR => "omega_r",
            Parameter::Gamma1 => "gamma1",
            Parameter::Gamma2 => "gamma2",
            Parameter::Gamma3 => "gamma3",
            Parameter::Detuning => "detuning",
            Parameter::Scale => "scale",
            Parameter::Offset => "offset",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Parameter::OmegaR | Parameter::Detuning => "rad/s",
            Parameter::Gamma1 | Parameter::Gamma2 | Parameter::Gamma3 => "1/s",
            Parameter::Scale | Parameter::Offset => "a.u.",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Parameter::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown fit parameter '{s}'")))
    }

    /// Default search interval.
    pub fn default_bounds(self) -> (f64, f64) {
        match self {
            Parameter::OmegaR => (1e9, 1e13),
            Parameter::Gamma1 => (0.0, 1e13),
            Parameter::Gamma2 | Parameter::Gamma3 => (1e7, 1e13),
            Parameter::Detuning => (-1e13, 1e13),
            Parameter::Scale => (1e-6, 1e6),
            Parameter::Offset => (0.0, 1e3),
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Full parameter vector of the forward model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub omega_r: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub detuning: f64,
    pub scale: f64,
    pub offset: f64,
}

impl ParameterSet {
    /// Resonant, no recombination, unit scale and zero offset.
    pub fn new(omega_r: f64, gamma2: f64, gamma3: f64) -> Self {
        Self {
            omega_r,
            gamma1: 0.0,
            gamma2,
            gamma3,
            detuning: 0.0,
            scale: 1.0,
            offset: 0.0,
        }
    }

    pub fn get(&self, p: Parameter) -> f64 {
        self.to_array()[p.index()]
    }

    pub fn set(&mut self, p: Parameter, v: f64) {
        let mut a = self.to_array();
        a[p.index()] = v;
        *self = Self::from_array(a);
    }

    pub fn with(mut self, p: Parameter, v: f64) -> Self {
        self.set(p, v);
        self
    }

    fn to_array(self) -> [f64; 7] {
        [
            self.omega_r,
            self.gamma1,
            self.gamma2,
            self.gamma3,
            self.detuning,
            self.scale,
            self.offset,
        ]
    }

    fn from_array(a: [f64; 7]) -> Self {
        Self {
            omega_r: a[0],
            gamma1: a[1],
            gamma2: a[2],
            gamma3: a[3],
            detuning: a[4],
            scale: a[5],
            offset: a[6],
        }
    }

    pub fn rates(&self) -> DampingRates {
        DampingRates {
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            gamma3: self.gamma3,
        }
    }

    pub fn drive(&self) -> Drive {
        Drive {
            rabi_frequency: self.omega_r,
            detuning: self.detuning,
        }
    }
}

/// Coordinates in which the simplex moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterSpace {
    /// ln(value) for every parameter whose lower bound is positive; the rest
    /// stay linear.
    #[default]
    Log,
    Linear,
}

/// scale·obs(t_p) + offset for every width.
pub fn forward_model(
    params: &ParameterSet,
    widths_ps: &[f64],
    observable: Observable,
) -> Result<Vec<f64>> {
    let drive = params.drive();
    drive.validate()?;
    let rates = params.rates();
    rates.validate()?;
    Ok(rectangular_sweep(widths_ps, &drive, &rates)?
        .iter()
        .map(|s| params.scale * observable.evaluate(s) + params.offset)
        .collect())
}

#[derive(Debug, Clone)]
pub struct FitProblem {
    pub trace: RabiTrace,
    pub free: Vec<Parameter>,
    /// Starting point for free parameters and values of fixed ones.
    pub initial: ParameterSet,
    pub bounds: Vec<(Parameter, f64, f64)>,
    pub space: ParameterSpace,
    pub observable: Observable,
    /// Additional seeded starts besides the initial guess.
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl FitProblem {
    /// Frees Ω_R, γ₂, γ₃, scale and offset; Γ₁ and detuning stay fixed.
    pub fn new(trace: RabiTrace, initial: ParameterSet) -> Self {
        Self {
            trace,
            free: vec![
                Parameter::OmegaR,
                Parameter::Gamma2,
                Parameter::Gamma3,
                Parameter::Scale,
                Parameter::Offset,
            ],
            initial,
            bounds: Vec::new(),
            space: ParameterSpace::Log,
            observable: Observable::default(),
            restarts: 3,
            seed: 0,
            max_iterations: 100_000,
            tolerance: 1e-8,
        }
    }

    pub fn with_free(mut self, free: &[Parameter]) -> Self {
        self.free = free.to_vec();
        self
    }

    pub fn bounds_of(&self, p: Parameter) -> (f64, f64) {
        self.bounds
            .iter()
            .rev()
            .find(|b| b.0 == p)
            .map(|b| (b.1, b.2))
            .unwrap_or_else(|| p.default_bounds())
    }

    fn is_log(&self, p: Parameter) -> bool {
        self.space == ParameterSpace::Log && self.bounds_of(p).0 > 0.0
    }

    fn validate(&self) -> Result<()> {
        self.trace.validate()?;
        let mut seen = Vec::new();
        for &p in &self.free {
            if seen.contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "parameter {p} listed twice"
                )));
            }
            seen.push(p);
            let (lo, hi) = self.bounds_of(p);
            if !(lo < hi) {
                return Err(Error::InvalidParameter(format!(
                    "empty bounds for {p}: [{lo}, {hi}]"
                )));
            }
            let v = self.initial.get(p);
            if !(v >= lo && v <= hi) {
                return Err(Error::InvalidParameter(format!(
                    "initial {p} = {v} outside bounds [{lo}, {hi}]"
                )));
            }
        }
        if self.free.is_empty() {
            return Err(Error::InvalidParameter("no free parameters".into()));
        }
        let n = self.trace.photocurrent.len();
        if n < self.free.len() + 2 {
            return Err(Error::InsufficientData(format!(
                "{n} points for {} free parameters; need at least {}",
                self.free.len(),
                self.free.len() + 2
            )));
        }
        let y = &self.trace.photocurrent;
        let (lo, hi) = y
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        if !(hi - lo > 1e-12 * hi.abs().max(lo.abs()).max(1e-300)) {
            return Err(Error::Unidentifiable("trace is constant".into()));
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "tolerance and iteration cap must be positive".into(),
            ));
        }
        Ok(())
    }

    fn encode(&self, p: ParameterSet) -> Vec<f64> {
        self.free
            .iter()
            .map(|&q| {
                if self.is_log(q) {
                    p.get(q).ln()
                } else {
                    p.get(q)
                }
            })
            .collect()
    }

    fn decode(&self, x: &[f64]) -> ParameterSet {
        let mut p = self.initial;
        for (&q, &v) in self.free.iter().zip(x) {
            p.set(q, if self.is_log(q) { v.exp() } else { v });
        }
        p
    }

    fn coordinate_bounds(&self) -> Vec<(f64, f64)> {
        self.free
            .iter()
            .map(|&q| {
                let (lo, hi) = self.bounds_of(q);
                if self.is_log(q) {
                    (lo.ln(), hi.ln())
                } else {
                    (lo, hi)
                }
            })
            .collect()
    }

    fn initial_steps(&self, x0: &[f64]) -> Vec<f64> {
        let y = &self.trace.photocurrent;
        let span = y.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - y.iter().copied().fold(f64::INFINITY, f64::min);
        self.free
            .iter()
            .zip(x0)
            .map(|(&q, &v)| {
                if self.is_log(q) {
                    0.2
                } else if v != 0.0 {
                    0.2 * v.abs()
                } else if matches!(q, Parameter::Offset | Parameter::Scale) {
                    0.05 * span
                } else {
                    0.05 * self.initial.omega_r.abs().max(1e9)
                }
            })
            .collect()
    }

    /// Sum of squared residuals; non-finite when the forward model fails.
    pub fn sse(&self, params: &ParameterSet) -> f64 {
        match forward_model(params, &self.trace.pulse_widths_ps, self.observable) {
            Ok(pred) => pred
                .iter()
                .zip(&self.trace.photocurrent)
                .map(|(a, b)| (a - b) * (a - b))
                .sum(),
            Err(_) => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedParameter {
    pub name: Parameter,
    pub value: f64,
    pub unit: String,
    pub free: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: Vec<FittedParameter>,
    pub sse: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub space: ParameterSpace,
    pub observable: Observable,
    /// Best SSE after every simplex iteration of the winning start and the
    /// final polish.
    #[serde(skip)]
    pub sse_history: Vec<f64>,
}

impl FitResult {
    pub fn value(&self, p: Parameter) -> f64 {
        self.parameters
            .iter()
            .find(|q| q.name == p)
            .map(|q| q.value)
            .expect("every parameter is reported")
    }

    pub fn parameter_set(&self) -> ParameterSet {
        let mut s = ParameterSet::new(0.0, 0.0, 0.0);
        for p in &self.parameters {
            s.set(p.name, p.value);
        }
        s
    }
}

fn run(problem: &FitProblem, x0: &[f64], steps: &[f64]) -> SimplexOutcome {
    let opts = SimplexOptions {
        max_iterations: problem.max_iterations,
        tolerance: problem.tolerance,
        bounds: Some(problem.coordinate_bounds()),
    };
    simplex::minimize(|x| problem.sse(&problem.decode(x)), x0, steps, &opts)
}

/// Nelder–Mead fit from the initial guess and `restarts` seeded starts
/// scattered around it, followed by a restart from the best vertex.
pub fn fit(problem: &FitProblem) -> Result<FitResult> {
    problem.validate()?;
    let x0 = problem.encode(problem.initial);
    let base_steps = problem.initial_steps(&x0);
    let bounds = problem.coordinate_bounds();

    let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
    let mut starts = vec![(x0.clone(), base_steps.clone())];
    for _ in 0..problem.restarts {
        let mut x = x0.clone();
        let mut steps = base_steps.clone();
        for k in 0..x.len() {
            let jitter: f64 = rng.random_range(-1.0..1.0);
            x[k] = (x[k] + jitter * base_steps[k]).clamp(bounds[k].0, bounds[k].1);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            steps[k] *= sign * rng.random_range(0.5..1.5);
        }
        starts.push((x, steps));
    }

    let outcomes: Vec<SimplexOutcome> =
        starts.par_iter().map(|(x, s)| run(problem, x, s)).collect();
    let mut iterations: usize = outcomes.iter().map(|o| o.iterations).sum();
    let mut evaluations: usize = outcomes.iter().map(|o| o.evaluations).sum();
    let best = outcomes
        .into_iter()
        .reduce(|a, b| if b.fx < a.fx { b } else { a })
        .expect("at least one start");

    let polish = run(problem, &best.x, &base_steps);
    iterations += polish.iterations;
    evaluations += polish.evaluations;
    let mut history = best.history;
    history.extend(polish.history);
    let (x, sse, converged) = if polish.fx <= best.fx {
        (polish.x, polish.fx, polish.converged)
    } else {
        (best.x, best.fx, best.converged)
    };
    if !sse.is_finite() {
        return Err(Error::Unidentifiable(
            "forward model failed at every vertex".into(),
        ));
    }

    let params = problem.decode(&x);
    Ok(FitResult {
        parameters: Parameter::ALL
            .into_iter()
            .map(|p| FittedParameter {
                name: p,
                value: params.get(p),
                unit: p.unit().to_string(),
                free: problem.free.contains(&p),
            })
            .collect(),
        sse,
        iterations,
        evaluations,
        converged,
        space: problem.space,
        observable: problem.observable,
        sse_history: history,
    })
}

/// Starting point read off the trace: Ω_R from the first minimum (one Rabi
/// period), both damping rates at a quarter of the sampled span, scale from
/// the largest excursion and offset from the shortest pulse.
pub fn initial_guess(trace: &RabiTrace) -> Result<ParameterSet> {
    trace.validate()?;
    let w = &trace.pulse_widths_ps;
    let y = &trace.photocurrent;
    let span_ps = w[w.len() - 1] - w[0];
    let period_ps = trace.first_minimum().unwrap_or(span_ps);
    let offset = y[0].max(0.0);
    let peak = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rate = 4e12 / span_ps;
    let (lo, hi) = Parameter::OmegaR.default_bounds();
    Ok(ParameterSet {
        omega_r: (2.0 * std::f64::consts::PI / (period_ps * 1e-12)).clamp(lo, hi),
        gamma1: 0.0,
        gamma2: rate,
        gamma3: rate,
        detuning: 0.0,
        scale: (peak - offset).max(1e-6),
        offset,
    })
}

/// (1/γ₂, 1/γ₃) in ps.
pub fn timescales(params: &ParameterSet) -> Result<(f64, f64)> {
    if !(params.gamma2 > 0.0) || !(params.gamma3 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "timescales need positive rates, got gamma2 = {}, gamma3 = {}",
            params.gamma2, params.gamma3
        )));
    }
    Ok((1e12 / params.gamma2, 1e12 / params.gamma3))
}
