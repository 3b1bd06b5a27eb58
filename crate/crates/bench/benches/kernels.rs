use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use donorlab::dynamics::{propagate_constant, rectangular_sweep};
use donorlab::experiment::{fit_sinusoid, linspace, simulate_polarizer_scan};
use donorlab::fitting::{fit, forward_model};
use donorlab::spectrum::solve_level;
use donorlab::{
    BlochState, CircularTransition, DampingRates, DonorParameters, Drive, FieldDirection,
    FitProblem, HydrogenicState, LevelSolver, Observable, Parameter, ParameterSet, RabiTrace,
    ScanModel, VariationalBasisSpec,
};

const OMEGA: f64 = 2.0 * PI / 15e-12;

fn spectrum(c: &mut Criterion) {
    let basis = VariationalBasisSpec::default();
    c.bench_function("solve_level 2p+ at gamma = 0.5", |b| {
        b.iter(|| solve_level(HydrogenicState::P2Plus, black_box(0.5), &basis).unwrap())
    });
    let solver = LevelSolver::new(basis).unwrap();
    let p = DonorParameters::default();
    let mut g = c.benchmark_group("resonance");
    g.sample_size(10);
    g.bench_function("resonance_field 2.53 THz", |b| {
        b.iter(|| {
            solver
                .resonance_field(black_box(2.53), HydrogenicState::P2Plus, &p, (2.0, 5.0))
                .unwrap()
        })
    });
    g.finish();
}

fn dynamics(c: &mut Criterion) {
    let r = DampingRates::sigma_plus_fit();
    let d = Drive::resonant(OMEGA);
    c.bench_function("propagate 40 ps", |b| {
        b.iter(|| propagate_constant(&BlochState::ground(), &d, &r, black_box(40.0)).unwrap())
    });
    let widths = linspace(0.0, 40.0, 81);
    c.bench_function("rectangular sweep 81 widths", |b| {
        b.iter(|| rectangular_sweep(black_box(&widths), &d, &r).unwrap())
    });
}

fn fitting(c: &mut Criterion) {
    let truth = ParameterSet::new(OMEGA, 1.98e11, 1.22e11);
    let widths = linspace(0.0, 40.0, 81);
    let trace = RabiTrace {
        photocurrent: forward_model(&truth, &widths, Observable::default()).unwrap(),
        pulse_widths_ps: widths,
        polarization: "sigma+".into(),
        frequency_thz: 2.54,
        field_tesla: 3.62,
    };
    let guess = ParameterSet {
        omega_r: 1.3 * OMEGA,
        gamma2: 1.2e11,
        gamma3: 2.0e11,
        ..truth
    };
    let problem = FitProblem::new(trace, guess).with_free(&[
        Parameter::OmegaR,
        Parameter::Gamma2,
        Parameter::Gamma3,
    ]);
    let mut g = c.benchmark_group("fit");
    g.sample_size(10);
    g.bench_function("fit sigma+ trace", |b| {
        b.iter(|| fit(black_box(&problem)).unwrap())
    });
    g.finish();

    let spacings = linspace(0.0, 0.24, 97);
    let scan = simulate_polarizer_scan(
        &spacings,
        &ScanModel::ideal(0.118),
        CircularTransition::ToP2Plus,
        FieldDirection::PlusZ,
    )
    .unwrap();
    c.bench_function("sinusoid fit 97 points", |b| {
        b.iter(|| fit_sinusoid(black_box(&scan)).unwrap())
    });
}

criterion_group!(benches, spectrum, dynamics, fitting);
criterion_main!(benches);
