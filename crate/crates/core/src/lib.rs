//! Numerical laboratory for THz spectroscopy of shallow hydrogenic donors in GaAs.
//!
//! The crate is organised by physical subsystem:
//!
//! * [`spectrum`]: variational donor levels in a magnetic field, Landau levels,
//!   transition energies, resonance fields and dipole matrix elements.
//! * [`polarization`]: Jones/Stokes description of the mirror–polarizer delay
//!   stage and the σ± decomposition relative to the static field.
//! * [`dynamics`]: damped two-level density-matrix equations driven by a THz pulse.
//! * [`experiment`]: synthetic polarizer scans, stroboscopic Rabi traces and
//!   saturation curves, plus the sinusoid analysis of scans.
//! * [`fitting`]: simplex least-squares extraction of Rabi frequency and
//!   damping rates from Rabi traces.
//! * [`io`]: CSV/JSON trace formats shared with the command-line tool.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod dynamics;
mod error;
pub mod experiment;
pub mod fitting;
pub mod io;
pub mod polarization;
pub mod quadrature;
pub mod spectrum;

pub use error::{Error, Result};

pub use dynamics::{BlochState, DampingRates, Drive, Observable, PulseSpec};
pub use experiment::{
    Distortion, PolarizerScan, RabiSetup, RabiTrace, SaturationCurve, ScanModel, SinusoidFit,
};
pub use fitting::{FitProblem, FitResult, Parameter, ParameterSet, ParameterSpace};
pub use polarization::{
    CircularDecomposition, CircularTransition, FieldDirection, JonesVector, MirrorPolarizerStage,
    PolarizationLabel, StokesVector,
};
pub use spectrum::{
    DonorParameters, EffectiveUnits, HydrogenicState, LandauLevel, LevelSolution, LevelSolver,
    VariationalBasisSpec,
};
