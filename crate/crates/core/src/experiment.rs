//! Synthetic versions of the three measurements: photocurrent versus
//! mirror–polarizer spacing, stroboscopic Rabi traces versus pulse width, and
//! photocurrent versus intensity. Photocurrent is in arbitrary units; only
//! shapes are compared across traces.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    rabi_frequency, rectangular_sweep, simulate_pulse, DampingRates, Drive, Observable, PulseSpec,
};
use crate::fitting::simplex::{self, SimplexOptions};
use crate::polarization::{
    apply_distortion, coupled_fraction, coupled_power, jones_for_delay, CircularTransition,
    FieldDirection, JonesVector, PolarizationLabel,
};
use crate::{Error, Result};

/// Lumped distortion of the focusing optics and cryostat windows.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Distortion {
    pub retardance: f64,
    pub diattenuation: f64,
    pub axis: f64,
}

impl Distortion {
    pub fn is_ideal(&self) -> bool {
        self.retardance == 0.0 && self.diattenuation == 0.0
    }

    pub fn apply(&self, j: &JonesVector) -> Result<JonesVector> {
        if self.is_ideal() {
            return Ok(*j);
        }
        apply_distortion(j, self.retardance, self.diattenuation, self.axis)
    }
}

/// Linear-response model of a polarizer scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanModel {
    pub wavelength_mm: f64,
    /// δ₀ of the stage, radians.
    pub phase_offset: f64,
    /// Relative intensity (low-intensity regime).
    pub intensity: f64,
    /// Photocurrent per unit coupled intensity.
    pub responsivity: f64,
    pub distortion: Distortion,
    /// Constant background photocurrent.
    pub offset: f64,
}

impl ScanModel {
    pub fn ideal(wavelength_mm: f64) -> Self {
        Self {
            wavelength_mm,
            phase_offset: 0.0,
            intensity: 1.0,
            responsivity: 1.0,
            distortion: Distortion::default(),
            offset: 0.0,
        }
    }

    fn delay(&self, spacing_mm: f64) -> f64 {
        4.0 * PI * spacing_mm / self.wavelength_mm + self.phase_offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizerScan {
    pub spacings_mm: Vec<f64>,
    pub photocurrent: Vec<f64>,
    pub field: FieldDirection,
    pub wavelength_mm: f64,
    pub transition: CircularTransition,
}

impl PolarizerScan {
    pub fn validate(&self) -> Result<()> {
        if self.spacings_mm.len() != self.photocurrent.len() {
            return Err(Error::Schema(
                "spacing and photocurrent lengths differ".into(),
            ));
        }
        if self.spacings_mm.len() < 4 {
            return Err(Error::InsufficientData(format!(
                "polarizer scan needs at least 4 points, got {}",
                self.spacings_mm.len()
            )));
        }
        if self.spacings_mm.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "spacings must be strictly increasing".into(),
            ));
        }
        if !(self.wavelength_mm > 0.0) {
            return Err(Error::InvalidParameter(
                "wavelength must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn min_photocurrent(&self) -> f64 {
        self.photocurrent
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Spacing of the largest photocurrent sample.
    pub fn argmax_spacing(&self) -> f64 {
        let k = self
            .photocurrent
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        self.spacings_mm[k]
    }

    pub fn argmin_spacing(&self) -> f64 {
        let k = self
            .photocurrent
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        self.spacings_mm[k]
    }
}

/// Evenly spaced sweep of `n` values over [start, end].
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|k| start + (end - start) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Photocurrent = responsivity · intensity · |a_coupled|² + offset, where
/// a_coupled is the helicity amplitude that drives `transition` for `field`
/// after the distortion element. For lossless optics |a_coupled|² is the
/// coupled power fraction.
pub fn simulate_polarizer_scan(
    spacings_mm: &[f64],
    model: &ScanModel,
    transition: CircularTransition,
    field: FieldDirection,
) -> Result<PolarizerScan> {
    if !(model.intensity >= 0.0) {
        return Err(Error::InvalidParameter("intensity must be >= 0".into()));
    }
    let photocurrent = spacings_mm
        .iter()
        .map(|&d| {
            let j = model.distortion.apply(&jones_for_delay(
                model.delay(d),
                std::f64::consts::FRAC_PI_4,
            ))?;
            let coupled = if model.distortion.diattenuation == 0.0 {
                coupled_fraction(&j, transition, field)?
            } else {
                coupled_power(&j, transition, field)?
            };
            Ok(model.responsivity * model.intensity * coupled + model.offset)
        })
        .collect::<Result<Vec<f64>>>()?;
    let scan = PolarizerScan {
        spacings_mm: spacings_mm.to_vec(),
        photocurrent,
        field,
        wavelength_mm: model.wavelength_mm,
        transition,
    };
    scan.validate()?;
    let span = spacings_mm[spacings_mm.len() - 1] - spacings_mm[0];
    if span < 0.5 * model.wavelength_mm * (1.0 - 1e-12) {
        return Err(Error::InsufficientData(format!(
            "sweep spans {span} mm, less than one period {} mm",
            0.5 * model.wavelength_mm
        )));
    }
    Ok(scan)
}

/// `amplitude · sin(4πd/λ + phase) + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub amplitude: f64,
    /// Radians in [0, 2π).
    pub phase: f64,
    pub offset: f64,
    pub residual_norm: f64,
}

impl SinusoidFit {
    pub fn evaluate(&self, spacing_mm: f64, wavelength_mm: f64) -> f64 {
        self.amplitude * (4.0 * PI * spacing_mm / wavelength_mm + self.phase).sin() + self.offset
    }
}

/// Linear least squares on {sin(4πd/λ), cos(4πd/λ), 1}.
pub fn fit_sinusoid(scan: &PolarizerScan) -> Result<SinusoidFit> {
    scan.validate()?;
    let n = scan.spacings_mm.len();
    let k = 4.0 * PI / scan.wavelength_mm;
    let design = DMatrix::from_fn(n, 3, |i, j| {
        let x = k * scan.spacings_mm[i];
        match j {
            0 => x.sin(),
            1 => x.cos(),
            _ => 1.0,
        }
    });
    let y = DVector::from_column_slice(&scan.photocurrent);
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::DegenerateFit);
    }
    let coef = svd.solve(&y, 0.0).map_err(|_| Error::DegenerateFit)?;
    let (s, c, offset) = (coef[0], coef[1], coef[2]);
    let residual_norm = (design * &coef - y).norm();
    Ok(SinusoidFit {
        amplitude: s.hypot(c),
        phase: c.atan2(s).rem_euclid(2.0 * PI),
        offset,
        residual_norm,
    })
}

/// Phase of `b` relative to `a`, in [0, 2π).
pub fn phase_difference(a: &SinusoidFit, b: &SinusoidFit) -> f64 {
    (b.phase - a.phase).rem_euclid(2.0 * PI)
}

/// Circular polarization that maximises the signal of `transition` with the
/// field along `field`.
pub fn handedness_table(
    transition: CircularTransition,
    field: FieldDirection,
) -> PolarizationLabel {
    match transition.driving_helicity(field) {
        1 => PolarizationLabel::SigmaPlus,
        _ => PolarizationLabel::SigmaMinus,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiTrace {
    pub pulse_widths_ps: Vec<f64>,
    pub photocurrent: Vec<f64>,
    pub polarization: String,
    pub frequency_thz: f64,
    pub field_tesla: f64,
}

impl RabiTrace {
    pub fn validate(&self) -> Result<()> {
        if self.pulse_widths_ps.len() != self.photocurrent.len() {
            return Err(Error::Schema(
                "pulse width and photocurrent lengths differ".into(),
            ));
        }
        if self.pulse_widths_ps.len() < 4 {
            return Err(Error::InsufficientData(format!(
                "Rabi trace needs at least 4 points, got {}",
                self.pulse_widths_ps.len()
            )));
        }
        if self
            .pulse_widths_ps
            .iter()
            .any(|w| !(*w >= 0.0 && w.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "pulse widths must be finite and >= 0".into(),
            ));
        }
        if self.pulse_widths_ps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "pulse widths must be increasing".into(),
            ));
        }
        if self.photocurrent.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "photocurrent must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Position of the first minimum after the signal has risen, robust to
    /// isolated noise dips.
    pub fn first_minimum(&self) -> Option<f64> {
        rabi_minimum(&self.pulse_widths_ps, &self.photocurrent)
    }
}

/// Stroboscopic Rabi experiment on one transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiSetup {
    pub polarization: JonesVector,
    pub polarization_label: String,
    pub transition: CircularTransition,
    pub field: FieldDirection,
    /// Peak THz field, V/m.
    pub peak_field: f64,
    pub x12_nm: f64,
    pub rates: DampingRates,
    /// ω − ω₀, rad/s.
    pub detuning: f64,
    pub rise_time_ps: f64,
    pub observable: Observable,
    pub distortion: Distortion,
    pub frequency_thz: f64,
    pub field_tesla: f64,
}

impl RabiSetup {
    pub fn new(
        label: PolarizationLabel,
        peak_field: f64,
        x12_nm: f64,
        rates: DampingRates,
    ) -> Self {
        Self {
            polarization: label.jones(),
            polarization_label: label.label().to_string(),
            transition: CircularTransition::ToP2Plus,
            field: FieldDirection::PlusZ,
            peak_field,
            x12_nm,
            rates,
            detuning: 0.0,
            rise_time_ps: 0.0,
            observable: Observable::default(),
            distortion: Distortion::default(),
            frequency_thz: 2.54,
            field_tesla: 3.62,
        }
    }

    /// Power fraction of the beam that drives the transition.
    pub fn coupled_fraction(&self) -> Result<f64> {
        let j = self.distortion.apply(&self.polarization)?;
        coupled_fraction(&j, self.transition, self.field)
    }

    /// Ω_eff = Ω(E_peak)·√f: only the matching circular amplitude drives the
    /// transition, and f is a power fraction.
    pub fn effective_rabi_frequency(&self) -> Result<f64> {
        let f = self.coupled_fraction()?;
        Ok(rabi_frequency(self.peak_field * f.sqrt(), self.x12_nm))
    }
}

pub fn simulate_rabi_trace(widths_ps: &[f64], setup: &RabiSetup) -> Result<RabiTrace> {
    let f = setup.coupled_fraction()?;
    let effective_field = setup.peak_field * f.sqrt();
    let signal: Vec<f64> = if setup.rise_time_ps == 0.0 {
        let drive = Drive {
            rabi_frequency: rabi_frequency(effective_field, setup.x12_nm),
            detuning: setup.detuning,
        };
        drive.validate()?;
        rectangular_sweep(widths_ps, &drive, &setup.rates)?
            .iter()
            .map(|s| setup.observable.evaluate(s))
            .collect()
    } else {
        widths_ps
            .iter()
            .map(|&w| {
                let pulse = PulseSpec {
                    width_ps: w,
                    field_amplitude: effective_field,
                    rise_time_ps: if w > 0.0 { setup.rise_time_ps } else { 0.0 },
                };
                simulate_pulse(&pulse, setup.x12_nm, setup.detuning, &setup.rates)
                    .map(|s| setup.observable.evaluate(&s))
            })
            .collect::<Result<_>>()?
    };
    Ok(RabiTrace {
        pulse_widths_ps: widths_ps.to_vec(),
        photocurrent: signal,
        polarization: setup.polarization_label.clone(),
        frequency_thz: setup.frequency_thz,
        field_tesla: setup.field_tesla,
    })
}

/// First interior local minimum of `y(x)`, refined by a parabola through the
/// neighbouring samples.
pub fn first_local_minimum(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    for k in 1..n.saturating_sub(1) {
        if y[k] < y[k - 1] && y[k] <= y[k + 1] {
            let (x0, x1, x2) = (x[k - 1], x[k], x[k + 1]);
            let (y0, y1, y2) = (y[k - 1], y[k], y[k + 1]);
            let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
            let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
            let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
            if a > 0.0 {
                let v = -b / (2.0 * a);
                if v.is_finite() && v >= x0 && v <= x2 {
                    return Some(v);
                }
            }
            return Some(x1);
        }
    }
    None
}

/// First minimum after the trace has climbed most of the way to its peak,
/// taken on a three-point running mean so noise dips are skipped.
pub fn rabi_minimum(w: &[f64], y: &[f64]) -> Option<f64> {
    let n = y.len().min(w.len());
    if n < 3 {
        return None;
    }
    let smooth: Vec<f64> = (0..n)
        .map(|k| {
            let lo = k.saturating_sub(1);
            let hi = (k + 1).min(n - 1);
            y[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let base = smooth[0];
    let peak = smooth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rise = smooth
        .iter()
        .position(|&v| v - base >= 0.7 * (peak - base))?;
    first_local_minimum(&w[rise..], &smooth[rise..])
}

/// Adds N(0, σ²) noise to every sample from a ChaCha8 stream seeded by `seed`.
pub fn add_gaussian_noise(values: &mut [f64], sigma: f64, seed: u64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    for v in values.iter_mut() {
        *v += normal.sample(&mut rng);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationCurve {
    pub intensities: Vec<f64>,
    pub signal: Vec<f64>,
    pub s_max: f64,
    pub i_sat: f64,
}

fn saturation_model(i: f64, s_max: f64, i_sat: f64) -> f64 {
    s_max * (1.0 - (-i / i_sat).exp())
}

/// signal = s_max·(1 − exp(−I/i_sat)).
pub fn simulate_saturation(intensities: &[f64], s_max: f64, i_sat: f64) -> Result<SaturationCurve> {
    if !(i_sat > 0.0) || !(s_max >= 0.0) {
        return Err(Error::InvalidParameter(
            "need s_max >= 0 and i_sat > 0".into(),
        ));
    }
    if intensities.iter().any(|i| !(*i >= 0.0)) {
        return Err(Error::InvalidParameter("intensities must be >= 0".into()));
    }
    Ok(SaturationCurve {
        intensities: intensities.to_vec(),
        signal: intensities
            .iter()
            .map(|&i| saturation_model(i, s_max, i_sat))
            .collect(),
        s_max,
        i_sat,
    })
}

/// Least-squares (s_max, i_sat) for a measured saturation curve.
pub fn fit_saturation(intensities: &[f64], signal: &[f64]) -> Result<SaturationCurve> {
    if intensities.len() != signal.len() || intensities.len() < 4 {
        return Err(Error::InsufficientData(
            "saturation fit needs >= 4 paired points".into(),
        ));
    }
    let top = signal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let i_max = intensities.iter().copied().fold(0.0, f64::max);
    if !(top > 0.0 && i_max > 0.0) {
        return Err(Error::Unidentifiable(
            "saturation signal is not positive".into(),
        ));
    }
    let sse = |x: &[f64]| {
        let (s_max, i_sat) = (x[0].exp(), x[1].exp());
        intensities
            .iter()
            .zip(signal)
            .map(|(&i, &s)| (saturation_model(i, s_max, i_sat) - s).powi(2))
            .sum::<f64>()
    };
    let out = simplex::minimize(
        sse,
        &[top.ln(), (0.5 * i_max).ln()],
        &[0.2, 0.5],
        &SimplexOptions::default(),
    );
    Ok(SaturationCurve {
        intensities: intensities.to_vec(),
        signal: signal.to_vec(),
        s_max: out.x[0].exp(),
        i_sat: out.x[1].exp(),
    })
}
