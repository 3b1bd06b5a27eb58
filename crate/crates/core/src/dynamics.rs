//! Damped two-level density-matrix dynamics in the rotating frame.
//!
//! With Ω the Rabi frequency, Δ = ω − ω₀ the detuning and σ₁₂ the slowly
//! varying coherence,
//!
//! ```text
//! ρ̇₁₁ = −Ω Im σ₁₂ + Γ₁ρ₂₂
//! ρ̇₂₂ = +Ω Im σ₁₂ − (Γ₁ + γ₃)ρ₂₂
//! σ̇₁₂ = −iΔσ₁₂ + (i/2)Ω(ρ₁₁ − ρ₂₂) − γ₂σ₁₂
//! ṅ   = γ₃ρ₂₂                       (population lost to the continuum)
//! ```
//!
//! Time is measured in picoseconds internally; rates are given in s⁻¹ and
//! rad/s at the API boundary.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{ELEMENTARY_CHARGE, HBAR};
use crate::{Error, Result};

/// Seconds → picoseconds for rates.
const PER_SECOND_TO_PER_PS: f64 = 1e-12;

/// Self-consistency target of the step-halving RK4 integrator.
pub const STEP_TOLERANCE: f64 = 1e-9;

/// Largest step count tried before giving up.
const MAX_STEPS: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub rho11: f64,
    pub rho22: f64,
    pub sigma12: Complex64,
    pub ionized: f64,
}

impl BlochState {
    pub fn ground() -> Self {
        Self {
            rho11: 1.0,
            rho22: 0.0,
            sigma12: Complex64::new(0.0, 0.0),
            ionized: 0.0,
        }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [
            self.rho11,
            self.rho22,
            self.sigma12.re,
            self.sigma12.im,
            self.ionized,
        ]
    }

    pub fn from_array(y: [f64; 5]) -> Self {
        Self {
            rho11: y[0],
            rho22: y[1],
            sigma12: Complex64::new(y[2], y[3]),
            ionized: y[4],
        }
    }

    /// ρ₁₁ + ρ₂₂ + ionized, conserved by the equations of motion.
    pub fn trace(&self) -> f64 {
        self.rho11 + self.rho22 + self.ionized
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Γ₁ (recombination), γ₂ (dephasing), γ₃ (ionization), all in s⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingRates {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
}

impl Default for DampingRates {
    fn default() -> Self {
        Self::undamped()
    }
}

impl DampingRates {
    pub fn new(gamma1: f64, gamma2: f64, gamma3: f64) -> Result<Self> {
        let r = Self {
            gamma1,
            gamma2,
            gamma3,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn undamped() -> Self {
        Self {
            gamma1: 0.0,
            gamma2: 0.0,
            gamma3: 0.0,
        }
    }

    /// Rates extracted from the σ⁺ Rabi trace at 2.54 THz, 3.62 T
    /// (Γ₁ = 0, γ₂ = 1.98×10¹¹ s⁻¹, γ₃ = 1.22×10¹¹ s⁻¹).
    pub fn sigma_plus_fit() -> Self {
        Self {
            gamma1: 0.0,
            gamma2: 1.98e11,
            gamma3: 1.22e11,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma3", self.gamma3),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Rabi frequency and detuning, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub rabi_frequency: f64,
    pub detuning: f64,
}

impl Drive {
    pub fn resonant(rabi_frequency: f64) -> Self {
        Self {
            rabi_frequency,
            detuning: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rabi_frequency >= 0.0
            && self.rabi_frequency.is_finite()
            && self.detuning.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "Rabi frequency must be >= 0 and finite, got {}",
                self.rabi_frequency
            )));
        }
        Ok(())
    }
}

/// Trapezoidal THz pulse: linear rise, flat top, linear fall; total width
/// `width_ps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub width_ps: f64,
    /// Peak field, V/m.
    pub field_amplitude: f64,
    pub rise_time_ps: f64,
}

impl PulseSpec {
    pub fn rectangular(width_ps: f64, field_amplitude: f64) -> Self {
        Self {
            width_ps,
            field_amplitude,
            rise_time_ps: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width_ps >= 0.0 && self.width_ps.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "pulse width must be >= 0, got {}",
                self.width_ps
            )));
        }
        if !(self.field_amplitude >= 0.0 && self.field_amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "field amplitude must be >= 0, got {}",
                self.field_amplitude
            )));
        }
        if !(self.rise_time_ps >= 0.0) {
            return Err(Error::InvalidParameter("rise time must be >= 0".into()));
        }
        if self.rise_time_ps > 0.0 && self.rise_time_ps >= 0.5 * self.width_ps {
            return Err(Error::InvalidParameter(format!(
                "rise time {} ps must be shorter than half the width {} ps",
                self.rise_time_ps, self.width_ps
            )));
        }
        Ok(())
    }
}

/// Which quantity of the final state is reported as photocurrent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// 1 − ρ₁₁ at the end of the pulse.
    #[default]
    GroundDepletion,
    /// Only the population already in the continuum.
    IonizedOnly,
}

impl Observable {
    pub fn evaluate(self, s: &BlochState) -> f64 {
        match self {
            Observable::GroundDepletion => photoconductivity(s),
            Observable::IonizedOnly => s.ionized,
        }
    }
}

/// Ω_R = e·E·x₁₂/ħ in rad/s, for E in V/m and x₁₂ in nm.
pub fn rabi_frequency(field: f64, x12_nm: f64) -> f64 {
    ELEMENTARY_CHARGE * field * x12_nm * 1e-9 / HBAR
}

/// Field amplitude (V/m) that gives Rabi frequency `omega` for dipole `x12_nm`.
pub fn field_for_rabi_frequency(omega: f64, x12_nm: f64) -> f64 {
    omega * HBAR / (ELEMENTARY_CHARGE * x12_nm * 1e-9)
}

pub fn photoconductivity(s: &BlochState) -> f64 {
    1.0 - s.rho11
}

/// Generator of the 5-component real system in ps⁻¹, acting on
/// (ρ₁₁, ρ₂₂, Re σ₁₂, Im σ₁₂, ionized).
#[derive(Debug, Clone, Copy)]
struct Generator {
    omega: f64,
    detuning: f64,
    g1: f64,
    g2: f64,
    g3: f64,
}

impl Generator {
    fn new(d: &Drive, r: &DampingRates) -> Self {
        Self {
            omega: d.rabi_frequency * PER_SECOND_TO_PER_PS,
            detuning: d.detuning * PER_SECOND_TO_PER_PS,
            g1: r.gamma1 * PER_SECOND_TO_PER_PS,
            g2: r.gamma2 * PER_SECOND_TO_PER_PS,
            g3: r.gamma3 * PER_SECOND_TO_PER_PS,
        }
    }

    #[inline]
    fn apply(&self, y: &[f64; 5]) -> [f64; 5] {
        let [r11, r22, u, v, _] = *y;
        [
            -self.omega * v + self.g1 * r22,
            self.omega * v - (self.g1 + self.g3) * r22,
            self.detuning * v - self.g2 * u,
            -self.detuning * u + 0.5 * self.omega * (r11 - r22) - self.g2 * v,
            self.g3 * r22,
        ]
    }

    /// Largest rate, a proxy for the spectral radius.
    fn scale(&self) -> f64 {
        self.omega
            .abs()
            .max(self.detuning.abs())
            .max(self.g1 + self.g3)
            .max(self.g2)
    }

    fn rk4(&self, y: [f64; 5], h: f64, steps: usize) -> [f64; 5] {
        let mut y = y;
        let axpy = |a: &[f64; 5], k: &[f64; 5], s: f64| -> [f64; 5] {
            std::array::from_fn(|i| a[i] + s * k[i])
        };
        for _ in 0..steps {
            let k1 = self.apply(&y);
            let k2 = self.apply(&axpy(&y, &k1, 0.5 * h));
            let k3 = self.apply(&axpy(&y, &k2, 0.5 * h));
            let k4 = self.apply(&axpy(&y, &k3, h));
            y = std::array::from_fn(|i| {
                y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            });
        }
        y
    }
}

/// Time derivative of `s` (per second).
pub fn bloch_rhs(s: &BlochState, d: &Drive, r: &DampingRates) -> BlochState {
    let g = Generator::new(d, r);
    let dy = g.apply(&s.to_array());
    BlochState::from_array(dy.map(|x| x / PER_SECOND_TO_PER_PS))
}

/// Advance `s` by `duration_ps` under constant drive and damping.
///
/// Fixed-step RK4; the step count starts at about 20 steps per unit of the
/// fastest rate and doubles until two successive resolutions agree to
/// [`STEP_TOLERANCE`] in every component.
pub fn propagate_constant(
    s: &BlochState,
    d: &Drive,
    r: &DampingRates,
    duration_ps: f64,
) -> Result<BlochState> {
    d.validate()?;
    r.validate()?;
    if !(duration_ps >= 0.0 && duration_ps.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "duration must be >= 0, got {duration_ps} ps"
        )));
    }
    if duration_ps == 0.0 {
        return Ok(*s);
    }
    let g = Generator::new(d, r);
    let y0 = s.to_array();
    let initial = (duration_ps * g.scale() / 0.05).ceil().max(1.0);
    if !(initial <= MAX_STEPS as f64) {
        return Err(Error::StepUnderflow {
            steps: if initial.is_finite() {
                initial as usize
            } else {
                usize::MAX
            },
            duration_ps,
        });
    }
    let mut steps = initial as usize;
    let mut coarse = g.rk4(y0, duration_ps / steps as f64, steps);
    loop {
        let fine_steps = 2 * steps;
        if fine_steps > MAX_STEPS {
            return Err(Error::StepUnderflow {
                steps: fine_steps,
                duration_ps,
            });
        }
        let fine = g.rk4(y0, duration_ps / fine_steps as f64, fine_steps);
        let diff = coarse
            .iter()
            .zip(&fine)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if !diff.is_finite() {
            return Err(Error::StepUnderflow {
                steps: fine_steps,
                duration_ps,
            });
        }
        if diff < STEP_TOLERANCE {
            return Ok(BlochState::from_array(fine));
        }
        steps = fine_steps;
        coarse = fine;
    }
}

/// Number of constant-amplitude slices used for each linear ramp.
const RAMP_SLICES: usize = 32;

/// Drive a ground-state donor with one pulse and return the final state.
pub fn simulate_pulse(
    p: &PulseSpec,
    x12_nm: f64,
    detuning: f64,
    r: &DampingRates,
) -> Result<BlochState> {
    p.validate()?;
    if !(x12_nm > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dipole length must be > 0, got {x12_nm} nm"
        )));
    }
    let peak = rabi_frequency(p.field_amplitude, x12_nm);
    let mut s = BlochState::ground();
    if p.width_ps == 0.0 {
        return Ok(s);
    }
    let rise = p.rise_time_ps;
    if rise > 0.0 {
        let dt = rise / RAMP_SLICES as f64;
        for k in 0..RAMP_SLICES {
            let frac = (k as f64 + 0.5) / RAMP_SLICES as f64;
            let drive = Drive {
                rabi_frequency: peak * frac,
                detuning,
            };
            s = propagate_constant(&s, &drive, r, dt)?;
        }
    }
    let flat = p.width_ps - 2.0 * rise;
    s = propagate_constant(
        &s,
        &Drive {
            rabi_frequency: peak,
            detuning,
        },
        r,
        flat,
    )?;
    if rise > 0.0 {
        let dt = rise / RAMP_SLICES as f64;
        for k in 0..RAMP_SLICES {
            let frac = 1.0 - (k as f64 + 0.5) / RAMP_SLICES as f64;
            let drive = Drive {
                rabi_frequency: peak * frac,
                detuning,
            };
            s = propagate_constant(&s, &drive, r, dt)?;
        }
    }
    Ok(s)
}

/// Final states for a sweep of rectangular pulse widths with a common drive.
///
/// Every rectangular pulse starts from the ground state under the same drive,
/// so the state at width t is the trajectory at time t; widths are visited in
/// increasing order along one trajectory. Output order matches `widths_ps`.
pub fn rectangular_sweep(
    widths_ps: &[f64],
    d: &Drive,
    r: &DampingRates,
) -> Result<Vec<BlochState>> {
    let mut order: Vec<usize> = (0..widths_ps.len()).collect();
    order.sort_by(|&a, &b| widths_ps[a].total_cmp(&widths_ps[b]));
    let mut out = vec![BlochState::ground(); widths_ps.len()];
    let mut s = BlochState::ground();
    let mut t = 0.0;
    for idx in order {
        let w = widths_ps[idx];
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "pulse width must be >= 0, got {w} ps"
            )));
        }
        s = propagate_constant(&s, d, r, w - t)?;
        t = w;
        out[idx] = s;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const OMEGA: f64 = 2.0 * PI / 15e-12;

    #[test]
    fn rabi_frequency_arithmetic() {
        assert_eq!(rabi_frequency(0.0, 7.44), 0.0);
        let w = rabi_frequency(1e4, 7.44);
        assert!((w - 1.13e11).abs() < 0.005e11, "{w}");
        let e = field_for_rabi_frequency(OMEGA, 7.44);
        assert!((e - 3.7e4).abs() < 0.05e4, "{e}");
        assert!((rabi_frequency(e, 7.44) - OMEGA).abs() < 1e-3);
    }

    #[test]
    fn rhs_reference_cases() {
        let rates = DampingRates::new(0.0, 1e11, 2e11).unwrap();
        let z = bloch_rhs(&BlochState::ground(), &Drive::resonant(0.0), &rates);
        assert_eq!(z.to_array(), [0.0; 5]);

        let omega = 3e11;
        let d = bloch_rhs(
            &BlochState::ground(),
            &Drive::resonant(omega),
            &DampingRates::undamped(),
        );
        assert_eq!(d.rho11, 0.0);
        assert_eq!(d.rho22, 0.0);
        assert!((d.sigma12.im - omega / 2.0).abs() < 1e-3);
        assert!(d.sigma12.re.abs() < 1e-3);

        let excited = BlochState {
            rho11: 0.0,
            rho22: 1.0,
            ..BlochState::ground()
        };
        let g3 = 1.22e11;
        let d = bloch_rhs(
            &excited,
            &Drive::resonant(0.0),
            &DampingRates::new(0.0, 0.0, g3).unwrap(),
        );
        assert!((d.rho22 + g3).abs() < 1.0);
        assert!((d.ionized - g3).abs() < 1.0);
    }

    #[test]
    fn trivial_propagation_is_identity() {
        let s = BlochState {
            rho11: 0.6,
            rho22: 0.3,
            sigma12: Complex64::new(0.1, -0.2),
            ionized: 0.1,
        };
        let out =
            propagate_constant(&s, &Drive::resonant(0.0), &DampingRates::undamped(), 37.0).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn pi_pulse_inverts() {
        let d = Drive::resonant(OMEGA);
        let t = PI / OMEGA * 1e12;
        let s =
            propagate_constant(&BlochState::ground(), &d, &DampingRates::undamped(), t).unwrap();
        assert!((s.rho22 - 1.0).abs() < 1e-6);
        assert!((photoconductivity(&s) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn two_pi_pulse_returns_to_ground() {
        let x12 = 7.44;
        let pulse = PulseSpec::rectangular(15.0, field_for_rabi_frequency(OMEGA, x12));
        let s = simulate_pulse(&pulse, x12, 0.0, &DampingRates::undamped()).unwrap();
        assert!((s.rho11 - 1.0).abs() < 1e-6, "{s:?}");
    }

    #[test]
    fn zero_width_pulse_leaves_ground_state() {
        let pulse = PulseSpec::rectangular(0.0, 5e4);
        let s = simulate_pulse(&pulse, 7.44, 0.0, &DampingRates::sigma_plus_fit()).unwrap();
        assert_eq!(s, BlochState::ground());
        assert_eq!(photoconductivity(&s), 0.0);
    }

    #[test]
    fn pulse_validation() {
        assert!(PulseSpec {
            width_ps: 10.0,
            field_amplitude: 1.0,
            rise_time_ps: 5.0
        }
        .validate()
        .is_err());
        assert!(PulseSpec {
            width_ps: -1.0,
            field_amplitude: 1.0,
            rise_time_ps: 0.0
        }
        .validate()
        .is_err());
        assert!(PulseSpec {
            width_ps: 10.0,
            field_amplitude: 1.0,
            rise_time_ps: 2.0
        }
        .validate()
        .is_ok());
        assert!(simulate_pulse(
            &PulseSpec::rectangular(1.0, 1.0),
            0.0,
            0.0,
            &DampingRates::undamped()
        )
        .is_err());
        assert!(DampingRates::new(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn soft_edges_reduce_pulse_area() {
        // A trapezoid of the same total width has less area than the rectangle,
        // so a nominal π pulse under-rotates.
        let x12 = 7.44;
        let e = field_for_rabi_frequency(OMEGA, x12);
        let width = PI / OMEGA * 1e12;
        let sharp = simulate_pulse(
            &PulseSpec::rectangular(width, e),
            x12,
            0.0,
            &DampingRates::undamped(),
        )
        .unwrap();
        let soft = simulate_pulse(
            &PulseSpec {
                width_ps: width,
                field_amplitude: e,
                rise_time_ps: 1.0,
            },
            x12,
            0.0,
            &DampingRates::undamped(),
        )
        .unwrap();
        assert!(soft.rho22 < sharp.rho22);
        // Area of the trapezoid is Ω(t_p − t_r); the undamped result is exact.
        let area = OMEGA * (width - 1.0) * 1e-12;
        assert!((soft.rho22 - (area / 2.0).sin().powi(2)).abs() < 1e-6);
    }

    #[test]
    fn sweep_matches_individual_pulses() {
        let x12 = 7.44;
        let e = field_for_rabi_frequency(OMEGA, x12);
        let rates = DampingRates::sigma_plus_fit();
        let widths = [12.0, 0.0, 3.5, 30.0, 7.25];
        let swept = rectangular_sweep(&widths, &Drive::resonant(OMEGA), &rates).unwrap();
        for (w, s) in widths.iter().zip(&swept) {
            let single = simulate_pulse(&PulseSpec::rectangular(*w, e), x12, 0.0, &rates).unwrap();
            assert!(s.max_abs_diff(&single) < 1e-8, "w={w}");
        }
    }

    #[test]
    fn extreme_rates_underflow() {
        let err = propagate_constant(
            &BlochState::ground(),
            &Drive::resonant(1e30),
            &DampingRates::undamped(),
            1e3,
        )
        .unwrap_err();
        assert!(matches!(err, Error::StepUnderflow { .. }));
    }

    #[test]
    fn observables() {
        let s = BlochState {
            rho11: 0.5,
            rho22: 0.2,
            sigma12: Complex64::new(0.0, 0.0),
            ionized: 0.3,
        };
        assert!((Observable::GroundDepletion.evaluate(&s) - 0.5).abs() < 1e-15);
        assert_eq!(Observable::IonizedOnly.evaluate(&s), 0.3);
    }
}
