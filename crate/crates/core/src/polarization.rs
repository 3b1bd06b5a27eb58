//! Polarization of the THz beam.
//!
//! Conventions (used everywhere in the crate): the beam propagates along +z,
//! the helicity basis is ê± = (x̂ ± iŷ)/√2, and S₃ = 2 Im(E_x* E_y), so pure ê₊
//! light has S₃/S₀ = +1 and is called σ⁺. With the static field along +z, σ⁺
//! drives 1s → 2p⁺ and σ⁻ drives 1s → 2p⁻; reversing the field swaps the roles.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JonesVector {
    pub ex: Complex64,
    pub ey: Complex64,
}

impl JonesVector {
    pub fn new(ex: Complex64, ey: Complex64) -> Self {
        Self { ex, ey }
    }

    pub fn linear(angle: f64) -> Self {
        Self::new(Complex64::from(angle.cos()), Complex64::from(angle.sin()))
    }

    pub fn sigma_plus() -> Self {
        Self::new(Complex64::from(FRAC_1_SQRT_2), I * FRAC_1_SQRT_2)
    }

    pub fn sigma_minus() -> Self {
        Self::new(Complex64::from(FRAC_1_SQRT_2), -I * FRAC_1_SQRT_2)
    }

    pub fn intensity(&self) -> f64 {
        self.ex.norm_sqr() + self.ey.norm_sqr()
    }

    fn check_nonzero(&self) -> Result<()> {
        let s0 = self.intensity();
        if s0 > 0.0 && s0.is_finite() {
            Ok(())
        } else {
            Err(Error::ZeroJonesVector)
        }
    }

    /// Components in a frame rotated by `angle` about z.
    pub fn in_frame(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.ex + s * self.ey, -s * self.ex + c * self.ey)
    }

    /// Equality up to a global phase, relative to the larger intensity.
    pub fn same_state(&self, other: &Self, tol: f64) -> bool {
        let overlap = self.ex.conj() * other.ex + self.ey.conj() * other.ey;
        let norms = self.intensity() * other.intensity();
        norms > 0.0 && (norms - overlap.norm_sqr()).abs() <= tol * norms
    }

    pub fn stokes(&self) -> Result<StokesVector> {
        stokes_from_jones(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesVector {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesVector {
    /// s0² − (s1² + s2² + s3²); zero for fully polarized light.
    pub fn polarization_defect(&self) -> f64 {
        self.s0 * self.s0 - (self.s1 * self.s1 + self.s2 * self.s2 + self.s3 * self.s3)
    }
}

pub fn stokes_from_jones(j: &JonesVector) -> Result<StokesVector> {
    j.check_nonzero()?;
    let cross = j.ex.conj() * j.ey;
    Ok(StokesVector {
        s0: j.ex.norm_sqr() + j.ey.norm_sqr(),
        s1: j.ex.norm_sqr() - j.ey.norm_sqr(),
        s2: 2.0 * cross.re,
        s3: 2.0 * cross.im,
    })
}

pub fn s3_ratio(j: &JonesVector) -> Result<f64> {
    let s = stokes_from_jones(j)?;
    Ok(s.s3 / s.s0)
}

/// Wire-grid polarizer followed by a mirror: the component along the grid
/// reflects off the grid, the orthogonal one off the mirror, picking up the
/// round-trip delay 2d.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MirrorPolarizerStage {
    pub spacing_mm: f64,
    pub wavelength_mm: f64,
    /// Calibration offset δ₀ in radians.
    pub phase_offset: f64,
    /// Grid orientation relative to the incident (x̂) polarization.
    pub grid_angle: f64,
}

impl MirrorPolarizerStage {
    pub fn new(spacing_mm: f64, wavelength_mm: f64, phase_offset: f64) -> Result<Self> {
        let stage = Self {
            spacing_mm,
            wavelength_mm,
            phase_offset,
            grid_angle: FRAC_PI_4,
        };
        stage.validate()?;
        Ok(stage)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength_mm > 0.0 && self.wavelength_mm.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "wavelength must be positive, got {} mm",
                self.wavelength_mm
            )));
        }
        if !(self.spacing_mm >= 0.0 && self.spacing_mm.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "spacing must be non-negative, got {} mm",
                self.spacing_mm
            )));
        }
        Ok(())
    }

    pub fn with_spacing(&self, spacing_mm: f64) -> Self {
        Self {
            spacing_mm,
            ..*self
        }
    }

    /// Spacing change per full period of the output polarization, λ/2.
    pub fn period_mm(&self) -> f64 {
        0.5 * self.wavelength_mm
    }
}

/// Free-space wavelength in mm of radiation at `frequency_thz`.
pub fn wavelength_mm(frequency_thz: f64) -> f64 {
    299_792_458.0e3 / (frequency_thz * 1e12)
}

/// δ = 2π·(2d)/λ + δ₀.
pub fn stage_phase(stage: &MirrorPolarizerStage) -> f64 {
    2.0 * PI * 2.0 * stage.spacing_mm / stage.wavelength_mm + stage.phase_offset
}

/// Output of the stage for x̂-polarized input: (û + e^{iδ} v̂)/√2 in the grid
/// frame, returned in the lab frame.
pub fn stage_output(stage: &MirrorPolarizerStage) -> JonesVector {
    jones_for_delay(stage_phase(stage), stage.grid_angle)
}

pub(crate) fn jones_for_delay(delta: f64, grid_angle: f64) -> JonesVector {
    let grid = JonesVector::new(
        Complex64::from(FRAC_1_SQRT_2),
        Complex64::from_polar(FRAC_1_SQRT_2, delta),
    );
    grid.in_frame(-grid_angle)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldDirection {
    #[serde(rename = "+z")]
    PlusZ,
    #[serde(rename = "-z")]
    MinusZ,
}

impl FieldDirection {
    pub fn sign(self) -> f64 {
        match self {
            FieldDirection::PlusZ => 1.0,
            FieldDirection::MinusZ => -1.0,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            FieldDirection::PlusZ => FieldDirection::MinusZ,
            FieldDirection::MinusZ => FieldDirection::PlusZ,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FieldDirection::PlusZ => "+z",
            FieldDirection::MinusZ => "-z",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "+z" | "+" | "plus" | "+1" => Ok(FieldDirection::PlusZ),
            "-z" | "-" | "minus" | "-1" => Ok(FieldDirection::MinusZ),
            other => Err(Error::InvalidParameter(format!(
                "unknown field sign '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularDecomposition {
    pub a_plus: Complex64,
    pub a_minus: Complex64,
    pub f_plus: f64,
    pub f_minus: f64,
}

pub fn circular_decomposition(j: &JonesVector) -> Result<CircularDecomposition> {
    j.check_nonzero()?;
    // ⟨ê±, j⟩ with ê± = (x̂ ± iŷ)/√2.
    let a_plus = (j.ex - I * j.ey) * FRAC_1_SQRT_2;
    let a_minus = (j.ex + I * j.ey) * FRAC_1_SQRT_2;
    let total = a_plus.norm_sqr() + a_minus.norm_sqr();
    let f_plus = a_plus.norm_sqr() / total;
    Ok(CircularDecomposition {
        a_plus,
        a_minus,
        f_plus,
        f_minus: 1.0 - f_plus,
    })
}

/// Circularly polarized donor transitions out of 1s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CircularTransition {
    #[serde(rename = "1s-2p+")]
    ToP2Plus,
    #[serde(rename = "1s-2p-")]
    ToP2Minus,
}

impl CircularTransition {
    pub fn target(self) -> crate::spectrum::HydrogenicState {
        match self {
            CircularTransition::ToP2Plus => crate::spectrum::HydrogenicState::P2Plus,
            CircularTransition::ToP2Minus => crate::spectrum::HydrogenicState::P2Minus,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CircularTransition::ToP2Plus => "1s-2p+",
            CircularTransition::ToP2Minus => "1s-2p-",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "2p+" | "1s-2p+" | "2pplus" | "plus" => Ok(CircularTransition::ToP2Plus),
            "2p-" | "1s-2p-" | "2pminus" | "minus" => Ok(CircularTransition::ToP2Minus),
            other => Err(Error::InvalidParameter(format!(
                "unknown circular transition '{other}' (expected 2p+ or 2p-)"
            ))),
        }
    }

    /// Helicity (+1 for σ⁺, −1 for σ⁻) that drives this transition.
    pub fn driving_helicity(self, field: FieldDirection) -> i8 {
        let base = match self {
            CircularTransition::ToP2Plus => 1,
            CircularTransition::ToP2Minus => -1,
        };
        match field {
            FieldDirection::PlusZ => base,
            FieldDirection::MinusZ => -base,
        }
    }
}

/// Power fraction of `j` that couples into `transition` for the given field
/// orientation.
pub fn coupled_fraction(
    j: &JonesVector,
    transition: CircularTransition,
    field: FieldDirection,
) -> Result<f64> {
    let d = circular_decomposition(j)?;
    Ok(match transition.driving_helicity(field) {
        1 => d.f_plus,
        _ => d.f_minus,
    })
}

/// Absolute power |a±|² in the helicity that couples into `transition`.
/// Equals `intensity × coupled_fraction` and is what a lossy optic changes.
pub fn coupled_power(
    j: &JonesVector,
    transition: CircularTransition,
    field: FieldDirection,
) -> Result<f64> {
    let d = circular_decomposition(j)?;
    Ok(match transition.driving_helicity(field) {
        1 => d.a_plus.norm_sqr(),
        _ => d.a_minus.norm_sqr(),
    })
}

/// Lumped optical distortion: a linear retarder/diattenuator with unit
/// determinant whose fast axis sits at `axis` radians from x̂.
///
/// In its own frame the element is diag(t e^{iε/2}, t⁻¹ e^{−iε/2}) with
/// t⁴ = (1 + D)/(1 − D), so its diattenuation (T_max − T_min)/(T_max + T_min)
/// is D.
pub fn apply_distortion(
    j: &JonesVector,
    retardance: f64,
    diattenuation: f64,
    axis: f64,
) -> Result<JonesVector> {
    if !(0.0..1.0).contains(&diattenuation) {
        return Err(Error::InvalidParameter(format!(
            "diattenuation must lie in [0, 1), got {diattenuation}"
        )));
    }
    let t = ((1.0 + diattenuation) / (1.0 - diattenuation)).powf(0.25);
    let local = j.in_frame(axis);
    let out = JonesVector::new(
        local.ex * Complex64::from_polar(t, 0.5 * retardance),
        local.ey * Complex64::from_polar(1.0 / t, -0.5 * retardance),
    );
    Ok(out.in_frame(-axis))
}

/// Polarization states named in the Rabi experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolarizationLabel {
    #[serde(rename = "sigma+")]
    SigmaPlus,
    #[serde(rename = "sigma-")]
    SigmaMinus,
    #[serde(rename = "pi_x")]
    PiX,
    #[serde(rename = "pi_y")]
    PiY,
}

impl PolarizationLabel {
    pub const ALL: [PolarizationLabel; 4] = [
        PolarizationLabel::SigmaPlus,
        PolarizationLabel::PiX,
        PolarizationLabel::PiY,
        PolarizationLabel::SigmaMinus,
    ];

    pub fn jones(self) -> JonesVector {
        match self {
            PolarizationLabel::SigmaPlus => JonesVector::sigma_plus(),
            PolarizationLabel::SigmaMinus => JonesVector::sigma_minus(),
            PolarizationLabel::PiX => JonesVector::linear(0.0),
            PolarizationLabel::PiY => JonesVector::linear(0.5 * PI),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PolarizationLabel::SigmaPlus => "sigma+",
            PolarizationLabel::SigmaMinus => "sigma-",
            PolarizationLabel::PiX => "pi_x",
            PolarizationLabel::PiY => "pi_y",
        }
    }

    /// File-name friendly form.
    pub fn slug(self) -> &'static str {
        match self {
            PolarizationLabel::SigmaPlus => "sigma_plus",
            PolarizationLabel::SigmaMinus => "sigma_minus",
            PolarizationLabel::PiX => "pi_x",
            PolarizationLabel::PiY => "pi_y",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sigma+" | "sigma_plus" | "s+" => Ok(PolarizationLabel::SigmaPlus),
            "sigma-" | "sigma_minus" | "s-" => Ok(PolarizationLabel::SigmaMinus),
            "pi_x" | "pix" | "x" => Ok(PolarizationLabel::PiX),
            "pi_y" | "piy" | "y" => Ok(PolarizationLabel::PiY),
            other => Err(Error::InvalidParameter(format!(
                "unknown polarization '{other}' (expected sigma+, sigma-, pi_x, pi_y)"
            ))),
        }
    }
}

impl std::fmt::Display for PolarizationLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One row of a polarization-state scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationStateRow {
    pub spacing_mm: f64,
    pub delta_rad: f64,
    pub s3_over_s0: f64,
    pub f_plus: f64,
    pub f_minus: f64,
}

pub fn polarization_state_row(stage: &MirrorPolarizerStage) -> PolarizationStateRow {
    let j = stage_output(stage);
    let d = circular_decomposition(&j).expect("stage output is never zero");
    PolarizationStateRow {
        spacing_mm: stage.spacing_mm,
        delta_rad: stage_phase(stage),
        s3_over_s0: s3_ratio(&j).expect("stage output is never zero"),
        f_plus: d.f_plus,
        f_minus: d.f_minus,
    }
}
