use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use donorlab::{DonorParameters, Observable, ParameterSpace, VariationalBasisSpec};
use serde::{Deserialize, Serialize};

use crate::Failure;

/// Everything a run depends on. Loaded from TOML, then overridden by flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Not echoed: the same run written to two places must produce the same
    /// files.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub donor: DonorParameters,
    pub basis: VariationalBasisSpec,
    pub spectrum: SpectrumConfig,
    pub resonance: ResonanceConfig,
    pub stage: StageConfig,
    pub rabi: RabiConfig,
    pub rates: RatesConfig,
    pub fit: FitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub b_min: f64,
    pub b_max: f64,
    pub steps: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            b_min: 0.0,
            b_max: 4.0,
            steps: 81,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResonanceConfig {
    pub frequency_thz: f64,
    pub transition: String,
    pub b_lo: f64,
    pub b_hi: f64,
}

impl Default for ResonanceConfig {
    fn default() -> Self {
        Self {
            frequency_thz: 2.53,
            transition: "2p+".into(),
            b_lo: 2.0,
            b_hi: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageConfig {
    pub frequency_thz: f64,
    /// Overrides the free-space wavelength derived from `frequency_thz`.
    pub wavelength_mm: Option<f64>,
    pub phase_offset_rad: f64,
    pub transition: String,
    pub spacing_min_mm: f64,
    pub spacing_max_mm: f64,
    pub steps: usize,
    pub retardance_rad: f64,
    pub diattenuation: f64,
    pub distortion_axis_rad: f64,
    pub intensity: f64,
    pub offset: f64,
    /// Standard deviation of additive Gaussian noise, photocurrent units.
    pub noise: f64,
}

impl Default for StageConfig {
    fn default() -> Self {
        Self {
            frequency_thz: 2.54,
            wavelength_mm: None,
            phase_offset_rad: 0.0,
            transition: "2p+".into(),
            spacing_min_mm: 0.0,
            spacing_max_mm: 0.24,
            steps: 97,
            retardance_rad: 0.0,
            diattenuation: 0.0,
            distortion_axis_rad: 0.0,
            intensity: 1.0,
            offset: 0.0,
            noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RabiConfig {
    pub frequency_thz: f64,
    pub field_tesla: f64,
    pub transition: String,
    pub field_sign: String,
    /// Labels (sigma+, sigma-, pi_x, pi_y) or `jones:ex_re,ex_im,ey_re,ey_im`.
    pub polarizations: Vec<String>,
    /// σ⁺ Rabi period used to set the peak field when `peak_field` is unset.
    pub rabi_period_ps: f64,
    /// Peak THz field, V/m.
    pub peak_field: Option<f64>,
    /// Dipole length; computed from the level solver when unset.
    pub x12_nm: Option<f64>,
    pub width_min_ps: f64,
    pub width_max_ps: f64,
    pub steps: usize,
    pub rise_time_ps: f64,
    /// ω − ω₀, rad/s.
    pub detuning: f64,
    pub observable: Observable,
    pub retardance_rad: f64,
    pub diattenuation: f64,
    pub distortion_axis_rad: f64,
    pub noise: f64,
}

impl Default for RabiConfig {
    fn default() -> Self {
        Self {
            frequency_thz: 2.54,
            field_tesla: 3.62,
            transition: "2p+".into(),
            field_sign: "+z".into(),
            polarizations: ["sigma+", "pi_x", "pi_y", "sigma-"]
                .map(String::from)
                .to_vec(),
            rabi_period_ps: 15.0,
            peak_field: None,
            x12_nm: None,
            width_min_ps: 0.0,
            width_max_ps: 40.0,
            steps: 81,
            rise_time_ps: 0.0,
            detuning: 0.0,
            observable: Observable::default(),
            retardance_rad: 0.0,
            diattenuation: 0.0,
            distortion_axis_rad: 0.0,
            noise: 0.0,
        }
    }
}

/// Damping rates in 1/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesConfig {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
}

impl Default for RatesConfig {
    fn default() -> Self {
        Self {
            gamma1: 0.0,
            gamma2: 1.98e11,
            gamma3: 1.22e11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub free: Vec<String>,
    /// Values for parameters held fixed; unlisted fixed parameters keep their
    /// guess (Γ₁ = 0 and zero detuning unless given).
    pub fixed: BTreeMap<String, f64>,
    /// Starting values; missing ones are read off the trace.
    pub guess: BTreeMap<String, f64>,
    pub space: ParameterSpace,
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub observable: Observable,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            free: ["omega_r", "gamma2", "gamma3", "scale", "offset"]
                .map(String::from)
                .to_vec(),
            fixed: BTreeMap::new(),
            guess: BTreeMap::new(),
            space: ParameterSpace::Log,
            restarts: 3,
            max_iterations: 100_000,
            tolerance: 1e-8,
            observable: Observable::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| Failure::input(format!("invalid config {}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String, Failure> {
        toml::to_string(self).map_err(|e| Failure::input(format!("cannot serialise config: {e}")))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}
