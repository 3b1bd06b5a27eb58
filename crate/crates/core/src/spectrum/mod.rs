//! Hydrogenic donor levels in a static magnetic field.
//!
//! In effective atomic units (energies in Ry*, lengths in a*) the donor
//! Hamiltonian along the field is
//!
//! ```text
//! H = −∇² − 2/r + γ·m + γ²ρ²/4,     γ = ħω_c / (2 Ry*)
//! ```
//!
//! with the conduction-band bottom at zero field as the energy origin. Each
//! (|m|, z-parity) sector is solved by Rayleigh–Ritz in an even-tempered
//! Gaussian basis. The paramagnetic term γ·m commutes with everything else and
//! is added after diagonalisation, so the m = ±1 levels differ by exactly 2γ.

mod basis;
mod solver;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

pub use basis::{Sector, VariationalBasisSpec};
pub use solver::SectorProblem;

use crate::constants::{thz_to_mev, BOHR_RADIUS_NM, CYCLOTRON_MEV_PER_TESLA, RYDBERG_MEV};
use crate::{Error, Result};

/// Material constants of the host and the donor species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DonorParameters {
    /// m*/mₑ.
    pub effective_mass_ratio: f64,
    pub dielectric_constant: f64,
    /// Central-cell correction in meV; deepens the 1s level only.
    pub central_cell_correction: f64,
}

impl Default for DonorParameters {
    /// Sulfur donors in GaAs.
    fn default() -> Self {
        Self {
            effective_mass_ratio: 0.0665,
            dielectric_constant: 12.56,
            central_cell_correction: 0.110,
        }
    }
}

impl DonorParameters {
    pub fn new(
        effective_mass_ratio: f64,
        dielectric_constant: f64,
        central_cell_correction: f64,
    ) -> Result<Self> {
        let p = Self {
            effective_mass_ratio,
            dielectric_constant,
            central_cell_correction,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("effective_mass_ratio", self.effective_mass_ratio),
            ("dielectric_constant", self.dielectric_constant),
            ("central_cell_correction", self.central_cell_correction),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn effective_units(&self) -> EffectiveUnits {
        effective_units(self)
    }
}

/// Effective Rydberg, Bohr radius and field scale of the donor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveUnits {
    /// Ry* in meV.
    pub rydberg: f64,
    /// a* in nm.
    pub bohr_radius: f64,
    /// γ per tesla.
    pub gamma_per_tesla: f64,
}

impl EffectiveUnits {
    /// ħω_c in meV at field `b` tesla.
    pub fn cyclotron_energy(&self, b: f64) -> f64 {
        2.0 * self.rydberg * self.gamma_per_tesla * b
    }
}

pub fn effective_units(p: &DonorParameters) -> EffectiveUnits {
    let m = p.effective_mass_ratio;
    let eps = p.dielectric_constant;
    let rydberg = RYDBERG_MEV * m / (eps * eps);
    EffectiveUnits {
        rydberg,
        bohr_radius: BOHR_RADIUS_NM * eps / m,
        gamma_per_tesla: CYCLOTRON_MEV_PER_TESLA / m / (2.0 * rydberg),
    }
}

/// Dimensionless field γ = ħω_c / (2 Ry*) at `b` tesla.
pub fn dimensionless_gamma(b: f64, u: &EffectiveUnits) -> Result<f64> {
    check_field(b)?;
    Ok(u.gamma_per_tesla * b)
}

fn check_field(b: f64) -> Result<()> {
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "magnetic field must be non-negative, got {b} T"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ZParity {
    Even,
    Odd,
}

/// The four hydrogenic states tracked by the level diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HydrogenicState {
    S1,
    P2Minus,
    P2Zero,
    P2Plus,
}

impl HydrogenicState {
    pub const ALL: [HydrogenicState; 4] = [
        HydrogenicState::S1,
        HydrogenicState::P2Minus,
        HydrogenicState::P2Zero,
        HydrogenicState::P2Plus,
    ];

    pub fn magnetic_quantum_number(self) -> i32 {
        match self {
            HydrogenicState::S1 | HydrogenicState::P2Zero => 0,
            HydrogenicState::P2Minus => -1,
            HydrogenicState::P2Plus => 1,
        }
    }

    pub fn z_parity(self) -> ZParity {
        match self {
            HydrogenicState::P2Zero => ZParity::Odd,
            _ => ZParity::Even,
        }
    }

    pub fn sector(self) -> Sector {
        Sector {
            abs_m: self.magnetic_quantum_number().unsigned_abs() as usize,
            z_power: match self.z_parity() {
                ZParity::Even => 0,
                ZParity::Odd => 1,
            },
        }
    }

    /// Bottom of the free-electron continuum with the same m, in Ry*:
    /// γ(1 + |m| + m).
    pub fn continuum_edge(self, gamma: f64) -> f64 {
        let m = self.magnetic_quantum_number();
        gamma * (1 + m.abs() + m) as f64
    }

    pub fn label(self) -> &'static str {
        match self {
            HydrogenicState::S1 => "1s",
            HydrogenicState::P2Minus => "2p-",
            HydrogenicState::P2Zero => "2p0",
            HydrogenicState::P2Plus => "2p+",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1s" => Ok(HydrogenicState::S1),
            "2p-" | "2pminus" | "2p_minus" => Ok(HydrogenicState::P2Minus),
            "2p0" | "2pzero" | "2p_zero" => Ok(HydrogenicState::P2Zero),
            "2p+" | "2pplus" | "2p_plus" => Ok(HydrogenicState::P2Plus),
            other => Err(Error::InvalidParameter(format!("unknown state '{other}'"))),
        }
    }
}

impl std::fmt::Display for HydrogenicState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Variational level at one field value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSolution {
    pub state: HydrogenicState,
    pub gamma: f64,
    /// Energy in Ry*, zero at the zero-field conduction-band bottom.
    pub energy: f64,
    /// Expansion coefficients over `basis.exponent_pairs()`, normalised so the
    /// state has unit norm.
    pub coefficients: Vec<f64>,
    pub basis: VariationalBasisSpec,
}

/// Landau level of the free conduction electron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandauLevel {
    pub index: u32,
    /// meV.
    pub energy: f64,
}

/// Rayleigh–Ritz ground level of `state`'s sector at field `gamma`.
pub fn solve_level(
    state: HydrogenicState,
    gamma: f64,
    basis: &VariationalBasisSpec,
) -> Result<LevelSolution> {
    SectorProblem::new(state.sector(), basis)?.level(state, gamma)
}

/// Memoises the γ-independent sector matrices of one basis so that field
/// sweeps only redo the diamagnetic term and the diagonalisation.
#[derive(Debug)]
pub struct LevelSolver {
    basis: VariationalBasisSpec,
    sectors: Mutex<HashMap<Sector, Arc<SectorProblem>>>,
}

impl LevelSolver {
    pub fn new(basis: VariationalBasisSpec) -> Result<Self> {
        basis.validate()?;
        Ok(Self {
            basis,
            sectors: Mutex::new(HashMap::new()),
        })
    }

    pub fn basis(&self) -> &VariationalBasisSpec {
        &self.basis
    }

    fn sector(&self, s: Sector) -> Result<Arc<SectorProblem>> {
        if let Some(p) = self.sectors.lock().expect("sector cache poisoned").get(&s) {
            return Ok(p.clone());
        }
        let built = Arc::new(SectorProblem::new(s, &self.basis)?);
        self.sectors
            .lock()
            .expect("sector cache poisoned")
            .insert(s, built.clone());
        Ok(built)
    }

    pub fn level(&self, state: HydrogenicState, gamma: f64) -> Result<LevelSolution> {
        self.sector(state.sector())?.level(state, gamma)
    }

    pub fn energy(&self, state: HydrogenicState, gamma: f64) -> Result<f64> {
        Ok(self.level(state, gamma)?.energy)
    }

    /// Level energy in meV at `b` tesla, including the central-cell shift of 1s.
    pub fn level_energy_mev(
        &self,
        state: HydrogenicState,
        b: f64,
        p: &DonorParameters,
    ) -> Result<f64> {
        let u = p.effective_units();
        let gamma = dimensionless_gamma(b, &u)?;
        let e = self.energy(state, gamma)? * u.rydberg;
        Ok(match state {
            HydrogenicState::S1 => e - p.central_cell_correction,
            _ => e,
        })
    }

    /// 1s → `to` transition energy in meV.
    pub fn transition_energy(
        &self,
        from: HydrogenicState,
        to: HydrogenicState,
        b: f64,
        p: &DonorParameters,
    ) -> Result<f64> {
        check_transition(from, to)?;
        Ok(self.level_energy_mev(to, b, p)? - self.level_energy_mev(from, b, p)?)
    }

    /// Field in tesla at which the 1s → `to` transition matches `frequency_thz`.
    pub fn resonance_field(
        &self,
        frequency_thz: f64,
        to: HydrogenicState,
        p: &DonorParameters,
        range: (f64, f64),
    ) -> Result<f64> {
        let (lo, hi) = range;
        check_field(lo)?;
        check_field(hi)?;
        if hi <= lo {
            return Err(Error::InvalidParameter(format!(
                "search range [{lo}, {hi}] T is empty"
            )));
        }
        let target = thz_to_mev(frequency_thz);
        let f = |b: f64| -> Result<f64> {
            Ok(self.transition_energy(HydrogenicState::S1, to, b, p)? - target)
        };
        bisect(f, lo, hi, RESONANCE_TOLERANCE_TESLA).map_err(|e| match e {
            Error::NoResonance { .. } => Error::NoResonance {
                target_mev: target,
                lo,
                hi,
            },
            other => other,
        })
    }

    /// |⟨2p±|(x ± iy)/√2|1s⟩| in nm.
    pub fn dipole_matrix_element(
        &self,
        to: HydrogenicState,
        b: f64,
        p: &DonorParameters,
    ) -> Result<f64> {
        if !matches!(to, HydrogenicState::P2Plus | HydrogenicState::P2Minus) {
            return Err(Error::UnsupportedTransition(format!(
                "dipole element only for 1s -> 2p+/2p-, got 1s -> {to}"
            )));
        }
        let u = p.effective_units();
        let gamma = dimensionless_gamma(b, &u)?;
        let ground = self.level(HydrogenicState::S1, gamma)?;
        let excited = self.level(to, gamma)?;
        Ok(solver::circular_dipole(&excited, &ground) * u.bohr_radius)
    }
}

/// Bisection tolerance of [`LevelSolver::resonance_field`].
pub const RESONANCE_TOLERANCE_TESLA: f64 = 1e-4;

fn check_transition(from: HydrogenicState, to: HydrogenicState) -> Result<()> {
    if from != HydrogenicState::S1 || to == HydrogenicState::S1 {
        return Err(Error::UnsupportedTransition(format!("{from} -> {to}")));
    }
    Ok(())
}

/// Bracketed bisection; the bracket must show a sign change.
pub(crate) fn bisect<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoResonance {
            target_mev: f64::NAN,
            lo,
            hi,
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Energy in meV of the 1s → `to` transition at `b` tesla.
pub fn transition_energy(
    from: HydrogenicState,
    to: HydrogenicState,
    b: f64,
    p: &DonorParameters,
    basis: &VariationalBasisSpec,
) -> Result<f64> {
    LevelSolver::new(*basis)?.transition_energy(from, to, b, p)
}

pub fn resonance_field(
    frequency_thz: f64,
    to: HydrogenicState,
    p: &DonorParameters,
    basis: &VariationalBasisSpec,
    range: (f64, f64),
) -> Result<f64> {
    LevelSolver::new(*basis)?.resonance_field(frequency_thz, to, p, range)
}

pub fn dipole_matrix_element(
    to: HydrogenicState,
    b: f64,
    p: &DonorParameters,
    basis: &VariationalBasisSpec,
) -> Result<f64> {
    LevelSolver::new(*basis)?.dipole_matrix_element(to, b, p)
}

/// (n + ½)ħω_c in meV.
pub fn landau_energy(n: u32, b: f64, u: &EffectiveUnits) -> Result<LandauLevel> {
    check_field(b)?;
    Ok(LandauLevel {
        index: n,
        energy: (n as f64 + 0.5) * u.cyclotron_energy(b),
    })
}

/// One row of the level diagram, all energies in meV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagramRow {
    #[serde(rename = "B_tesla")]
    pub b_tesla: f64,
    #[serde(rename = "E_1s_meV")]
    pub e_1s: f64,
    #[serde(rename = "E_2pminus_meV")]
    pub e_2p_minus: f64,
    #[serde(rename = "E_2pzero_meV")]
    pub e_2p_zero: f64,
    #[serde(rename = "E_2pplus_meV")]
    pub e_2p_plus: f64,
    #[serde(rename = "LL0_meV")]
    pub ll0: f64,
    #[serde(rename = "LL1_meV")]
    pub ll1: f64,
}

impl LevelSolver {
    pub fn diagram_row(&self, b: f64, p: &DonorParameters) -> Result<LevelDiagramRow> {
        let u = p.effective_units();
        Ok(LevelDiagramRow {
            b_tesla: b,
            e_1s: self.level_energy_mev(HydrogenicState::S1, b, p)?,
            e_2p_minus: self.level_energy_mev(HydrogenicState::P2Minus, b, p)?,
            e_2p_zero: self.level_energy_mev(HydrogenicState::P2Zero, b, p)?,
            e_2p_plus: self.level_energy_mev(HydrogenicState::P2Plus, b, p)?,
            ll0: landau_energy(0, b, &u)?.energy,
            ll1: landau_energy(1, b, &u)?.energy,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::mev_to_thz;

    #[test]
    fn effective_units_defaults() {
        let u = effective_units(&DonorParameters::default());
        assert!((u.rydberg - 13605.7 * 0.0665 / (12.56 * 12.56)).abs() < 1e-12);
        assert!((u.rydberg - 5.735).abs() < 1e-3);
        assert!((u.bohr_radius - 9.99).abs() < 5e-3);
        let bare = effective_units(&DonorParameters::new(1.0, 1.0, 0.110).unwrap());
        assert_eq!(bare.rydberg, 13605.7);
    }

    #[test]
    fn gamma_of_field() {
        let u = DonorParameters::default().effective_units();
        assert_eq!(dimensionless_gamma(0.0, &u).unwrap(), 0.0);
        // ħω_c = 0.115767·3.63/0.0665 = 6.319 meV; γ = 6.319/(2·5.7355).
        let g = dimensionless_gamma(3.63, &u).unwrap();
        assert!((g - 0.551).abs() < 1e-3, "{g}");
        assert!((dimensionless_gamma(1.38, &u).unwrap() - 0.209).abs() < 1e-3);
        assert!(dimensionless_gamma(-0.1, &u).is_err());
    }

    #[test]
    fn donor_parameters_validation() {
        assert!(DonorParameters::new(0.0, 12.56, 0.11).is_err());
        assert!(DonorParameters::new(0.0665, -1.0, 0.11).is_err());
        assert!(DonorParameters::new(0.0665, 12.56, 0.0).is_err());
        assert!(DonorParameters::default().validate().is_ok());
    }

    #[test]
    fn state_quantum_numbers() {
        use HydrogenicState::*;
        assert_eq!(P2Plus.magnetic_quantum_number(), 1);
        assert_eq!(P2Minus.magnetic_quantum_number(), -1);
        assert_eq!(P2Zero.z_parity(), ZParity::Odd);
        for s in [S1, P2Minus, P2Plus] {
            assert_eq!(s.z_parity(), ZParity::Even);
        }
        for s in HydrogenicState::ALL {
            assert_eq!(HydrogenicState::parse(s.label()).unwrap(), s);
        }
    }

    #[test]
    fn landau_levels() {
        let u = DonorParameters::default().effective_units();
        assert_eq!(landau_energy(0, 0.0, &u).unwrap().energy, 0.0);
        // ħω_c(3.63 T) = 6.3193 meV.
        assert!((landau_energy(0, 3.63, &u).unwrap().energy - 3.16).abs() < 5e-3);
        assert!((landau_energy(1, 3.63, &u).unwrap().energy - 9.48).abs() < 5e-3);
        assert!(landau_energy(0, -1.0, &u).is_err());
    }

    #[test]
    fn zero_field_levels_are_hydrogenic() {
        let basis = VariationalBasisSpec::default();
        let e1 = solve_level(HydrogenicState::S1, 0.0, &basis)
            .unwrap()
            .energy;
        assert!((e1 + 1.0).abs() < 1e-3, "{e1}");
        for s in [
            HydrogenicState::P2Plus,
            HydrogenicState::P2Minus,
            HydrogenicState::P2Zero,
        ] {
            let e = solve_level(s, 0.0, &basis).unwrap().energy;
            assert!((e + 0.25).abs() < 1e-3, "{s}: {e}");
        }
    }

    #[test]
    fn zero_field_transition_energy() {
        let p = DonorParameters::default();
        let u = p.effective_units();
        let e = transition_energy(
            HydrogenicState::S1,
            HydrogenicState::P2Plus,
            0.0,
            &p,
            &VariationalBasisSpec::default(),
        )
        .unwrap();
        let expected = 0.75 * u.rydberg + 0.110;
        assert!((e - expected).abs() < 1e-3 * u.rydberg);
        assert!((mev_to_thz(e) - 1.067).abs() < 0.005 * 1.067);
    }

    #[test]
    fn rejected_transitions() {
        let solver = LevelSolver::new(VariationalBasisSpec::default()).unwrap();
        let p = DonorParameters::default();
        use HydrogenicState::*;
        assert!(solver.transition_energy(P2Plus, S1, 1.0, &p).is_err());
        assert!(solver.transition_energy(S1, S1, 1.0, &p).is_err());
        assert!(matches!(
            solver.dipole_matrix_element(P2Zero, 1.0, &p),
            Err(Error::UnsupportedTransition(_))
        ));
    }

    #[test]
    fn bisect_finds_root_and_rejects_missing_bracket() {
        let r = bisect(|x| Ok(x * x - 2.0), 0.0, 2.0, 1e-10).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-9);
        assert!(matches!(
            bisect(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-6),
            Err(Error::NoResonance { .. })
        ));
    }

    #[test]
    fn no_resonance_outside_range() {
        let solver = LevelSolver::new(VariationalBasisSpec::default()).unwrap();
        let p = DonorParameters::default();
        let err = solver
            .resonance_field(2.53, HydrogenicState::P2Plus, &p, (0.0, 1.0))
            .unwrap_err();
        assert!(matches!(err, Error::NoResonance { .. }));
    }
}
