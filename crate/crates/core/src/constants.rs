//! Physical constants in the unit system used throughout the crate
//! (meV, nm, tesla, THz, SI for the Rabi frequency).

/// Hydrogen Rydberg energy, meV.
pub const RYDBERG_MEV: f64 = 13_605.7;

/// Hydrogen Bohr radius, nm.
pub const BOHR_RADIUS_NM: f64 = 0.052_917_7;

/// Free-electron cyclotron energy per tesla, ħe/mₑ in meV/T.
pub const CYCLOTRON_MEV_PER_TESLA: f64 = 0.115_767;

/// Planck constant as photon energy per frequency, meV/THz.
pub const MEV_PER_THZ: f64 = 4.135_667_696;

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

pub fn thz_to_mev(f_thz: f64) -> f64 {
    f_thz * MEV_PER_THZ
}

pub fn mev_to_thz(e_mev: f64) -> f64 {
    e_mev / MEV_PER_THZ
}
