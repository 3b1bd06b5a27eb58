//! Even-tempered cylindrical Gaussian basis and its one-electron integrals.
//!
//! A basis function for the sector with |m| = `M` and z-parity `p` is
//!
//! ```text
//! χ(ρ, φ, z) = ρ^M z^p e^{imφ} exp(−α ρ² − β z²)
//! ```
//!
//! so every matrix element between two functions of one sector depends only on
//! the summed exponents `A = αᵢ + αⱼ`, `B = βᵢ + βⱼ`. Lengths are in effective
//! Bohr radii and energies in effective Rydbergs.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

/// Shape of the even-tempered product basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariationalBasisSpec {
    pub n_rho: usize,
    pub n_z: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    /// Gauss–Legendre points per panel of the Coulomb quadrature.
    pub quadrature_points: usize,
}

impl Default for VariationalBasisSpec {
    fn default() -> Self {
        Self {
            n_rho: 12,
            n_z: 12,
            alpha_min: 0.02,
            alpha_max: 30.0,
            beta_min: 0.02,
            beta_max: 30.0,
            quadrature_points: 16,
        }
    }
}

impl VariationalBasisSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(format!("basis: {msg}")));
        if self.n_rho < 2 || self.n_z < 2 {
            return bad("n_rho and n_z must be at least 2");
        }
        if self.quadrature_points < 2 {
            return bad("quadrature_points must be at least 2");
        }
        for (lo, hi, name) in [
            (self.alpha_min, self.alpha_max, "alpha"),
            (self.beta_min, self.beta_max, "beta"),
        ] {
            if !(lo > 0.0 && lo.is_finite() && hi.is_finite()) {
                return bad(&format!("{name} exponents must be positive and finite"));
            }
            if hi <= lo {
                return bad(&format!("{name}_max must exceed {name}_min"));
            }
        }
        Ok(())
    }

    pub fn alphas(&self) -> Vec<f64> {
        geometric(self.alpha_min, self.alpha_max, self.n_rho)
    }

    pub fn betas(&self) -> Vec<f64> {
        geometric(self.beta_min, self.beta_max, self.n_z)
    }

    /// Exponent pairs (α, β) in basis order (α major).
    pub fn exponent_pairs(&self) -> Vec<(f64, f64)> {
        let betas = self.betas();
        self.alphas()
            .into_iter()
            .flat_map(|a| betas.iter().map(move |&b| (a, b)))
            .collect()
    }

    pub fn size(&self) -> usize {
        self.n_rho * self.n_z
    }

    /// The basis with one more exponent at each end of both ranges, at the
    /// same geometric ratio. It contains `self` as a subset.
    pub fn extended(&self) -> Self {
        let ra = (self.alpha_max / self.alpha_min).powf(1.0 / (self.n_rho - 1) as f64);
        let rb = (self.beta_max / self.beta_min).powf(1.0 / (self.n_z - 1) as f64);
        Self {
            n_rho: self.n_rho + 2,
            n_z: self.n_z + 2,
            alpha_min: self.alpha_min / ra,
            alpha_max: self.alpha_max * ra,
            beta_min: self.beta_min / rb,
            beta_max: self.beta_max * rb,
            ..*self
        }
    }
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n)
        .map(|k| {
            if k == n - 1 {
                hi
            } else {
                lo * (ratio * k as f64).exp()
            }
        })
        .collect()
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Γ(k + ½).
fn gamma_half(k: usize) -> f64 {
    let mut g = PI.sqrt();
    for i in 0..k {
        g *= i as f64 + 0.5;
    }
    g
}

/// ∫₀^∞ ρ^{2k+1} e^{−Aρ²} dρ.
fn radial_moment(k: usize, a: f64) -> f64 {
    factorial(k) / (2.0 * a.powi(k as i32 + 1))
}

/// ∫_{−∞}^{∞} z^{2k} e^{−Bz²} dz.
fn axial_moment(k: usize, b: f64) -> f64 {
    gamma_half(k) / b.powf(k as f64 + 0.5)
}

/// Angular-momentum and parity sector of the cylindrical problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Sector {
    pub abs_m: usize,
    pub z_power: usize,
}

/// Overlap ⟨χᵢ|χⱼ⟩.
pub(crate) fn overlap(s: Sector, a: f64, b: f64) -> f64 {
    2.0 * PI * radial_moment(s.abs_m, a) * axial_moment(s.z_power, b)
}

/// Kinetic ⟨∇χᵢ·∇χⱼ⟩, including the m²/ρ² centrifugal part.
pub(crate) fn kinetic(s: Sector, (ai, bi): (f64, f64), (aj, bj): (f64, f64)) -> f64 {
    let m = s.abs_m;
    let p = s.z_power;
    let a = ai + aj;
    let b = bi + bj;
    let mf = m as f64;
    let pf = p as f64;
    let mut transverse =
        4.0 * ai * aj * radial_moment(m + 1, a) - 2.0 * mf * a * radial_moment(m, a);
    if m >= 1 {
        transverse += 2.0 * mf * mf * radial_moment(m - 1, a);
    }
    let mut longitudinal =
        4.0 * bi * bj * axial_moment(p + 1, b) - 2.0 * pf * b * axial_moment(p, b);
    if p >= 1 {
        longitudinal += pf * pf * axial_moment(p - 1, b);
    }
    2.0 * PI * (transverse * axial_moment(p, b) + radial_moment(m, a) * longitudinal)
}

/// ⟨χᵢ|ρ²|χⱼ⟩, the diamagnetic moment.
pub(crate) fn rho_squared(s: Sector, a: f64, b: f64) -> f64 {
    2.0 * PI * radial_moment(s.abs_m + 1, a) * axial_moment(s.z_power, b)
}

/// ⟨χᵢ|(x ± iy)/√2|χⱼ⟩ between an |m| = 1 function and an m = 0 function of
/// even z-parity, which reduces to (2π/√2) ∫ρ³ e^{−Aρ²} ∫ e^{−Bz²}.
pub(crate) fn circular_dipole(a: f64, b: f64) -> f64 {
    2.0 * PI / std::f64::consts::SQRT_2 * radial_moment(1, a) * axial_moment(0, b)
}

/// Coulomb matrix elements ⟨χᵢ|1/r|χⱼ⟩.
///
/// Uses 1/r = (2/√π)∫₀^∞ exp(−t²r²) dt, which turns the 3D integral into
///
/// ```text
/// 2π (2/√π) (M!/2) Γ(p+½) ∫₀^∞ (A+t²)^{−(M+1)} (B+t²)^{−(p+½)} dt.
/// ```
///
/// The substitution t = √L·u/√(1−u²), L = max(A, B), maps this onto
/// ∫₀¹ (1−u²)^{M+p} / (S + (L−S)u²)^k du with S = min(A, B), whose only
/// feature is a complex pole pair at ±i√(S/(L−S)). Panels grow geometrically
/// away from the origin starting at the pole distance.
#[derive(Debug, Clone)]
pub(crate) struct CoulombQuadrature {
    rule: GaussLegendre,
}

impl CoulombQuadrature {
    pub fn new(points_per_panel: usize) -> Self {
        Self {
            rule: GaussLegendre::new(points_per_panel),
        }
    }

    pub fn inverse_r(&self, s: Sector, a: f64, b: f64) -> f64 {
        let m = s.abs_m;
        let p = s.z_power;
        let (large, small, power, prefactor) = if b >= a {
            (b, a, m as f64 + 1.0, b.powi(-(p as i32)))
        } else {
            (a, b, p as f64 + 0.5, a.powf(-(m as f64) - 0.5))
        };
        let poly = (m + p) as i32;
        let slope = large - small;
        let integrand = |u: f64| {
            let w = 1.0 - u * u;
            w.powi(poly) / (small + slope * u * u).powf(power)
        };
        let reduced = self
            .panels(small, slope)
            .windows(2)
            .map(|e| self.rule.integrate(e[0], e[1], integrand))
            .sum::<f64>();
        let norm = 2.0 * PI * (2.0 / PI.sqrt()) * 0.5 * factorial(m) * gamma_half(p);
        norm * prefactor * reduced
    }

    fn panels(&self, small: f64, slope: f64) -> Vec<f64> {
        let mut edges = vec![0.0];
        let pole = if slope > 0.0 {
            (small / slope).sqrt()
        } else {
            f64::INFINITY
        };
        let mut x = pole;
        while x < 1.0 {
            edges.push(x);
            x *= 2.0;
        }
        edges.push(1.0);
        edges
    }
}
