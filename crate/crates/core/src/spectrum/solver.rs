use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::basis::{self, CoulombQuadrature, Sector, VariationalBasisSpec};
use super::{HydrogenicState, LevelSolution};
use crate::{Error, Result};

/// Overlap eigenvalues below this fraction of the largest are discarded.
const OVERLAP_FILTER: f64 = 1e-10;

/// Relative agreement required between the N- and 2N-point Coulomb rules.
const QUADRATURE_TOLERANCE: f64 = 1e-10;

/// γ-independent matrices of one (|m|, parity) sector in a normalised basis.
#[derive(Debug, Clone)]
pub struct SectorProblem {
    sector: Sector,
    basis: VariationalBasisSpec,
    /// 1/√⟨χᵢ|χᵢ⟩ for each raw basis function.
    scale: DVector<f64>,
    /// Orthonormalising map from the filtered overlap spectrum, X = U Λ^{-1/2}.
    ortho: DMatrix<f64>,
    field_free: DMatrix<f64>,
    diamagnetic: DMatrix<f64>,
}

impl SectorProblem {
    pub fn new(sector: Sector, spec: &VariationalBasisSpec) -> Result<Self> {
        spec.validate()?;
        let quad = CoulombQuadrature::new(spec.quadrature_points);
        check_quadrature(sector, spec, &quad)?;

        let pairs = spec.exponent_pairs();
        let n = pairs.len();
        let mut overlap = DMatrix::zeros(n, n);
        let mut field_free = DMatrix::zeros(n, n);
        let mut diamagnetic = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let (ai, bi) = pairs[i];
                let (aj, bj) = pairs[j];
                let a = ai + aj;
                let b = bi + bj;
                let s = basis::overlap(sector, a, b);
                let h =
                    basis::kinetic(sector, pairs[i], pairs[j]) - 2.0 * quad.inverse_r(sector, a, b);
                let d = basis::rho_squared(sector, a, b);
                for (m, v) in [
                    (&mut overlap, s),
                    (&mut field_free, h),
                    (&mut diamagnetic, d),
                ] {
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        }

        let scale = DVector::from_iterator(n, (0..n).map(|i| 1.0 / overlap[(i, i)].sqrt()));
        let normalise = |m: &mut DMatrix<f64>| {
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] *= scale[i] * scale[j];
                }
            }
        };
        normalise(&mut overlap);
        normalise(&mut field_free);
        normalise(&mut diamagnetic);

        if overlap.iter().any(|v| !v.is_finite()) || field_free.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateBasis {
                retained: 0,
                size: n,
            });
        }

        let eig = SymmetricEigen::new(overlap);
        let largest = eig.eigenvalues.max();
        let keep: Vec<usize> = (0..n)
            .filter(|&k| eig.eigenvalues[k] > OVERLAP_FILTER * largest)
            .collect();
        if 2 * keep.len() < n {
            return Err(Error::DegenerateBasis {
                retained: keep.len(),
                size: n,
            });
        }
        let mut ortho = DMatrix::zeros(n, keep.len());
        for (c, &k) in keep.iter().enumerate() {
            let inv_sqrt = 1.0 / eig.eigenvalues[k].sqrt();
            for r in 0..n {
                ortho[(r, c)] = eig.eigenvectors[(r, k)] * inv_sqrt;
            }
        }

        Ok(Self {
            sector,
            basis: *spec,
            scale,
            ortho,
            field_free,
            diamagnetic,
        })
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    /// Number of overlap directions kept after spectral filtering.
    pub fn retained_rank(&self) -> usize {
        self.ortho.ncols()
    }

    /// Lowest eigenvalue of the sector Hamiltonian without the γm term, in Ry*,
    /// and its coefficients over the raw basis (unit norm).
    pub fn lowest(&self, gamma: f64) -> Result<(f64, Vec<f64>)> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dimensionless field must be non-negative, got {gamma}"
            )));
        }
        let h = &self.field_free + &self.diamagnetic * (0.25 * gamma * gamma);
        let reduced = self.ortho.transpose() * h * &self.ortho;
        let eig = SymmetricEigen::new(reduced);
        let (k, &e) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty spectrum");
        let normalised = &self.ortho * eig.eigenvectors.column(k);
        let coefficients = normalised
            .iter()
            .zip(self.scale.iter())
            .map(|(c, s)| c * s)
            .collect();
        Ok((e, coefficients))
    }

    pub fn level(&self, state: HydrogenicState, gamma: f64) -> Result<LevelSolution> {
        if state.sector() != self.sector {
            return Err(Error::InvalidParameter(format!(
                "state {state} does not belong to sector {:?}",
                self.sector
            )));
        }
        let (e, coefficients) = self.lowest(gamma)?;
        Ok(LevelSolution {
            state,
            gamma,
            energy: e + gamma * state.magnetic_quantum_number() as f64,
            coefficients,
            basis: self.basis,
        })
    }
}

fn check_quadrature(
    sector: Sector,
    spec: &VariationalBasisSpec,
    quad: &CoulombQuadrature,
) -> Result<()> {
    let reference = CoulombQuadrature::new(2 * spec.quadrature_points);
    let corners = [
        (2.0 * spec.alpha_min, 2.0 * spec.beta_max),
        (2.0 * spec.alpha_max, 2.0 * spec.beta_min),
        (2.0 * spec.alpha_min, 2.0 * spec.beta_min),
        (2.0 * spec.alpha_max, 2.0 * spec.beta_max),
    ];
    for (a, b) in corners {
        let coarse = quad.inverse_r(sector, a, b);
        let fine = reference.inverse_r(sector, a, b);
        let relative_change = ((coarse - fine) / fine).abs();
        if !(relative_change <= QUADRATURE_TOLERANCE) {
            return Err(Error::QuadratureAccuracy { relative_change });
        }
    }
    Ok(())
}

/// ⟨excited|(x ± iy)/√2|ground⟩ in effective Bohr radii, as a magnitude.
pub(crate) fn circular_dipole(excited: &LevelSolution, ground: &LevelSolution) -> f64 {
    let ep = excited.basis.exponent_pairs();
    let gp = ground.basis.exponent_pairs();
    let mut sum = 0.0;
    for (ci, &(ai, bi)) in excited.coefficients.iter().zip(&ep) {
        for (cj, &(aj, bj)) in ground.coefficients.iter().zip(&gp) {
            sum += ci * cj * basis::circular_dipole(ai + aj, bi + bj);
        }
    }
    sum.abs()
}
