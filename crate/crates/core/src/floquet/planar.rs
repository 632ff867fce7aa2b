//! Kicked planar (2D) rotor used as a reference for the 3D results.
//!
//! Levels E_J = J²/2 for J ∈ [−n, n]; any free wave packet revives after 4π.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{wrap_phase, SCHUR_DEFLATION};
use crate::error::{Error, Result};
use crate::propagation::TauFraction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanarKick {
    /// exp(iP cos φ): couples J to J±1.
    Cosine,
    /// exp(iP cos²φ) on the even-J sublattice: couples J to J±2.
    CosineSquared,
}

impl PlanarKick {
    /// Revival time of the grid the kick acts on. The even-J sublattice
    /// (J = 2m, E = 2m²) revives after π rather than 4π.
    pub fn revival_time(&self) -> f64 {
        match self {
            PlanarKick::Cosine => 4.0 * PI,
            PlanarKick::CosineSquared => PI,
        }
    }

    fn grid(&self, grid_size: u32) -> Vec<i64> {
        let n = grid_size as i64;
        match self {
            PlanarKick::Cosine => (-n..=n).collect(),
            PlanarKick::CosineSquared => (-n..=n).filter(|j| j % 2 == 0).collect(),
        }
    }

    fn coupling(&self, dim: usize) -> DMatrix<f64> {
        match self {
            PlanarKick::Cosine => DMatrix::from_fn(dim, dim, |a, b| if a.abs_diff(b) == 1 { 0.5 } else { 0.0 }),
            PlanarKick::CosineSquared => DMatrix::from_fn(dim, dim, |a, b| match a.abs_diff(b) {
                0 => 0.5,
                1 => 0.25,
                _ => 0.0,
            }),
        }
    }
}

/// One-cycle operator D·K·D of the kicked planar rotor.
pub fn planar_cycle_operator(kick_strength: f64, tau: TauFraction, grid_size: u32, kick: PlanarKick) -> Result<DMatrix<Complex64>> {
    if grid_size < 10 {
        return Err(Error::InvalidBasis(format!("planar grid size {grid_size} must be at least 10")));
    }
    let js = kick.grid(grid_size);
    let n = js.len();
    let eig = nalgebra::SymmetricEigen::try_new(kick.coupling(n), f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen(format!("planar {kick:?} coupling, grid size {grid_size}")))?;
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, kick_strength * l)));
    let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let mut u = &v * phases * v.transpose();
    let half = 0.5 * tau.period_for(kick.revival_time());
    let d: Vec<Complex64> = js.iter().map(|&j| Complex64::from_polar(1.0, -0.5 * (j * j) as f64 * half)).collect();
    for r in 0..n {
        for c in 0..n {
            u[(r, c)] *= d[r] * d[c];
        }
    }
    Ok(u)
}

/// Sorted quasienergies of the kicked planar rotor.
pub fn planar_reference_spectrum(kick_strength: f64, tau: TauFraction, grid_size: u32, kick: PlanarKick) -> Result<Vec<f64>> {
    let u = planar_cycle_operator(kick_strength, tau, grid_size, kick)?;
    let n = u.nrows();
    let schur = nalgebra::linalg::Schur::try_new(u, SCHUR_DEFLATION, 200 * n)
        .ok_or_else(|| Error::Eigen(format!("planar one-cycle operator, P={kick_strength}, τ={tau}")))?;
    let mut omegas: Vec<f64> = schur.eigenvalues().expect("complex Schur form is triangular").iter().map(|l| wrap_phase(-l.arg())).collect();
    omegas.sort_by(f64::total_cmp);
    Ok(omegas)
}
