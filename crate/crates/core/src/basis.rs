//! Truncated |J,M⟩ basis, rotor energy levels and physical-unit conversions.
//!
//! Reduced units throughout: energy in ħ²/I, time in I/ħ. In these units the
//! rigid rotor has E_J = J(J+1)/2 and every wave packet revives after 2π.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in cm/s.
pub const SPEED_OF_LIGHT_CM: f64 = 2.997_924_58e10;
/// Planck constant in J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant in J·s.
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Boltzmann constant in J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Revival time of the rigid rotor in reduced units.
pub const REVIVAL_TIME: f64 = 2.0 * PI;

/// Number of J-units at each end of the grid that define the edge windows.
pub const EDGE_WINDOW: u32 = 40;

/// Smallest allowed basis dimension.
pub const MIN_DIMENSION: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(j: u32) -> Parity {
        if j % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    fn matches(self, j: u32) -> bool {
        Parity::of(j) == self
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parity::Even => f.write_str("even"),
            Parity::Odd => f.write_str("odd"),
        }
    }
}

/// A parity block of the |J,M⟩ basis: J runs from `j_min` to `j_top` in steps of 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisSpec {
    m: i32,
    parity: Parity,
    j_max: u32,
    j_min: u32,
    j_top: u32,
}

impl BasisSpec {
    pub fn new(m: i32, parity: Parity, j_max: u32) -> Result<Self> {
        let abs_m = m.unsigned_abs();
        let j_min = if parity.matches(abs_m) { abs_m } else { abs_m + 1 };
        let j_top = if parity.matches(j_max) { j_max } else { j_max.saturating_sub(1) };
        if j_top < j_min {
            return Err(Error::InvalidBasis(format!(
                "no {parity} J values between |M|={abs_m} and J_max={j_max}"
            )));
        }
        let spec = BasisSpec { m, parity, j_max, j_min, j_top };
        if spec.dim() < MIN_DIMENSION {
            return Err(Error::InvalidBasis(format!(
                "dimension {} is below the minimum {MIN_DIMENSION} (M={m}, {parity}, J_max={j_max})",
                spec.dim()
            )));
        }
        Ok(spec)
    }

    pub fn m(&self) -> i32 {
        self.m
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// The requested truncation (may exceed the top grid value by one).
    pub fn j_max(&self) -> u32 {
        self.j_max
    }

    pub fn j_min(&self) -> u32 {
        self.j_min
    }

    /// Largest J actually present in the grid.
    pub fn j_top(&self) -> u32 {
        self.j_top
    }

    pub fn dim(&self) -> usize {
        ((self.j_top - self.j_min) / 2 + 1) as usize
    }

    pub fn j(&self, index: usize) -> u32 {
        self.j_min + 2 * index as u32
    }

    pub fn index_of(&self, j: u32) -> Option<usize> {
        if j < self.j_min || j > self.j_top || !self.parity.matches(j) {
            None
        } else {
            Some(((j - self.j_min) / 2) as usize)
        }
    }

    pub fn js(&self) -> impl Iterator<Item = u32> + '_ {
        (self.j_min..=self.j_top).step_by(2)
    }

    /// Grid indices whose J lies within `EDGE_WINDOW` J-units of the lower edge.
    pub fn lower_window(&self) -> std::ops::Range<usize> {
        let end = self.j_min + EDGE_WINDOW - 1;
        0..self.js().take_while(|&j| j <= end).count()
    }

    /// Grid indices whose J lies within `EDGE_WINDOW` J-units of the upper edge.
    pub fn upper_window(&self) -> std::ops::Range<usize> {
        let start = self.j_top.saturating_sub(EDGE_WINDOW - 1);
        let n = self.js().filter(|&j| j >= start).count();
        self.dim() - n..self.dim()
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M={} {} J∈[{}, {}]", self.m, self.parity, self.j_min, self.j_top)
    }
}

/// Rotor level structure: E_J = J(J+1)/2 − ε J²(J+1)².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorSpectrum {
    centrifugal_eps: f64,
}

impl Default for RotorSpectrum {
    fn default() -> Self {
        RotorSpectrum::rigid()
    }
}

impl RotorSpectrum {
    pub fn rigid() -> Self {
        RotorSpectrum { centrifugal_eps: 0.0 }
    }

    pub fn with_centrifugal(eps: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidSpectrum(format!("centrifugal coefficient {eps} must be finite and ≥ 0")));
        }
        Ok(RotorSpectrum { centrifugal_eps: eps })
    }

    pub fn eps(&self) -> f64 {
        self.centrifugal_eps
    }

    pub fn is_rigid(&self) -> bool {
        self.centrifugal_eps == 0.0
    }

    pub fn energy(&self, j: u32) -> f64 {
        let jj = j as f64 * (j as f64 + 1.0);
        0.5 * jj - self.centrifugal_eps * jj * jj
    }

    /// e^{−iE_J t} for t = 2π·num/den. The rigid part of the phase is reduced
    /// in integer arithmetic, so revival phases are exact.
    pub fn phase_at_fraction(&self, j: u32, num: u64, den: u64) -> Complex64 {
        let jj = j as u128 * (j as u128 + 1);
        let modulus = 2 * den as u128;
        let rigid_turns = ((jj * num as u128) % modulus) as f64 / modulus as f64;
        let jjf = jj as f64;
        let centrifugal_turns = (self.centrifugal_eps * jjf * jjf * num as f64 / den as f64).rem_euclid(1.0);
        Complex64::from_polar(1.0, -2.0 * PI * (rigid_turns - centrifugal_turns))
    }

    /// Rejects grids on which the level ladder stops increasing.
    pub fn check_grid(&self, j_max: u32) -> Result<()> {
        let jj = j_max as f64 * (j_max as f64 + 1.0);
        if 4.0 * self.centrifugal_eps * jj >= 1.0 {
            return Err(Error::InvalidSpectrum(format!(
                "energy is not monotone up to J_max={j_max} for ε={}",
                self.centrifugal_eps
            )));
        }
        Ok(())
    }

    /// Levels on a basis grid, after checking monotonicity up to its top.
    pub fn levels(&self, basis: &BasisSpec) -> Result<Vec<f64>> {
        self.check_grid(basis.j_top())?;
        Ok(basis.js().map(|j| self.energy(j)).collect())
    }
}

/// Reduced energy of level `j`.
pub fn energy_level(j: u32, spectrum: &RotorSpectrum) -> f64 {
    spectrum.energy(j)
}

/// Molecular constants connecting reduced and SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitBridge {
    /// Rotational constant B in cm⁻¹.
    pub rotational_constant: f64,
    /// Centrifugal distortion constant D in cm⁻¹.
    pub centrifugal_constant: f64,
    /// Polarizability anisotropy Δα in Å³.
    pub polarizability_anisotropy: Option<f64>,
}

impl UnitBridge {
    pub fn new(b_cm: f64, d_cm: f64, delta_alpha_a3: Option<f64>) -> Result<Self> {
        let bridge = UnitBridge {
            rotational_constant: b_cm,
            centrifugal_constant: d_cm,
            polarizability_anisotropy: delta_alpha_a3,
        };
        bridge.check()?;
        Ok(bridge)
    }

    fn check(&self) -> Result<()> {
        if !(self.rotational_constant > 0.0 && self.rotational_constant.is_finite()) {
            return Err(Error::InvalidUnits(format!(
                "rotational constant B={} cm⁻¹ must be positive",
                self.rotational_constant
            )));
        }
        if !(self.centrifugal_constant >= 0.0 && self.centrifugal_constant.is_finite()) {
            return Err(Error::InvalidUnits(format!(
                "centrifugal constant D={} cm⁻¹ must be ≥ 0",
                self.centrifugal_constant
            )));
        }
        if let Some(da) = self.polarizability_anisotropy {
            if !da.is_finite() {
                return Err(Error::InvalidUnits(format!("polarizability anisotropy {da} is not finite")));
            }
        }
        Ok(())
    }

    /// Revival time 1/(2Bc) in seconds.
    pub fn revival_time_si(&self) -> Result<f64> {
        self.check()?;
        Ok(1.0 / (2.0 * self.rotational_constant * SPEED_OF_LIGHT_CM))
    }

    /// Seconds per reduced time unit I/ħ.
    pub fn time_unit(&self) -> f64 {
        1.0 / (4.0 * PI * self.rotational_constant * SPEED_OF_LIGHT_CM)
    }

    pub fn to_reduced_time(&self, seconds: f64) -> f64 {
        seconds / self.time_unit()
    }

    pub fn to_si_time(&self, reduced: f64) -> f64 {
        reduced * self.time_unit()
    }

    /// cm⁻¹ per reduced energy unit ħ²/I (equals 2B).
    pub fn energy_unit_cm(&self) -> f64 {
        2.0 * self.rotational_constant
    }

    /// Joules per reduced energy unit.
    pub fn energy_unit_joule(&self) -> f64 {
        PLANCK * SPEED_OF_LIGHT_CM * self.energy_unit_cm()
    }

    /// ε = D / 2B.
    pub fn centrifugal_eps(&self) -> f64 {
        self.centrifugal_constant / (2.0 * self.rotational_constant)
    }

    pub fn spectrum(&self) -> Result<RotorSpectrum> {
        self.check()?;
        RotorSpectrum::with_centrifugal(self.centrifugal_eps())
    }
}

/// Revival time in seconds for the molecule described by `bridge`.
pub fn revival_time_si(bridge: &UnitBridge) -> Result<f64> {
    bridge.revival_time_si()
}
