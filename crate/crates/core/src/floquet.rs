//! Quasienergy (Floquet) states of the one-cycle operator.
//!
//! The one-cycle operator U is unitary, hence normal, so its complex Schur
//! form is diagonal up to rounding and the Schur vectors are an orthonormal
//! eigenbasis. Quasienergies follow U v = e^{−iω} v with ω ∈ [−π, π).

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::{BasisSpec, RotorSpectrum};
use crate::error::{Error, Result};
use crate::propagation::{one_cycle_operator, OneCycleOperator, PulseTrainSpec, TauFraction, WaveFunction};

pub mod planar;

pub use planar::{planar_cycle_operator, planar_reference_spectrum, PlanarKick};

/// Eigenvector residual tolerated by [`quasienergy_decomposition`].
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
/// Quasienergies closer than this are treated as one degenerate cluster.
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;
/// Lower-window weight above which a state counts as edge-localized.
pub const EDGE_LOWER_WEIGHT: f64 = 0.1;
/// Upper-window weight below which an edge state is trusted.
pub const EDGE_UPPER_WEIGHT: f64 = 1e-6;
/// Upper-window weight above which a state is a truncation artifact.
pub const ARTIFACT_UPPER_WEIGHT: f64 = 0.1;
/// Sorted quasienergies closer than this fraction of 2π belong to one band.
pub const BAND_GAP_FRACTION: f64 = 1e-4;
/// Default number of ω bins in scan histograms.
pub const DEFAULT_OMEGA_BINS: usize = 256;
/// Relative subdiagonal size at which the Schur iteration deflates. Machine
/// epsilon stalls on large degenerate clusters.
pub const SCHUR_DEFLATION: f64 = 1e-14;

/// Maps a phase onto [−π, π).
pub fn wrap_phase(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// Distance between two phases on the circle.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateClass {
    Extended,
    Edge,
    Artifact,
}

impl StateClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            StateClass::Extended => "extended",
            StateClass::Edge => "edge",
            StateClass::Artifact => "artifact",
        }
    }
}

impl fmt::Display for StateClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct QuasienergyState {
    pub omega: f64,
    pub eigenvalue: Complex64,
    pub vector: DVector<Complex64>,
    /// Weight within 40 J-units of the lower grid edge.
    pub lower_weight: f64,
    /// Weight within 40 J-units of the upper grid edge.
    pub upper_weight: f64,
    class: Option<StateClass>,
}

impl QuasienergyState {
    /// None until [`classify_edge_states`] has run.
    pub fn class(&self) -> Option<StateClass> {
        self.class
    }

    pub fn is_edge(&self) -> bool {
        self.class == Some(StateClass::Edge)
    }

    /// |⟨J|v⟩|² over the grid.
    pub fn profile(&self) -> Vec<f64> {
        self.vector.iter().map(|c| c.norm_sqr()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct QuasienergySet {
    states: Vec<QuasienergyState>,
    train: PulseTrainSpec,
    basis: BasisSpec,
    spectrum: RotorSpectrum,
}

impl QuasienergySet {
    pub fn states(&self) -> &[QuasienergyState] {
        &self.states
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn spectrum(&self) -> &RotorSpectrum {
        &self.spectrum
    }

    pub fn kick_strength(&self) -> f64 {
        self.train.kick_strength
    }

    pub fn tau(&self) -> TauFraction {
        self.train.tau
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_classified(&self) -> bool {
        self.states.iter().all(|s| s.class.is_some())
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.omega).collect()
    }

    pub fn of_class(&self, class: StateClass) -> impl Iterator<Item = &QuasienergyState> {
        self.states.iter().filter(move |s| s.class == Some(class))
    }

    pub fn count(&self, class: StateClass) -> usize {
        self.of_class(class).count()
    }

    /// C_α = ⟨v_α|ψ⟩ for every state, in set order.
    pub fn expansion_coefficients(&self, psi: &WaveFunction) -> Result<Vec<Complex64>> {
        self.check_basis(psi)?;
        Ok(self.states.iter().map(|s| s.vector.dotc(psi.coeffs())).collect())
    }

    /// Ψ(Nτ) = Σ_α C_α e^{−iω_α N} v_α.
    pub fn evolve(&self, psi0: &WaveFunction, cycles: usize) -> Result<WaveFunction> {
        let coeffs = self.expansion_coefficients(psi0)?;
        let mut out = DVector::<Complex64>::zeros(self.basis.dim());
        for (s, c) in self.states.iter().zip(coeffs) {
            let phase = Complex64::from_polar(1.0, -s.omega * cycles as f64);
            out.axpy(c * phase, &s.vector, Complex64::new(1.0, 0.0));
        }
        WaveFunction::from_coeffs(&self.basis, out, psi0.time() + cycles as f64 * self.train.period())
    }

    /// Edge states separated from every extended quasienergy by more than
    /// the mean level spacing 2π/dim.
    pub fn discrete_edge_levels(&self) -> Vec<&QuasienergyState> {
        let spacing = 2.0 * PI / self.basis.dim() as f64;
        let extended: Vec<f64> = self.of_class(StateClass::Extended).map(|s| s.omega).collect();
        self.of_class(StateClass::Edge)
            .filter(|s| extended.iter().all(|&w| phase_distance(s.omega, w) > spacing))
            .collect()
    }

    fn check_basis(&self, psi: &WaveFunction) -> Result<()> {
        if psi.basis() != &self.basis {
            return Err(Error::InvalidState(format!(
                "state on {} but quasienergy set on {}",
                psi.basis(),
                self.basis
            )));
        }
        Ok(())
    }
}

/// Full eigendecomposition of U, sorted by ascending ω.
pub fn quasienergy_decomposition(u: &OneCycleOperator) -> Result<QuasienergySet> {
    u.check_unitarity(1e-10)?;
    let basis = *u.basis();
    let n = basis.dim();
    let schur = nalgebra::linalg::Schur::try_new(u.matrix().clone(), SCHUR_DEFLATION, 200 * n)
        .ok_or_else(|| Error::Eigen(format!("one-cycle operator on {basis}, P={}, τ={}·t_rev", u.kick_strength(), u.tau())))?;
    let (q, t) = schur.unpack();

    let lower = basis.lower_window();
    let upper = basis.upper_window();
    let mut states: Vec<QuasienergyState> = (0..n)
        .map(|k| {
            let vector = q.column(k).into_owned();
            let eigenvalue = t[(k, k)];
            QuasienergyState {
                omega: wrap_phase(-eigenvalue.arg()),
                eigenvalue,
                lower_weight: lower.clone().map(|i| vector[i].norm_sqr()).sum(),
                upper_weight: upper.clone().map(|i| vector[i].norm_sqr()).sum(),
                vector,
                class: None,
            }
        })
        .collect();
    states.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    reorthonormalize_clusters(&mut states);

    let mut worst: Option<(f64, f64)> = None;
    for s in &states {
        let residual = (u.matrix() * &s.vector - &s.vector * s.eigenvalue).norm();
        if worst.is_none_or(|(r, _)| residual > r) {
            worst = Some((residual, s.omega));
        }
    }
    if let Some((residual, omega)) = worst {
        if !(residual < RESIDUAL_TOLERANCE) {
            return Err(Error::Residual { omega, residual, tolerance: RESIDUAL_TOLERANCE });
        }
    }
    Ok(QuasienergySet { states, train: *u.train(), basis, spectrum: *u.spectrum() })
}

/// Modified Gram–Schmidt within runs of (nearly) equal quasienergy.
fn reorthonormalize_clusters(states: &mut [QuasienergyState]) {
    let n = states.len();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && states[end].omega - states[end - 1].omega < DEGENERACY_THRESHOLD {
            end += 1;
        }
        if end - start > 1 {
            for k in start..end {
                for prev in start..k {
                    let proj = states[prev].vector.dotc(&states[k].vector);
                    let v = states[prev].vector.clone();
                    states[k].vector.axpy(-proj, &v, Complex64::new(1.0, 0.0));
                }
                let norm = states[k].vector.norm();
                states[k].vector /= Complex64::new(norm, 0.0);
            }
        }
        start = end;
    }
}

/// Assigns extended / edge / artifact from the edge-window weights.
pub fn classify_edge_states(mut set: QuasienergySet) -> Result<QuasienergySet> {
    let lower_end = set.basis.j_min() + crate::basis::EDGE_WINDOW - 1;
    let upper_start = set.basis.j_top().saturating_sub(crate::basis::EDGE_WINDOW - 1);
    if lower_end >= upper_start {
        return Err(Error::OverlappingWindows { lower_end, upper_start });
    }
    for s in &mut set.states {
        s.class = Some(if s.lower_weight > EDGE_LOWER_WEIGHT && s.upper_weight < EDGE_UPPER_WEIGHT {
            StateClass::Edge
        } else if s.upper_weight > ARTIFACT_UPPER_WEIGHT {
            StateClass::Artifact
        } else {
            StateClass::Extended
        });
    }
    Ok(set)
}

/// Builds, diagonalizes and classifies the one-cycle operator of a delta-kick train.
pub fn quasienergy_states(kick_strength: f64, tau: TauFraction, basis: &BasisSpec, spectrum: &RotorSpectrum) -> Result<QuasienergySet> {
    let train = PulseTrainSpec::delta(kick_strength, tau, 1)?;
    let u = one_cycle_operator(&train, basis, spectrum)?;
    classify_edge_states(quasienergy_decomposition(&u)?)
}

#[derive(Debug, Clone)]
pub struct EdgeContribution {
    pub omega: f64,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct OverlapReport {
    /// Most populated J of the initial state, and its M.
    pub initial: (u32, i32),
    pub kick_strength: f64,
    pub overlap: f64,
    pub contributions: Vec<EdgeContribution>,
}

/// O = Σ_edge |⟨v_α|ψ₀⟩|².
pub fn edge_overlap(psi0: &WaveFunction, set: &QuasienergySet) -> Result<OverlapReport> {
    set.check_basis(psi0)?;
    if !set.is_classified() {
        return Err(Error::InvalidState("quasienergy set has not been classified".into()));
    }
    let contributions: Vec<EdgeContribution> = set
        .of_class(StateClass::Edge)
        .map(|s| EdgeContribution { omega: s.omega, weight: s.vector.dotc(psi0.coeffs()).norm_sqr() })
        .collect();
    let overlap = contributions.iter().map(|c| c.weight).sum();
    let dominant = psi0
        .coeffs()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map(|(i, _)| set.basis.j(i))
        .unwrap_or(set.basis.j_min());
    Ok(OverlapReport {
        initial: (dominant, set.basis.m()),
        kick_strength: set.kick_strength(),
        overlap,
        contributions,
    })
}

/// A maximal run of quasienergies with small neighbouring gaps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub start: f64,
    pub width: f64,
    pub count: usize,
}

/// Groups quasienergies into bands on the circle; runs split wherever the
/// gap between sorted neighbours is at least `max_gap`.
pub fn bands(omegas: &[f64], max_gap: f64) -> Vec<Band> {
    if omegas.is_empty() {
        return Vec::new();
    }
    let mut sorted: Vec<f64> = omegas.iter().map(|&w| wrap_phase(w)).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let gap_after = |i: usize| {
        if i + 1 < n {
            sorted[i + 1] - sorted[i]
        } else {
            sorted[0] + 2.0 * PI - sorted[n - 1]
        }
    };
    let (widest, widest_gap) = (0..n).map(|i| (i, gap_after(i))).max_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty");
    if widest_gap < max_gap {
        return vec![Band { start: -PI, width: 2.0 * PI, count: n }];
    }
    let mut out = Vec::new();
    let first = (widest + 1) % n;
    let mut band_start = first;
    let mut width = 0.0;
    let mut count = 1;
    for step in 0..n - 1 {
        let i = (first + step) % n;
        let g = gap_after(i);
        if g < max_gap {
            width += g;
            count += 1;
        } else {
            out.push(Band { start: sorted[band_start], width, count });
            band_start = (i + 1) % n;
            width = 0.0;
            count = 1;
        }
    }
    out.push(Band { start: sorted[band_start], width, count });
    out
}

/// Bands of the non-artifact states using the default gap threshold.
pub fn quasienergy_bands(set: &QuasienergySet) -> Vec<Band> {
    let omegas: Vec<f64> = set.states.iter().filter(|s| s.class != Some(StateClass::Artifact)).map(|s| s.omega).collect();
    bands(&omegas, BAND_GAP_FRACTION * 2.0 * PI)
}

#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub kick_strength: f64,
    /// (ω, class) pairs, or the reason this point failed.
    pub outcome: std::result::Result<Vec<(f64, StateClass)>, String>,
}

#[derive(Debug, Clone)]
pub struct ScanTable {
    pub tau: TauFraction,
    pub basis: BasisSpec,
    pub points: Vec<ScanPoint>,
    pub omega_bins: usize,
    /// counts[p_index][omega_bin], artifacts excluded.
    pub histogram: Vec<Vec<u32>>,
}

impl ScanTable {
    pub fn failures(&self) -> impl Iterator<Item = (f64, &str)> {
        self.points.iter().filter_map(|p| p.outcome.as_ref().err().map(|e| (p.kick_strength, e.as_str())))
    }
}

pub fn omega_bin(omega: f64, bins: usize) -> usize {
    let x = (wrap_phase(omega) + PI) / (2.0 * PI) * bins as f64;
    (x.floor() as usize).min(bins - 1)
}

/// Quasienergies and classes over a grid of kick strengths.
pub fn spectrum_scan(p_grid: &[f64], tau: TauFraction, basis: &BasisSpec, spectrum: &RotorSpectrum, omega_bins: usize) -> Result<ScanTable> {
    if p_grid.len() < 2 {
        return Err(Error::InvalidTrain(format!("scan needs at least 2 kick strengths, got {}", p_grid.len())));
    }
    if p_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidTrain("kick strengths must be strictly ascending".into()));
    }
    if omega_bins == 0 {
        return Err(Error::InvalidTrain("histogram needs at least one ω bin".into()));
    }
    let points: Vec<ScanPoint> = p_grid
        .par_iter()
        .map(|&p| ScanPoint {
            kick_strength: p,
            outcome: quasienergy_states(p, tau, basis, spectrum)
                .map(|set| set.states.iter().map(|s| (s.omega, s.class.expect("classified"))).collect())
                .map_err(|e| e.to_string()),
        })
        .collect();
    let histogram = points
        .iter()
        .map(|pt| {
            let mut row = vec![0u32; omega_bins];
            if let Ok(levels) = &pt.outcome {
                for &(w, class) in levels {
                    if class != StateClass::Artifact {
                        row[omega_bin(w, omega_bins)] += 1;
                    }
                }
            }
            row
        })
        .collect();
    Ok(ScanTable { tau, basis: *basis, points, omega_bins, histogram })
}

/// Dense U·v − e^{−iω}v residual, exposed for diagnostics.
pub fn eigen_residual(u: &DMatrix<Complex64>, state: &QuasienergyState) -> f64 {
    (u * &state.vector - &state.vector * Complex64::from_polar(1.0, -state.omega)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Parity;

    fn tau(p: u32, q: u32) -> TauFraction {
        TauFraction::new(p, q).unwrap()
    }

    #[test]
    fn wrap_phase_branch() {
        assert_eq!(wrap_phase(PI), -PI);
        assert_eq!(wrap_phase(-PI), -PI);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        for k in -20..20 {
            let w = wrap_phase(0.37 * k as f64);
            assert!((-PI..PI).contains(&w));
        }
    }

    #[test]
    fn free_rotor_quasienergies() {
        let basis = BasisSpec::new(0, Parity::Even, 100).unwrap();
        let set = quasienergy_states(0.0, tau(1, 3), &basis, &RotorSpectrum::rigid()).unwrap();
        let mut expected: Vec<f64> = basis.js().map(|j| -RotorSpectrum::rigid().phase_at_fraction(j, 1, 3).arg()).map(wrap_phase).collect();
        expected.sort_by(f64::total_cmp);
        for (s, e) in set.states().iter().zip(&expected) {
            assert!(phase_distance(s.omega, *e) < 1e-10);
            let max = s.profile().into_iter().fold(0.0, f64::max);
            assert!((max - 1.0).abs() < 1e-10, "eigenvector is not a basis vector");
        }
    }

    #[test]
    fn decomposition_is_orthonormal_with_unit_moduli() {
        let basis = BasisSpec::new(0, Parity::Even, 160).unwrap();
        let set = quasienergy_states(3.0, tau(1, 3), &basis, &RotorSpectrum::rigid()).unwrap();
        let v = DMatrix::from_columns(&set.states().iter().map(|s| s.vector.clone()).collect::<Vec<_>>());
        let gram = v.adjoint() * &v - DMatrix::identity(basis.dim(), basis.dim());
        assert!(gram.camax() < 1e-8);
        assert!(set.states().iter().all(|s| (s.eigenvalue.norm() - 1.0).abs() < 1e-10));
        assert!(set.states().windows(2).all(|w| w[0].omega <= w[1].omega));
        assert!(set.is_classified());
    }

    #[test]
    fn top_basis_state_is_an_artifact() {
        let basis = BasisSpec::new(0, Parity::Even, 100).unwrap();
        let set = quasienergy_states(0.0, tau(1, 3), &basis, &RotorSpectrum::rigid()).unwrap();
        let top = set.states().iter().find(|s| s.vector[basis.dim() - 1].norm() > 0.5).unwrap();
        assert_eq!(top.class(), Some(StateClass::Artifact));
        let bottom = set.states().iter().find(|s| s.vector[0].norm() > 0.5).unwrap();
        assert_eq!(bottom.class(), Some(StateClass::Edge));
    }

    #[test]
    fn overlapping_windows_rejected() {
        let basis = BasisSpec::new(0, Parity::Even, 60).unwrap();
        let train = PulseTrainSpec::delta(1.0, tau(1, 3), 1).unwrap();
        let u = one_cycle_operator(&train, &basis, &RotorSpectrum::rigid()).unwrap();
        let set = quasienergy_decomposition(&u).unwrap();
        assert!(matches!(classify_edge_states(set), Err(Error::OverlappingWindows { .. })));
    }

    #[test]
    fn unclassified_overlap_rejected() {
        let basis = BasisSpec::new(0, Parity::Even, 100).unwrap();
        let train = PulseTrainSpec::delta(1.0, tau(1, 3), 1).unwrap();
        let set = quasienergy_decomposition(&one_cycle_operator(&train, &basis, &RotorSpectrum::rigid()).unwrap()).unwrap();
        let psi = WaveFunction::basis_state(&basis, 0).unwrap();
        assert!(edge_overlap(&psi, &set).is_err());
    }

    #[test]
    fn band_grouping() {
        let w = [0.0, 0.001, 0.002, 1.0, 1.0005, -3.1, 3.1];
        let b = bands(&w, 0.1);
        assert_eq!(b.len(), 3);
        let total: usize = b.iter().map(|b| b.count).sum();
        assert_eq!(total, w.len());
        // the pair straddling ±π forms one band across the branch cut
        assert!(b.iter().any(|b| b.count == 2 && (b.width - (2.0 * PI - 6.2)).abs() < 1e-12 && (b.start - 3.1).abs() < 1e-12));
        assert_eq!(bands(&[0.0, 0.1, 0.2], 10.0).len(), 1);
    }

    #[test]
    fn histogram_bins() {
        assert_eq!(omega_bin(-PI, 256), 0);
        assert_eq!(omega_bin(PI - 1e-12, 256), 255);
        assert_eq!(omega_bin(0.0, 256), 128);
    }

    #[test]
    fn scan_validation() {
        let basis = BasisSpec::new(0, Parity::Even, 100).unwrap();
        let rigid = RotorSpectrum::rigid();
        assert!(spectrum_scan(&[], tau(1, 3), &basis, &rigid, 16).is_err());
        assert!(spectrum_scan(&[1.0], tau(1, 3), &basis, &rigid, 16).is_err());
        assert!(spectrum_scan(&[2.0, 1.0], tau(1, 3), &basis, &rigid, 16).is_err());
        let scan = spectrum_scan(&[0.5, 1.0, 1.5], tau(1, 3), &basis, &rigid, 16).unwrap();
        assert_eq!(scan.histogram.len(), 3);
        for (pt, row) in scan.points.iter().zip(&scan.histogram) {
            let levels = pt.outcome.as_ref().unwrap();
            let non_artifact = levels.iter().filter(|l| l.1 != StateClass::Artifact).count();
            assert_eq!(row.iter().sum::<u32>() as usize, non_artifact);
        }
    }

    #[test]
    fn scan_records_failures_and_continues() {
        // ε large enough that the grid is non-monotone fails every point without aborting the scan
        let basis = BasisSpec::new(0, Parity::Even, 100).unwrap();
        let soft = RotorSpectrum::with_centrifugal(1e-3).unwrap();
        let scan = spectrum_scan(&[1.0, 2.0], tau(1, 3), &basis, &soft, 8).unwrap();
        assert_eq!(scan.failures().count(), 2);
        assert!(scan.histogram.iter().all(|row| row.iter().all(|&c| c == 0)));
    }
}
