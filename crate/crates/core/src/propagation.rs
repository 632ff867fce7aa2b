//! Kick and free-evolution propagators, the one-cycle operator and pulse-train
//! propagation (instantaneous kicks and finite Gaussian pulses).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::basis::{BasisSpec, RotorSpectrum, UnitBridge, HBAR, REVIVAL_TIME};
use crate::coupling::{cos2_matrix, CouplingEigen, CouplingMatrix};
use crate::error::{Error, Result};

/// Population allowed in the upper edge window during trusted propagation.
pub const TRUNCATION_GUARD: f64 = 1e-8;

/// Minimum number of integration steps per pulse FWHM.
pub const MIN_STEPS_PER_FWHM: f64 = 64.0;

/// Bound on dt times the largest coupled level spacing.
pub const MAX_PHASE_STEP: f64 = 0.1;

/// Finite pulses are integrated over ±this many FWHM around their centre.
const PULSE_HALF_WINDOW_FWHM: f64 = 4.0;

/// Kick period as an exact fraction p/q of the revival time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TauFraction {
    p: u32,
    q: u32,
}

impl TauFraction {
    pub fn new(p: u32, q: u32) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::InvalidTrain(format!("τ fraction {p}/{q} needs positive integers")));
        }
        if gcd(p, q) != 1 {
            return Err(Error::InvalidTrain(format!("τ fraction {p}/{q} is not in lowest terms")));
        }
        Ok(TauFraction { p, q })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn value(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    /// Period in reduced time for a rotor whose revival time is `revival`.
    pub fn period_for(&self, revival: f64) -> f64 {
        revival * self.p as f64 / self.q as f64
    }

    /// Period in reduced time for the 3D rotor (t_rev = 2π).
    pub fn period(&self) -> f64 {
        self.period_for(REVIVAL_TIME)
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl fmt::Display for TauFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

impl FromStr for TauFraction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidTrain(format!("cannot parse τ fraction {s:?}; expected p/q"));
        let (p, q) = match s.split_once('/') {
            Some((p, q)) => (p.trim().parse().map_err(|_| bad())?, q.trim().parse().map_err(|_| bad())?),
            None => (s.trim().parse().map_err(|_| bad())?, 1),
        };
        TauFraction::new(p, q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseShape {
    Delta,
    /// Gaussian intensity envelope with the given FWHM in reduced time.
    Gaussian { fwhm: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseTrainSpec {
    pub kick_strength: f64,
    pub tau: TauFraction,
    pub pulses: usize,
    pub shape: PulseShape,
}

impl PulseTrainSpec {
    pub fn new(kick_strength: f64, tau: TauFraction, pulses: usize, shape: PulseShape) -> Result<Self> {
        if !(kick_strength >= 0.0 && kick_strength.is_finite()) {
            return Err(Error::InvalidTrain(format!("kick strength {kick_strength} must be finite and ≥ 0")));
        }
        if pulses == 0 {
            return Err(Error::InvalidTrain("pulse count must be at least 1".into()));
        }
        if let PulseShape::Gaussian { fwhm } = shape {
            if !(fwhm > 0.0 && fwhm.is_finite()) {
                return Err(Error::InvalidTrain(format!("pulse FWHM {fwhm} must be positive")));
            }
        }
        Ok(PulseTrainSpec { kick_strength, tau, pulses, shape })
    }

    pub fn delta(kick_strength: f64, tau: TauFraction, pulses: usize) -> Result<Self> {
        PulseTrainSpec::new(kick_strength, tau, pulses, PulseShape::Delta)
    }

    pub fn period(&self) -> f64 {
        self.tau.period()
    }
}

/// Rotor state as amplitudes ⟨J,M|Ψ(t)⟩ on a parity block.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    coeffs: DVector<Complex64>,
    basis: BasisSpec,
    time: f64,
}

impl WaveFunction {
    pub fn basis_state(basis: &BasisSpec, j: u32) -> Result<Self> {
        let index = basis.index_of(j).ok_or_else(|| {
            Error::InvalidState(format!("J={j} is not on the grid {basis}"))
        })?;
        let mut coeffs = DVector::zeros(basis.dim());
        coeffs[index] = Complex64::new(1.0, 0.0);
        Ok(WaveFunction { coeffs, basis: *basis, time: 0.0 })
    }

    pub fn from_coeffs(basis: &BasisSpec, coeffs: DVector<Complex64>, time: f64) -> Result<Self> {
        if coeffs.len() != basis.dim() {
            return Err(Error::InvalidState(format!(
                "{} amplitudes for a basis of dimension {}",
                coeffs.len(),
                basis.dim()
            )));
        }
        let norm = coeffs.norm_squared();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("state is not normalized (Σ|C|² = {norm})")));
        }
        Ok(WaveFunction { coeffs, basis: *basis, time })
    }

    pub fn coeffs(&self) -> &DVector<Complex64> {
        &self.coeffs
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn norm_squared(&self) -> f64 {
        self.coeffs.norm_squared()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &WaveFunction) -> Complex64 {
        self.coeffs.dotc(&other.coeffs)
    }

    pub fn fidelity(&self, other: &WaveFunction) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Population in the grid's upper edge window.
    pub fn top_population(&self) -> f64 {
        self.basis.upper_window().map(|i| self.coeffs[i].norm_sqr()).sum()
    }
}

/// exp(−i E_J t) on each grid site.
pub fn free_phases(levels: &[f64], t: f64) -> Vec<Complex64> {
    let turns = t / (2.0 * PI);
    levels.iter().map(|&e| Complex64::from_polar(1.0, -2.0 * PI * (e * turns).rem_euclid(1.0))).collect()
}

/// Free phases over `num/den` of the revival time.
pub fn free_phases_at_fraction(basis: &BasisSpec, spectrum: &RotorSpectrum, num: u64, den: u64) -> Result<Vec<Complex64>> {
    spectrum.check_grid(basis.j_top())?;
    Ok(basis.js().map(|j| spectrum.phase_at_fraction(j, num, den)).collect())
}

pub fn free_evolution(psi: &WaveFunction, spectrum: &RotorSpectrum, t: f64) -> Result<WaveFunction> {
    let levels = spectrum.levels(&psi.basis)?;
    let phases = free_phases(&levels, t);
    let coeffs = psi.coeffs.component_mul(&DVector::from_vec(phases));
    Ok(WaveFunction { coeffs, basis: psi.basis, time: psi.time + t })
}

/// Complex block stored as separate real and imaginary parts so that products
/// with the real coupling eigenvectors stay in real GEMMs.
#[derive(Debug, Clone)]
struct SplitBlock {
    re: DMatrix<f64>,
    im: DMatrix<f64>,
}

impl SplitBlock {
    fn identity(n: usize) -> Self {
        SplitBlock { re: DMatrix::identity(n, n), im: DMatrix::zeros(n, n) }
    }

    fn from_vector(v: &DVector<Complex64>) -> Self {
        let n = v.len();
        SplitBlock {
            re: DMatrix::from_iterator(n, 1, v.iter().map(|c| c.re)),
            im: DMatrix::from_iterator(n, 1, v.iter().map(|c| c.im)),
        }
    }

    fn to_complex(&self) -> DMatrix<Complex64> {
        self.re.zip_map(&self.im, Complex64::new)
    }

    fn rotate_rows(&mut self, phases: &[Complex64]) {
        for (r, ph) in phases.iter().enumerate() {
            let mut re = self.re.row_mut(r);
            let mut im = self.im.row_mut(r);
            for k in 0..re.len() {
                let (a, b) = (re[k], im[k]);
                re[k] = a * ph.re - b * ph.im;
                im[k] = a * ph.im + b * ph.re;
            }
        }
    }
}

/// Reusable kick propagator exp(iP cos²θ) built from the coupling eigenbasis.
#[derive(Debug, Clone)]
pub struct KickPropagator {
    eigen: CouplingEigen,
    vectors_t: DMatrix<f64>,
}

impl KickPropagator {
    pub fn new(coupling: &CouplingMatrix) -> Result<Self> {
        let eigen = coupling.eigen()?;
        let vectors_t = eigen.vectors.transpose();
        Ok(KickPropagator { eigen, vectors_t })
    }

    pub fn dim(&self) -> usize {
        self.eigen.values.len()
    }

    fn phases(&self, kick_strength: f64) -> Vec<Complex64> {
        self.eigen.values.iter().map(|&l| Complex64::from_polar(1.0, kick_strength * l)).collect()
    }

    fn apply_block(&self, kick_strength: f64, block: &mut SplitBlock) {
        if kick_strength == 0.0 {
            return;
        }
        let mut rotated = SplitBlock { re: &self.vectors_t * &block.re, im: &self.vectors_t * &block.im };
        rotated.rotate_rows(&self.phases(kick_strength));
        block.re = &self.eigen.vectors * rotated.re;
        block.im = &self.eigen.vectors * rotated.im;
    }

    /// V·diag(exp(iPλ))·Vᵀ as a dense matrix, formed as I + V·diag(exp(iPλ) − 1)·Vᵀ
    /// so that weak kicks keep full relative accuracy.
    pub fn matrix(&self, kick_strength: f64) -> DMatrix<Complex64> {
        let n = self.dim();
        let scaled = |f: &dyn Fn(f64) -> f64| {
            let mut vs = self.eigen.vectors.clone();
            for (mut col, &l) in vs.column_iter_mut().zip(self.eigen.values.iter()) {
                col *= f(kick_strength * l);
            }
            vs * &self.vectors_t
        };
        let re = DMatrix::identity(n, n) + scaled(&|x| -2.0 * (0.5 * x).sin().powi(2));
        let im = scaled(&|x| x.sin());
        re.zip_map(&im, Complex64::new)
    }

    pub fn apply(&self, kick_strength: f64, psi: &WaveFunction) -> WaveFunction {
        let mut block = SplitBlock::from_vector(&psi.coeffs);
        self.apply_block(kick_strength, &mut block);
        WaveFunction { coeffs: block.to_complex().column(0).into_owned(), basis: psi.basis, time: psi.time }
    }
}

/// exp(iP cos²θ) on the coupling's basis.
pub fn kick_operator(kick_strength: f64, coupling: &CouplingMatrix) -> Result<DMatrix<Complex64>> {
    Ok(KickPropagator::new(coupling)?.matrix(kick_strength))
}

/// One kick period: free evolution, kick and free evolution.
#[derive(Debug, Clone)]
pub struct OneCycleOperator {
    matrix: DMatrix<Complex64>,
    train: PulseTrainSpec,
    basis: BasisSpec,
    spectrum: RotorSpectrum,
}

impl OneCycleOperator {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn train(&self) -> &PulseTrainSpec {
        &self.train
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

    /// Largest ‖(U†U − I)e_J‖ over source columns with J ≤ J_top − 40.
    pub fn interior_unitarity_residual(&self) -> f64 {
        let gram = self.matrix.adjoint() * &self.matrix;
        let limit = self.basis.j_top().saturating_sub(crate::basis::EDGE_WINDOW);
        let mut worst = 0.0f64;
        for (k, j) in self.basis.js().enumerate() {
            if j > limit {
                break;
            }
            let mut col = gram.column(k).into_owned();
            col[k] -= Complex64::new(1.0, 0.0);
            worst = worst.max(col.norm());
        }
        worst
    }

    pub fn check_unitarity(&self, tolerance: f64) -> Result<()> {
        let gram = self.matrix.adjoint() * &self.matrix;
        let limit = self.basis.j_top().saturating_sub(crate::basis::EDGE_WINDOW);
        for (k, j) in self.basis.js().enumerate() {
            if j > limit {
                break;
            }
            let mut col = gram.column(k).into_owned();
            col[k] -= Complex64::new(1.0, 0.0);
            let residual = col.norm();
            if !(residual < tolerance) {
                return Err(Error::NotUnitary { j, residual });
            }
        }
        Ok(())
    }

    pub fn apply(&self, psi: &WaveFunction) -> WaveFunction {
        assert_eq!(psi.basis, self.basis, "state and operator live on different bases");
        WaveFunction {
            coeffs: &self.matrix * &psi.coeffs,
            basis: psi.basis,
            time: psi.time + self.train.period(),
        }
    }

    /// U†ψ, stepping one period back in time.
    pub fn apply_inverse(&self, psi: &WaveFunction) -> WaveFunction {
        assert_eq!(psi.basis, self.basis, "state and operator live on different bases");
        WaveFunction {
            coeffs: self.matrix.ad_mul(&psi.coeffs),
            basis: psi.basis,
            time: psi.time - self.train.period(),
        }
    }
}

/// U = D·K·D with D = diag(exp(−iE_J τ/2)) and K the kick operator.
pub fn one_cycle_operator(train: &PulseTrainSpec, basis: &BasisSpec, spectrum: &RotorSpectrum) -> Result<OneCycleOperator> {
    if train.shape != PulseShape::Delta {
        return Err(Error::InvalidTrain("one_cycle_operator needs instantaneous kicks; use finite_pulse_operator".into()));
    }
    let kick = KickPropagator::new(&cos2_matrix(basis))?;
    let half = free_phases_at_fraction(basis, spectrum, train.tau.p() as u64, 2 * train.tau.q() as u64)?;
    let mut matrix = kick.matrix(train.kick_strength);
    for (r, dr) in half.iter().enumerate() {
        for (c, dc) in half.iter().enumerate() {
            matrix[(r, c)] *= dr * dc;
        }
    }
    Ok(OneCycleOperator { matrix, train: *train, basis: *basis, spectrum: *spectrum })
}

/// Step plan for one finite pulse centred in the period.
#[derive(Debug, Clone)]
pub struct PulseSchedule {
    /// Free evolution before the first step (and after the last one).
    pub lead: f64,
    pub dt: f64,
    /// Kick increment applied at the midpoint of each step.
    pub increments: Vec<f64>,
}

impl PulseSchedule {
    pub fn new(train: &PulseTrainSpec, levels: &[f64], dt: f64) -> Result<Self> {
        let fwhm = match train.shape {
            PulseShape::Gaussian { fwhm } => fwhm,
            PulseShape::Delta => return Err(Error::InvalidTrain("finite pulse integration needs a Gaussian pulse shape".into())),
        };
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::StepSize(format!("dt={dt} must be positive")));
        }
        if fwhm / dt < MIN_STEPS_PER_FWHM * (1.0 - 1e-12) {
            return Err(Error::StepSize(format!(
                "dt={dt} gives {:.1} steps per FWHM, need at least {MIN_STEPS_PER_FWHM}",
                fwhm / dt
            )));
        }
        let spread = max_coupled_spacing(levels);
        if dt * spread >= MAX_PHASE_STEP {
            return Err(Error::StepSize(format!(
                "dt·ΔE = {:.3} at the top of the grid, must stay below {MAX_PHASE_STEP}",
                dt * spread
            )));
        }
        let half_window = PULSE_HALF_WINDOW_FWHM * fwhm;
        let period = train.period();
        if 2.0 * half_window > period {
            return Err(Error::InvalidTrain(format!(
                "pulse FWHM {fwhm} does not fit in the period {period}"
            )));
        }
        let steps = (2.0 * half_window / dt).ceil() as usize;
        let dt = 2.0 * half_window / steps as f64;
        let increments = (0..steps)
            .map(|k| {
                let t = -half_window + (k as f64 + 0.5) * dt;
                train.kick_strength * gaussian_envelope(t, fwhm) * dt
            })
            .collect();
        Ok(PulseSchedule { lead: 0.5 * period - half_window, dt, increments })
    }

    /// Kick strength delivered by the discretized envelope.
    pub fn total_kick(&self) -> f64 {
        self.increments.iter().sum()
    }
}

/// Unit-area Gaussian with the given FWHM.
pub fn gaussian_envelope(t: f64, fwhm: f64) -> f64 {
    let a = 4.0 * std::f64::consts::LN_2 / (fwhm * fwhm);
    (a / PI).sqrt() * (-a * t * t).exp()
}

fn max_coupled_spacing(levels: &[f64]) -> f64 {
    levels.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
}

/// Largest step the finite-pulse integrator accepts for this train and grid.
pub fn default_pulse_step(train: &PulseTrainSpec, basis: &BasisSpec, spectrum: &RotorSpectrum) -> Result<f64> {
    let fwhm = match train.shape {
        PulseShape::Gaussian { fwhm } => fwhm,
        PulseShape::Delta => return Err(Error::InvalidTrain("delta pulses need no step size".into())),
    };
    let spread = max_coupled_spacing(&spectrum.levels(basis)?);
    Ok((fwhm / MIN_STEPS_PER_FWHM).min(0.9 * MAX_PHASE_STEP / spread))
}

fn integrate_pulse(block: &mut SplitBlock, schedule: &PulseSchedule, levels: &[f64], kick: &KickPropagator) {
    let lead = free_phases(levels, schedule.lead);
    let half = free_phases(levels, 0.5 * schedule.dt);
    block.rotate_rows(&lead);
    for &dp in &schedule.increments {
        block.rotate_rows(&half);
        kick.apply_block(dp, block);
        block.rotate_rows(&half);
    }
    block.rotate_rows(&lead);
}

/// One period with a finite Gaussian pulse centred at mid-period.
pub fn finite_pulse_cycle(psi: &WaveFunction, train: &PulseTrainSpec, spectrum: &RotorSpectrum, dt: f64) -> Result<WaveFunction> {
    let levels = spectrum.levels(&psi.basis)?;
    let schedule = PulseSchedule::new(train, &levels, dt)?;
    let kick = KickPropagator::new(&cos2_matrix(&psi.basis))?;
    let mut block = SplitBlock::from_vector(&psi.coeffs);
    integrate_pulse(&mut block, &schedule, &levels, &kick);
    Ok(WaveFunction {
        coeffs: block.to_complex().column(0).into_owned(),
        basis: psi.basis,
        time: psi.time + train.period(),
    })
}

/// One-cycle operator for a finite Gaussian pulse.
pub fn finite_pulse_operator(train: &PulseTrainSpec, basis: &BasisSpec, spectrum: &RotorSpectrum, dt: f64) -> Result<OneCycleOperator> {
    let levels = spectrum.levels(basis)?;
    let schedule = PulseSchedule::new(train, &levels, dt)?;
    let kick = KickPropagator::new(&cos2_matrix(basis))?;
    let mut block = SplitBlock::identity(basis.dim());
    integrate_pulse(&mut block, &schedule, &levels, &kick);
    Ok(OneCycleOperator { matrix: block.to_complex(), train: *train, basis: *basis, spectrum: *spectrum })
}

/// One-cycle operator for either pulse shape, with the default step for finite pulses.
pub fn cycle_operator(train: &PulseTrainSpec, basis: &BasisSpec, spectrum: &RotorSpectrum) -> Result<OneCycleOperator> {
    match train.shape {
        PulseShape::Delta => one_cycle_operator(train, basis, spectrum),
        PulseShape::Gaussian { .. } => {
            let dt = default_pulse_step(train, basis, spectrum)?;
            finite_pulse_operator(train, basis, spectrum, dt)
        }
    }
}

/// Applies `op` `pulses` times, returning the state at every cycle boundary.
pub fn propagate_with(op: &OneCycleOperator, psi0: &WaveFunction, pulses: usize) -> Result<Vec<WaveFunction>> {
    if psi0.basis != op.basis {
        return Err(Error::InvalidState(format!("state on {} but operator on {}", psi0.basis, op.basis)));
    }
    let norm = psi0.norm_squared();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidState(format!("initial state is not normalized (Σ|C|² = {norm})")));
    }
    let top = psi0.top_population();
    if top > TRUNCATION_GUARD {
        return Err(Error::TruncationGuard { cycle: 0, population: top });
    }
    let mut out = Vec::with_capacity(pulses + 1);
    out.push(psi0.clone());
    for cycle in 1..=pulses {
        let next = op.apply(out.last().expect("non-empty"));
        let top = next.top_population();
        if top > TRUNCATION_GUARD {
            return Err(Error::TruncationGuard { cycle, population: top });
        }
        out.push(next);
    }
    Ok(out)
}

/// N+1 snapshots of the state at the cycle boundaries of the train.
pub fn propagate_train(psi0: &WaveFunction, train: &PulseTrainSpec, spectrum: &RotorSpectrum) -> Result<Vec<WaveFunction>> {
    let op = cycle_operator(train, &psi0.basis, spectrum)?;
    propagate_with(&op, psi0, train.pulses)
}

/// P = (Δα/4ħ)∫ℰ²dt for a Gaussian intensity envelope.
///
/// `peak_intensity` is the cycle-averaged peak intensity in W/cm², `fwhm` the
/// intensity FWHM in seconds. The field envelope ℰ relates to intensity via
/// I = cε₀ℰ²/2, which with α = 4πε₀Δα gives P = 2πΔα∫I dt/(ħc).
pub fn kick_strength_from_pulse(bridge: &UnitBridge, peak_intensity: f64, fwhm: f64) -> Result<f64> {
    let delta_alpha = bridge
        .polarizability_anisotropy
        .ok_or_else(|| Error::Missing("polarizability anisotropy (Δα) is required to convert pulse energy".into()))?;
    if !(peak_intensity >= 0.0 && peak_intensity.is_finite()) {
        return Err(Error::InvalidTrain(format!("peak intensity {peak_intensity} must be ≥ 0")));
    }
    if !(fwhm > 0.0 && fwhm.is_finite()) {
        return Err(Error::InvalidTrain(format!("pulse FWHM {fwhm} must be positive")));
    }
    Ok(delta_alpha * fluence_factor(peak_intensity, fwhm))
}

/// Δα in Å³ that yields kick strength `p` for the given pulse.
pub fn polarizability_for_kick(p: f64, peak_intensity: f64, fwhm: f64) -> f64 {
    p / fluence_factor(peak_intensity, fwhm)
}

fn fluence_factor(peak_intensity: f64, fwhm: f64) -> f64 {
    const C_SI: f64 = 2.997_924_58e8;
    let fluence = peak_intensity * 1e4 * fwhm * (PI / (4.0 * std::f64::consts::LN_2)).sqrt();
    2.0 * PI * 1e-30 * fluence / (HBAR * C_SI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Parity;
    use approx::assert_abs_diff_eq;

    fn basis(j_max: u32) -> BasisSpec {
        BasisSpec::new(0, Parity::Even, j_max).unwrap()
    }

    #[test]
    fn tau_fraction_parsing() {
        let t: TauFraction = "1/3".parse().unwrap();
        assert_eq!((t.p(), t.q()), (1, 3));
        assert_eq!("1".parse::<TauFraction>().unwrap(), TauFraction::new(1, 1).unwrap());
        assert!("2/4".parse::<TauFraction>().is_err());
        assert!("0/3".parse::<TauFraction>().is_err());
        assert!("x/3".parse::<TauFraction>().is_err());
        assert_abs_diff_eq!(t.period(), 2.0 * PI / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn train_validation() {
        let tau = TauFraction::new(1, 3).unwrap();
        assert!(PulseTrainSpec::delta(-1.0, tau, 3).is_err());
        assert!(PulseTrainSpec::delta(1.0, tau, 0).is_err());
        assert!(PulseTrainSpec::new(1.0, tau, 1, PulseShape::Gaussian { fwhm: 0.0 }).is_err());
    }

    #[test]
    fn zero_kick_is_identity() {
        let c = cos2_matrix(&basis(80));
        let k = kick_operator(0.0, &c).unwrap();
        assert!((k - DMatrix::identity(c.dim(), c.dim())).camax() < 1e-14);
    }

    #[test]
    fn weak_kick_taylor_expansion() {
        let p = 1e-3;
        let k = kick_operator(p, &cos2_matrix(&basis(80))).unwrap();
        let expected = Complex64::new(1.0, p / 3.0);
        assert!((k[(0, 0)] - expected).norm() < 1e-6);
    }

    #[test]
    fn strong_kick_is_unitary() {
        for b in [basis(120), BasisSpec::new(5, Parity::Odd, 200).unwrap()] {
            let k = kick_operator(10.0, &cos2_matrix(&b)).unwrap();
            let gram = k.adjoint() * &k - DMatrix::identity(b.dim(), b.dim());
            assert!(gram.camax() < 1e-12);
        }
    }

    #[test]
    fn zero_kick_cycle_is_free_evolution() {
        let b = basis(100);
        let tau = TauFraction::new(1, 3).unwrap();
        let train = PulseTrainSpec::delta(0.0, tau, 1).unwrap();
        let u = one_cycle_operator(&train, &b, &RotorSpectrum::rigid()).unwrap();
        for (i, j) in b.js().enumerate() {
            let expected = RotorSpectrum::rigid().phase_at_fraction(j, 1, 3);
            assert!((u.matrix()[(i, i)] - expected).norm() < 1e-12);
        }
        assert!(u.matrix().iter().enumerate().all(|(k, z)| k % (b.dim() + 1) == 0 || z.norm() == 0.0));
        let weak = one_cycle_operator(&PulseTrainSpec::delta(1e-9, tau, 1).unwrap(), &b, &RotorSpectrum::rigid()).unwrap();
        assert!((weak.matrix() - u.matrix()).camax() < 1e-9);
    }

    #[test]
    fn full_resonance_cycle_equals_kick() {
        let b = basis(100);
        let train = PulseTrainSpec::delta(3.0, TauFraction::new(1, 1).unwrap(), 1).unwrap();
        let u = one_cycle_operator(&train, &b, &RotorSpectrum::rigid()).unwrap();
        // the half-period phases are (−1)^{J(J+1)/2}, so U = D·K·D with D² = 1
        let mut k = kick_operator(3.0, &cos2_matrix(&b)).unwrap();
        let sign = |i: usize| if (b.j(i) * (b.j(i) + 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
        for r in 0..b.dim() {
            for c in 0..b.dim() {
                k[(r, c)] *= sign(r) * sign(c);
            }
        }
        assert!((u.matrix() - k).camax() < 1e-11);
    }

    #[test]
    fn interior_unitarity() {
        let b = basis(200);
        let train = PulseTrainSpec::delta(10.0, TauFraction::new(1, 3).unwrap(), 1).unwrap();
        let u = one_cycle_operator(&train, &b, &RotorSpectrum::rigid()).unwrap();
        assert!(u.interior_unitarity_residual() < 1e-10);
        u.check_unitarity(1e-10).unwrap();
    }

    #[test]
    fn free_revival_is_identity() {
        let b = basis(300);
        let mut coeffs = DVector::from_fn(b.dim(), |i, _| Complex64::new((i as f64).cos(), (0.3 * i as f64).sin()));
        coeffs /= Complex64::new(coeffs.norm(), 0.0);
        let psi = WaveFunction::from_coeffs(&b, coeffs, 0.0).unwrap();
        let back = free_evolution(&psi, &RotorSpectrum::rigid(), REVIVAL_TIME).unwrap();
        assert!((back.coeffs() - psi.coeffs()).camax() < 1e-13);
    }

    #[test]
    fn inverse_cycle_restores_state() {
        let b = basis(150);
        let train = PulseTrainSpec::delta(5.0, TauFraction::new(2, 5).unwrap(), 1).unwrap();
        let u = one_cycle_operator(&train, &b, &RotorSpectrum::rigid()).unwrap();
        let psi = WaveFunction::basis_state(&b, 10).unwrap();
        let back = u.apply_inverse(&u.apply(&psi));
        assert!((back.coeffs() - psi.coeffs()).norm() < 1e-10);
    }

    #[test]
    fn guard_aborts_with_cycle_index() {
        let b = basis(60);
        let train = PulseTrainSpec::delta(10.0, TauFraction::new(1, 1).unwrap(), 30).unwrap();
        let psi = WaveFunction::basis_state(&b, 0).unwrap();
        match propagate_train(&psi, &train, &RotorSpectrum::rigid()) {
            Err(Error::TruncationGuard { cycle, population }) => {
                assert!(cycle >= 1 && cycle <= 30);
                assert!(population > TRUNCATION_GUARD);
            }
            other => panic!("expected a guard violation, got {other:?}"),
        }
        let top = WaveFunction::basis_state(&b, 60).unwrap();
        assert!(matches!(
            propagate_train(&top, &train, &RotorSpectrum::rigid()),
            Err(Error::TruncationGuard { cycle: 0, .. })
        ));
    }

    #[test]
    fn pulse_schedule_reproduces_kick_strength() {
        let b = basis(60);
        let levels = RotorSpectrum::rigid().levels(&b).unwrap();
        let train = PulseTrainSpec::new(3.0, TauFraction::new(1, 3).unwrap(), 1, PulseShape::Gaussian { fwhm: 0.02 }).unwrap();
        let s = PulseSchedule::new(&train, &levels, 0.02 / 64.0).unwrap();
        assert!((s.total_kick() - 3.0).abs() / 3.0 < 1e-6);
        assert!(PulseSchedule::new(&train, &levels, 0.02 / 32.0).is_err());
        let coarse_grid = basis(2000);
        let levels = RotorSpectrum::rigid().levels(&coarse_grid).unwrap();
        assert!(matches!(PulseSchedule::new(&train, &levels, 0.02 / 64.0), Err(Error::StepSize(_))));
    }

    #[test]
    fn zero_envelope_is_free_evolution() {
        let b = basis(60);
        let train = PulseTrainSpec::new(0.0, TauFraction::new(1, 3).unwrap(), 1, PulseShape::Gaussian { fwhm: 0.01 }).unwrap();
        let mut coeffs = DVector::from_fn(b.dim(), |i, _| Complex64::new(1.0 / (1.0 + i as f64), 0.1 * i as f64));
        coeffs /= Complex64::new(coeffs.norm(), 0.0);
        let psi = WaveFunction::from_coeffs(&b, coeffs, 0.0).unwrap();
        let out = finite_pulse_cycle(&psi, &train, &RotorSpectrum::rigid(), 0.01 / 64.0).unwrap();
        let free = free_evolution(&psi, &RotorSpectrum::rigid(), train.period()).unwrap();
        assert!((out.coeffs() - free.coeffs()).norm() < 1e-12);
    }

    #[test]
    fn kick_strength_scaling() {
        let bridge = UnitBridge::new(0.1141, 0.0, Some(6.0)).unwrap();
        assert_eq!(kick_strength_from_pulse(&bridge, 0.0, 500e-15).unwrap(), 0.0);
        let p1 = kick_strength_from_pulse(&bridge, 1.5e12, 500e-15).unwrap();
        let p2 = kick_strength_from_pulse(&bridge, 3.0e12, 500e-15).unwrap();
        assert_abs_diff_eq!(p2, 2.0 * p1, epsilon = 1e-12);
        let no_alpha = UnitBridge::new(0.1141, 0.0, None).unwrap();
        assert!(matches!(kick_strength_from_pulse(&no_alpha, 1e12, 1e-13), Err(Error::Missing(_))));
        let da = polarizability_for_kick(10.0, 1.5e12, 500e-15);
        let bridge = UnitBridge::new(0.1141, 0.0, Some(da)).unwrap();
        assert_abs_diff_eq!(kick_strength_from_pulse(&bridge, 1.5e12, 500e-15).unwrap(), 10.0, epsilon = 1e-12);
    }
}
