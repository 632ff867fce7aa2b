//! Populations, energy, alignment and thermal averages.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::basis::{BasisSpec, Parity, RotorSpectrum, UnitBridge, BOLTZMANN};
use crate::coupling::{cos2_matrix, CouplingMatrix};
use crate::error::{Error, Result};
use crate::propagation::{cycle_operator, propagate_with, PulseTrainSpec, WaveFunction};

/// Relative Boltzmann weight below which thermal members are dropped.
pub const THERMAL_CUTOFF: f64 = 1e-6;
/// Default oversampling factor relative to the Nyquist rate.
pub const DEFAULT_OVERSAMPLING: usize = 4;
/// Amplitude products below this do not count as a populated beat.
const BEAT_THRESHOLD: f64 = 1e-12;

/// |C_J|² on the basis grid.
pub fn populations(psi: &WaveFunction) -> Vec<f64> {
    psi.coeffs().iter().map(|c| c.norm_sqr()).collect()
}

/// Populations on the full axis J = 0..=j_axis_max, zero where the basis has no level.
pub fn populations_on_axis(psi: &WaveFunction, j_axis_max: u32) -> Result<Vec<f64>> {
    let basis = psi.basis();
    if basis.j_top() > j_axis_max {
        return Err(Error::IncompatibleGrids(format!("{basis} exceeds the axis J ≤ {j_axis_max}")));
    }
    let mut out = vec![0.0; j_axis_max as usize + 1];
    for (j, p) in basis.js().zip(populations(psi)) {
        out[j as usize] = p;
    }
    Ok(out)
}

/// Total population with J ≤ `j_cut`.
pub fn population_up_to(psi: &WaveFunction, j_cut: u32) -> f64 {
    psi.basis().js().zip(psi.coeffs().iter()).filter(|(j, _)| *j <= j_cut).map(|(_, c)| c.norm_sqr()).sum()
}

/// Population-weighted mean J.
pub fn mean_j(psi: &WaveFunction) -> f64 {
    psi.basis().js().zip(psi.coeffs().iter()).map(|(j, c)| j as f64 * c.norm_sqr()).sum()
}

/// Largest J whose population exceeds `threshold`.
pub fn support_edge(psi: &WaveFunction, threshold: f64) -> Option<u32> {
    psi.basis().js().zip(psi.coeffs().iter()).filter(|(_, c)| c.norm_sqr() > threshold).map(|(j, _)| j).last()
}

/// Σ_J E_J |C_J|².
pub fn rotational_energy(psi: &WaveFunction, spectrum: &RotorSpectrum) -> Result<f64> {
    let levels = spectrum.levels(psi.basis())?;
    Ok(levels.iter().zip(psi.coeffs().iter()).map(|(e, c)| e * c.norm_sqr()).sum())
}

/// ⟨ψ|cos²θ|ψ⟩.
pub fn alignment_expectation(psi: &WaveFunction, coupling: &CouplingMatrix) -> Result<f64> {
    if coupling.basis() != psi.basis() {
        return Err(Error::IncompatibleGrids(format!("state on {} but coupling on {}", psi.basis(), coupling.basis())));
    }
    let c = psi.coeffs().as_slice();
    let diag: f64 = coupling.diag().iter().zip(c).map(|(d, a)| d * a.norm_sqr()).sum();
    let off: f64 = coupling.offdiag().iter().zip(c.windows(2)).map(|(o, w)| o * (w[0].conj() * w[1]).re).sum();
    Ok(diag + 2.0 * off)
}

#[derive(Debug, Clone)]
pub struct AlignmentTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Pulses applied before sampling started.
    pub start_pulse: usize,
}

impl AlignmentTrace {
    pub fn step(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn window(&self) -> f64 {
        self.step() * self.times.len() as f64
    }
}

/// Highest angular beat frequency E_{J+2} − E_J between two populated levels.
pub fn highest_beat(psi: &WaveFunction, spectrum: &RotorSpectrum) -> Result<f64> {
    let levels = spectrum.levels(psi.basis())?;
    let c = psi.coeffs();
    Ok((0..c.len().saturating_sub(1))
        .filter(|&i| c[i].norm() * c[i + 1].norm() > BEAT_THRESHOLD)
        .map(|i| levels[i + 1] - levels[i])
        .fold(0.0, f64::max))
}

/// Minimum sample count over `window` that resolves every beat of `psi`.
pub fn nyquist_samples(psi: &WaveFunction, spectrum: &RotorSpectrum, window: f64) -> Result<usize> {
    Ok((window * highest_beat(psi, spectrum)? / PI).ceil() as usize + 1)
}

/// Samples ⟨cos²θ⟩ under free evolution of `psi` on `samples` points spanning `window`.
pub fn alignment_trace(
    psi: &WaveFunction,
    spectrum: &RotorSpectrum,
    coupling: &CouplingMatrix,
    window: f64,
    samples: usize,
    start_pulse: usize,
) -> Result<AlignmentTrace> {
    if !(window > 0.0) || samples < 2 {
        return Err(Error::Nyquist { samples, required: 2 });
    }
    let required = nyquist_samples(psi, spectrum, window)?;
    if samples < required {
        return Err(Error::Nyquist { samples, required });
    }
    if coupling.basis() != psi.basis() {
        return Err(Error::IncompatibleGrids(format!("state on {} but coupling on {}", psi.basis(), coupling.basis())));
    }
    let levels = spectrum.levels(psi.basis())?;
    let c = psi.coeffs().as_slice();
    let static_part: f64 = coupling.diag().iter().zip(c).map(|(d, a)| d * a.norm_sqr()).sum();
    let beats: Vec<(f64, Complex64)> = coupling
        .offdiag()
        .iter()
        .enumerate()
        .map(|(i, o)| (levels[i] - levels[i + 1], c[i].conj() * c[i + 1] * 2.0 * *o))
        .collect();
    let dt = window / samples as f64;
    let times: Vec<f64> = (0..samples).map(|k| psi.time() + k as f64 * dt).collect();
    let values = (0..samples)
        .map(|k| {
            let t = k as f64 * dt;
            static_part + beats.iter().map(|(w, a)| (a * Complex64::from_polar(1.0, w * t)).re).sum::<f64>()
        })
        .collect();
    Ok(AlignmentTrace { times, values, start_pulse })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyUnit {
    /// Angular frequency in inverse reduced time.
    Reduced,
    Wavenumber,
}

impl FrequencyUnit {
    pub fn label(&self) -> &'static str {
        match self {
            FrequencyUnit::Reduced => "reduced angular frequency",
            FrequencyUnit::Wavenumber => "cm^-1",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlignmentSpectrum {
    /// Non-negative frequencies, one per DFT bin up to Nyquist.
    pub frequencies: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub unit: FrequencyUnit,
    /// Σ x² of the windowed, mean-subtracted trace.
    pub signal_energy: f64,
    samples: usize,
}

impl AlignmentSpectrum {
    /// Σ|X_k|² over the full two-sided transform.
    pub fn spectral_energy(&self) -> f64 {
        let n = self.samples;
        self.magnitudes
            .iter()
            .enumerate()
            .map(|(k, m)| if k == 0 || (n % 2 == 0 && k == n / 2) { m * m } else { 2.0 * m * m })
            .sum()
    }

    /// Magnitude-weighted mean frequency within [lo, hi).
    pub fn centroid(&self, lo: f64, hi: f64) -> Option<f64> {
        let (num, den) = self
            .frequencies
            .iter()
            .zip(&self.magnitudes)
            .filter(|(f, _)| (lo..hi).contains(*f))
            .fold((0.0, 0.0), |(n, d), (f, m)| (n + f * m, d + m));
        (den > 0.0).then(|| num / den)
    }
}

/// Windowed DFT magnitude of the alignment trace with the mean removed.
///
/// `broadening` is the FWHM of the Gaussian line shape, in cm⁻¹ when a bridge
/// is supplied and in reduced angular frequency otherwise.
pub fn alignment_spectrum(trace: &AlignmentTrace, broadening: f64, bridge: Option<&UnitBridge>) -> Result<AlignmentSpectrum> {
    let n = trace.values.len();
    if n < 2 {
        return Err(Error::Nyquist { samples: n, required: 2 });
    }
    let dt = trace.step();
    if trace.times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0)) {
        return Err(Error::IncompatibleGrids("alignment trace is not uniformly sampled".into()));
    }
    let (scale, unit) = match bridge {
        Some(b) => (b.energy_unit_cm(), FrequencyUnit::Wavenumber),
        None => (1.0, FrequencyUnit::Reduced),
    };
    let reduced_broadening = broadening / scale;
    let limit = 2.0 / trace.window();
    if !(reduced_broadening >= limit) {
        return Err(Error::Unresolvable { broadening, limit: limit * scale });
    }
    let sigma = 2.0 * (2.0 * LN_2).sqrt() / reduced_broadening;
    let centre = 0.5 * (n - 1) as f64 * dt;
    let reference = trace.values[0];
    let mean = reference + trace.values.iter().map(|v| v - reference).sum::<f64>() / n as f64;
    let mut buffer: Vec<Complex64> = trace
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let t = k as f64 * dt - centre;
            Complex64::new((v - mean) * (-0.5 * (t / sigma).powi(2)).exp(), 0.0)
        })
        .collect();
    let signal_energy = buffer.iter().map(|c| c.norm_sqr()).sum();
    FftPlanner::new().plan_fft_forward(n).process(&mut buffer);
    let norm = 1.0 / (n as f64).sqrt();
    let bins = n / 2 + 1;
    let df = 2.0 * PI / (n as f64 * dt) * scale;
    Ok(AlignmentSpectrum {
        frequencies: (0..bins).map(|k| k as f64 * df).collect(),
        magnitudes: buffer[..bins].iter().map(|c| c.norm() * norm).collect(),
        unit,
        signal_energy,
        samples: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleMember {
    pub j0: u32,
    pub m: i32,
    pub parity: Parity,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct ThermalEnsemble {
    pub members: Vec<EnsembleMember>,
    pub temperature: f64,
    pub spectrum: RotorSpectrum,
}

impl ThermalEnsemble {
    pub fn max_j0(&self) -> u32 {
        self.members.iter().map(|m| m.j0).max().unwrap_or(0)
    }

    /// Mean initial J.
    pub fn mean_j0(&self) -> f64 {
        self.members.iter().map(|m| m.weight * m.j0 as f64).sum()
    }
}

/// Boltzmann ensemble over |J₀, M⟩ with a 10⁻⁶ relative weight cutoff.
pub fn thermal_ensemble(temperature: f64, bridge: &UnitBridge, spectrum: &RotorSpectrum) -> Result<ThermalEnsemble> {
    if !(temperature >= 0.0) || !temperature.is_finite() {
        return Err(Error::Temperature(temperature));
    }
    if temperature == 0.0 {
        let ground = EnsembleMember { j0: 0, m: 0, parity: Parity::Even, weight: 1.0 };
        return Ok(ThermalEnsemble { members: vec![ground], temperature, spectrum: *spectrum });
    }
    let beta = bridge.energy_unit_joule() / (BOLTZMANN * temperature);
    // per-member factors are non-increasing in J while the ladder is monotone
    let mut factors = Vec::new();
    let mut j = 0u32;
    loop {
        spectrum.check_grid(j + 1)?;
        let f = (-beta * (spectrum.energy(j) - spectrum.energy(0))).exp();
        if f < 1e-30 {
            break;
        }
        factors.push(f);
        j += 1;
    }
    let z: f64 = factors.iter().enumerate().map(|(j, f)| (2 * j + 1) as f64 * f).sum();
    let kept: Vec<(u32, f64)> = factors.iter().enumerate().filter(|(_, f)| **f / z >= THERMAL_CUTOFF).map(|(j, f)| (j as u32, *f)).collect();
    let kept_z: f64 = kept.iter().map(|(j, f)| (2 * j + 1) as f64 * f).sum();
    let members = kept
        .iter()
        .flat_map(|&(j0, f)| {
            (-(j0 as i32)..=j0 as i32).map(move |m| EnsembleMember { j0, m, parity: Parity::of(j0), weight: f / kept_z })
        })
        .collect();
    Ok(ThermalEnsemble { members, temperature, spectrum: *spectrum })
}

/// Weighted sum of per-member sequences, accumulated in member order.
pub fn ensemble_average(ensemble: &ThermalEnsemble, per_member: &[Vec<f64>]) -> Result<Vec<f64>> {
    if per_member.len() != ensemble.members.len() {
        return Err(Error::IncompatibleGrids(format!(
            "{} member sequences for {} ensemble members",
            per_member.len(),
            ensemble.members.len()
        )));
    }
    let len = per_member.first().map(Vec::len).unwrap_or(0);
    if per_member.iter().any(|s| s.len() != len) {
        return Err(Error::IncompatibleGrids("member sequences differ in length".into()));
    }
    let mut out = vec![0.0; len];
    for (member, seq) in ensemble.members.iter().zip(per_member) {
        for (o, v) in out.iter_mut().zip(seq) {
            *o += member.weight * v;
        }
    }
    Ok(out)
}

/// Basis on which a member is propagated; the kick depends on M only through M².
pub fn member_basis(member: &EnsembleMember, j_max: u32) -> Result<BasisSpec> {
    BasisSpec::new(member.m.abs(), member.parity, j_max)
}

/// Trajectories of every ensemble member through a pulse train.
#[derive(Debug, Clone)]
pub struct EnsembleDynamics {
    pub ensemble: ThermalEnsemble,
    /// Snapshots after 0..=N pulses, per member in ensemble order.
    pub trajectories: Vec<Vec<WaveFunction>>,
    pub j_axis_max: u32,
}

impl EnsembleDynamics {
    pub fn pulses(&self) -> usize {
        self.trajectories.first().map(|t| t.len() - 1).unwrap_or(0)
    }

    /// Thermally averaged populations on J = 0..=j_axis_max after `pulse` pulses.
    pub fn populations(&self, pulse: usize) -> Result<Vec<f64>> {
        let per_member = self
            .trajectories
            .iter()
            .map(|t| populations_on_axis(&t[pulse], self.j_axis_max))
            .collect::<Result<Vec<_>>>()?;
        ensemble_average(&self.ensemble, &per_member)
    }

    pub fn mean_j(&self, pulse: usize) -> Result<f64> {
        Ok(self.populations(pulse)?.iter().enumerate().map(|(j, p)| j as f64 * p).sum())
    }

    /// Thermally averaged alignment trace after `pulse` pulses.
    pub fn alignment_trace(&self, pulse: usize, window: f64, samples: usize) -> Result<AlignmentTrace> {
        let traces = self
            .trajectories
            .par_iter()
            .map(|t| {
                let psi = &t[pulse];
                let relative = WaveFunction::from_coeffs(psi.basis(), psi.coeffs().clone(), 0.0)?;
                alignment_trace(&relative, &self.ensemble.spectrum, &cos2_matrix(psi.basis()), window, samples, pulse)
            })
            .collect::<Result<Vec<_>>>()?;
        let values = ensemble_average(&self.ensemble, &traces.iter().map(|t| t.values.clone()).collect::<Vec<_>>())?;
        Ok(AlignmentTrace { times: traces[0].times.clone(), values, start_pulse: pulse })
    }

    /// Nyquist sample count for the thermally averaged trace after `pulse` pulses.
    pub fn nyquist_samples(&self, pulse: usize, window: f64) -> Result<usize> {
        self.trajectories
            .iter()
            .map(|t| nyquist_samples(&t[pulse], &self.ensemble.spectrum, window))
            .try_fold(2, |acc, r| r.map(|n| acc.max(n)))
    }
}

/// Propagates every member, sharing one cycle operator per (|M|, parity).
pub fn propagate_ensemble(ensemble: &ThermalEnsemble, train: &PulseTrainSpec, j_max: u32) -> Result<EnsembleDynamics> {
    let mut groups: BTreeMap<(i32, bool), Vec<usize>> = BTreeMap::new();
    for (k, m) in ensemble.members.iter().enumerate() {
        groups.entry((m.m.abs(), m.parity == Parity::Odd)).or_default().push(k);
    }
    let results = groups
        .into_par_iter()
        .map(|(_, idx)| {
            let basis = member_basis(&ensemble.members[idx[0]], j_max)?;
            let op = cycle_operator(train, &basis, &ensemble.spectrum)?;
            idx.into_iter()
                .map(|k| {
                    let psi0 = WaveFunction::basis_state(&basis, ensemble.members[k].j0)?;
                    Ok((k, propagate_with(&op, &psi0, train.pulses)?))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut trajectories: Vec<Option<Vec<WaveFunction>>> = vec![None; ensemble.members.len()];
    for (k, t) in results.into_iter().flatten() {
        trajectories[k] = Some(t);
    }
    Ok(EnsembleDynamics {
        ensemble: ensemble.clone(),
        trajectories: trajectories.into_iter().map(|t| t.expect("every member propagated")).collect(),
        j_axis_max: j_max,
    })
}
