//! Scenario runner behind the `rotor-floquet` binary.
//!
//! A run is resolved from its [`RunConfig`], computed in full, and only then
//! written out, so a failing run leaves no partial output behind.

pub mod config;

use std::f64::consts::{LN_2, PI};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::basis::{BasisSpec, Parity, RotorSpectrum, UnitBridge};
use crate::coupling::cos2_matrix;
use crate::floquet::{
    classify_edge_states, edge_overlap, planar_reference_spectrum, quasienergy_decomposition, spectrum_scan, QuasienergySet,
};
use crate::observables::{
    alignment_spectrum, alignment_trace, nyquist_samples, populations_on_axis, propagate_ensemble, thermal_ensemble,
    AlignmentSpectrum, AlignmentTrace,
};
use crate::propagation::{cycle_operator, kick_strength_from_pulse, propagate_with, PulseShape, PulseTrainSpec, TauFraction, WaveFunction};
pub use config::{RunConfig, Scenario};
use config::{ParityChoice, ShapeChoice};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 1;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const TIMING_FILE: &str = "timing.toml";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("cannot parse config {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Library(#[from] crate::Error),

    #[error("{failed} of {total} scan points failed; see scan_failures.csv")]
    ScanFailures { failed: usize, total: usize },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Parse { .. } => EXIT_CONFIG,
            CliError::Library(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Library(_) => EXIT_CONFIG,
            CliError::ScanFailures { .. } => EXIT_NUMERICAL,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

fn config_error(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config { key: key.into(), message: message.into() }
}

/// Reads a TOML run configuration.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    toml::from_str(&text).map_err(|e| CliError::Parse { path: path.into(), message: e.to_string() })
}

/// Fully validated run parameters.
#[derive(Debug, Clone)]
struct Plan {
    scenario: Scenario,
    output: PathBuf,
    blocks: Vec<Parity>,
    m: i32,
    j_max: u32,
    kick_strengths: Vec<f64>,
    tau: TauFraction,
    pulses: usize,
    shape: PulseShape,
    spectrum: RotorSpectrum,
    bridge: Option<UnitBridge>,
    temperature: Option<f64>,
}

impl Plan {
    fn basis(&self, parity: Parity) -> Result<BasisSpec, CliError> {
        BasisSpec::new(self.m, parity, self.j_max).map_err(|e| config_error("basis", e.to_string()))
    }

    fn train(&self, kick_strength: f64) -> Result<PulseTrainSpec, CliError> {
        PulseTrainSpec::new(kick_strength, self.tau, self.pulses, self.shape).map_err(|e| config_error("train", e.to_string()))
    }

    fn single_kick(&self) -> f64 {
        self.kick_strengths[0]
    }
}

fn resolve(cfg: &RunConfig) -> Result<Plan, CliError> {
    let scenario = cfg.scenario.ok_or_else(|| config_error("scenario", "no scenario given"))?;
    let output = cfg.output.clone().ok_or_else(|| config_error("output", "no output directory given"))?;
    let tau: TauFraction = cfg.train.tau.parse().map_err(|e: crate::Error| config_error("train.tau", e.to_string()))?;
    if cfg.train.pulses == 0 {
        return Err(config_error("train.pulses", "must be at least 1"));
    }

    let bridge = cfg
        .molecule
        .map(|m| UnitBridge::new(m.b_cm, m.d_cm, m.delta_alpha_a3))
        .transpose()
        .map_err(|e| config_error("molecule", e.to_string()))?;
    let spectrum = match (&bridge, cfg.rotor.eps) {
        (Some(_), Some(_)) => return Err(config_error("rotor.eps", "give either rotor.eps or [molecule], not both")),
        (Some(b), None) => b.spectrum().map_err(|e| config_error("molecule", e.to_string()))?,
        (None, Some(eps)) => RotorSpectrum::with_centrifugal(eps).map_err(|e| config_error("rotor.eps", e.to_string()))?,
        (None, None) => RotorSpectrum::rigid(),
    };

    let fwhm_seconds = cfg.train.fwhm_fs.map(|fs| fs * 1e-15);
    let shape = match cfg.train.shape {
        ShapeChoice::Delta => PulseShape::Delta,
        ShapeChoice::Gaussian => {
            let fwhm = match (cfg.train.fwhm, fwhm_seconds, &bridge) {
                (Some(f), None, _) => f,
                (None, Some(s), Some(b)) => b.to_reduced_time(s),
                (None, Some(_), None) => return Err(config_error("train.fwhm_fs", "needs [molecule] to convert to reduced time")),
                (Some(_), Some(_), _) => return Err(config_error("train.fwhm", "give either train.fwhm or train.fwhm_fs, not both")),
                (None, None, _) => return Err(config_error("train.fwhm", "gaussian pulses need a FWHM")),
            };
            PulseShape::Gaussian { fwhm }
        }
    };

    let kick_strengths = resolve_kicks(cfg, bridge.as_ref(), fwhm_seconds)?;
    let (key, needs) = kick_key(cfg);
    match scenario {
        Scenario::States | Scenario::Dynamics | Scenario::AlignmentFt if kick_strengths.len() != 1 => {
            return Err(config_error(key, format!("{} needs exactly one kick strength, got {}", scenario.name(), kick_strengths.len())));
        }
        Scenario::SpectrumScan if kick_strengths.len() < 2 => {
            return Err(config_error(key, format!("spectrum-scan needs at least 2 kick strengths, got {}", kick_strengths.len())));
        }
        _ if kick_strengths.is_empty() => return Err(config_error(key, format!("{needs} is empty"))),
        _ => {}
    }
    if kick_strengths.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(config_error(key, "kick strengths must be strictly ascending"));
    }
    if kick_strengths.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(config_error(key, "kick strengths must be finite and ≥ 0"));
    }
    if scenario == Scenario::SpectrumScan && shape != PulseShape::Delta {
        return Err(config_error("train.shape", "spectrum-scan supports delta kicks only"));
    }

    if let Some(t) = cfg.temperature {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(config_error("temperature", format!("{t} K is not a valid temperature")));
        }
        if bridge.is_none() {
            return Err(config_error("molecule", "a thermal ensemble needs molecular constants"));
        }
    }

    let plan = Plan {
        scenario,
        output,
        blocks: cfg.basis.parity.blocks(),
        m: cfg.basis.m,
        j_max: cfg.basis.j_max,
        kick_strengths,
        tau,
        pulses: cfg.train.pulses,
        shape,
        spectrum,
        bridge,
        temperature: cfg.temperature,
    };
    for &parity in &plan.blocks {
        plan.basis(parity)?;
    }
    if plan.scenario != Scenario::PlanarRef {
        plan.spectrum.check_grid(plan.j_max).map_err(|e| config_error("basis.j_max", e.to_string()))?;
    }
    check_sampling(cfg, &plan)?;
    Ok(plan)
}

fn kick_key(cfg: &RunConfig) -> (&'static str, &'static str) {
    if cfg.train.kick_grid.is_some() {
        ("train.kick_grid", "kick grid")
    } else if cfg.train.peak_intensity.is_some() {
        ("train.peak_intensity", "kick strength")
    } else if cfg.train.kick_strength.is_some() {
        ("train.kick_strength", "kick strength")
    } else {
        ("train.kick_strengths", "kick-strength grid")
    }
}

fn resolve_kicks(cfg: &RunConfig, bridge: Option<&UnitBridge>, fwhm_seconds: Option<f64>) -> Result<Vec<f64>, CliError> {
    let t = &cfg.train;
    let given = [t.kick_strength.is_some(), t.kick_strengths.is_some(), t.kick_grid.is_some(), t.peak_intensity.is_some()];
    match given.iter().filter(|&&g| g).count() {
        0 => return Err(config_error("train.kick_strength", "no kick strength given")),
        1 => {}
        _ => {
            return Err(config_error(
                "train",
                "give exactly one of kick_strength, kick_strengths, kick_grid, peak_intensity",
            ))
        }
    }
    if let Some(p) = t.kick_strength {
        return Ok(vec![p]);
    }
    if let Some(ps) = &t.kick_strengths {
        return Ok(ps.clone());
    }
    if let Some(g) = t.kick_grid {
        if !(g.step > 0.0 && g.step.is_finite() && g.stop >= g.start) {
            return Err(config_error("train.kick_grid", "need step > 0 and stop ≥ start"));
        }
        let n = ((g.stop - g.start) / g.step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| g.start + i as f64 * g.step).collect());
    }
    let intensity = t.peak_intensity.expect("one source is set");
    let bridge = bridge.ok_or_else(|| config_error("train.peak_intensity", "needs [molecule] with delta_alpha_a3"))?;
    let fwhm = fwhm_seconds.ok_or_else(|| config_error("train.fwhm_fs", "peak_intensity needs the pulse FWHM in fs"))?;
    let p = kick_strength_from_pulse(bridge, intensity, fwhm).map_err(|e| config_error("train.peak_intensity", e.to_string()))?;
    Ok(vec![p])
}

fn check_sampling(cfg: &RunConfig, plan: &Plan) -> Result<(), CliError> {
    let s = &cfg.sampling;
    if s.omega_bins == 0 {
        return Err(config_error("sampling.omega_bins", "must be at least 1"));
    }
    if s.oversampling == 0 {
        return Err(config_error("sampling.oversampling", "must be at least 1"));
    }
    let pure_state = matches!(plan.scenario, Scenario::Dynamics | Scenario::AlignmentFt) && plan.temperature.is_none();
    if plan.scenario == Scenario::OverlapScan || pure_state {
        if s.initial_j.is_empty() {
            return Err(config_error("sampling.initial_j", "no initial states given"));
        }
        for &j in &s.initial_j {
            if !plan.blocks.contains(&Parity::of(j)) {
                return Err(config_error("sampling.initial_j", format!("J={j} is not in the {:?} parity block", cfg.basis.parity)));
            }
            plan.basis(Parity::of(j))?
                .index_of(j)
                .ok_or_else(|| config_error("sampling.initial_j", format!("J={j} is outside the basis")))?;
        }
    }
    if plan.scenario == Scenario::AlignmentFt {
        let b = s.broadening.ok_or_else(|| config_error("sampling.broadening", "alignment-ft needs a line width"))?;
        if !(b > 0.0 && b.is_finite()) {
            return Err(config_error("sampling.broadening", "must be positive"));
        }
        if let Some(pulses) = &s.analyse_pulses {
            if pulses.is_empty() || pulses.iter().any(|&n| n > plan.pulses) {
                return Err(config_error("sampling.analyse_pulses", format!("need pulse indices in 0..={}", plan.pulses)));
            }
        }
    }
    if plan.scenario == Scenario::PlanarRef && cfg.basis.parity != ParityChoice::Even {
        return Err(config_error("basis.parity", "planar-ref has no parity blocks; leave it at even"));
    }
    Ok(())
}

/// Numbers derived from the config that a reader of the output may need.
#[derive(Debug, Serialize)]
struct Derived {
    kick_strengths: Vec<f64>,
    tau: f64,
    eps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pulse_fwhm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    revival_time_ps: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    library: &'static str,
    version: &'static str,
    files: Vec<String>,
    derived: Derived,
    config: &'a RunConfig,
}

/// A named CSV document.
#[derive(Debug)]
struct Table {
    name: String,
    text: String,
}

impl Table {
    fn new(name: impl Into<String>, header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Table { name: name.into(), text }
    }

    fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }
}

/// Fixed 17-significant-digit formatting.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output: PathBuf,
    pub files: Vec<String>,
    pub wall_seconds: f64,
}

/// Runs one scenario and writes its files, the manifest and the timing record.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    let started = Instant::now();
    let plan = resolve(cfg)?;
    let (tables, failure) = match plan.scenario {
        Scenario::States => (states(&plan)?, None),
        Scenario::SpectrumScan => scan(&plan, cfg.sampling.omega_bins)?,
        Scenario::Dynamics => (dynamics(&plan, cfg)?, None),
        Scenario::OverlapScan => (overlap_scan(&plan, cfg)?, None),
        Scenario::AlignmentFt => (alignment(&plan, cfg)?, None),
        Scenario::PlanarRef => (planar(&plan, cfg)?, None),
    };

    fs::create_dir_all(&plan.output).map_err(|source| CliError::Io { path: plan.output.clone(), source })?;
    let mut files = Vec::new();
    for t in &tables {
        write_file(&plan.output.join(&t.name), &t.text)?;
        files.push(t.name.clone());
    }
    let manifest = Manifest {
        library: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        files: files.clone(),
        derived: Derived {
            kick_strengths: plan.kick_strengths.clone(),
            tau: plan.tau.value(),
            eps: plan.spectrum.eps(),
            pulse_fwhm: match plan.shape {
                PulseShape::Gaussian { fwhm } => Some(fwhm),
                PulseShape::Delta => None,
            },
            revival_time_ps: plan.bridge.map(|b| b.revival_time_si().map(|t| t * 1e12)).transpose()?,
        },
        config: cfg,
    };
    let text = toml::to_string(&manifest).map_err(|e| config_error("config", e.to_string()))?;
    write_file(&plan.output.join(MANIFEST_FILE), &text)?;
    let wall_seconds = started.elapsed().as_secs_f64();
    write_file(&plan.output.join(TIMING_FILE), &format!("wall_seconds = {wall_seconds}\n"))?;

    match failure {
        Some(e) => Err(e),
        None => Ok(RunSummary { output: plan.output, files, wall_seconds }),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.into(), source })
}

fn decompose(plan: &Plan, kick_strength: f64, basis: &BasisSpec) -> crate::Result<QuasienergySet> {
    let train = PulseTrainSpec::new(kick_strength, plan.tau, 1, plan.shape)?;
    classify_edge_states(quasienergy_decomposition(&cycle_operator(&train, basis, &plan.spectrum)?)?)
}

fn states(plan: &Plan) -> Result<Vec<Table>, CliError> {
    let p = plan.single_kick();
    let mut levels = Table::new("quasienergies.csv", &["parity", "P", "omega[rad]", "class", "lower_weight", "upper_weight"]);
    let mut out = Vec::new();
    for &parity in &plan.blocks {
        let basis = plan.basis(parity)?;
        let set = decompose(plan, p, &basis)?;
        let mut header = vec!["state".to_string(), "omega[rad]".into(), "class".into()];
        header.extend(basis.js().map(|j| format!("J={j}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut profiles = Table::new(format!("state_profiles_{parity}.csv"), &header);
        for (k, s) in set.states().iter().enumerate() {
            let class = s.class().expect("classified").to_string();
            levels.row(&[parity.to_string(), num(p), num(s.omega), class.clone(), num(s.lower_weight), num(s.upper_weight)]);
            let mut row = vec![k.to_string(), num(s.omega), class];
            row.extend(s.profile().into_iter().map(num));
            profiles.row(&row);
        }
        out.push(profiles);
    }
    out.insert(0, levels);
    Ok(out)
}

fn scan(plan: &Plan, omega_bins: usize) -> Result<(Vec<Table>, Option<CliError>), CliError> {
    let mut levels = Table::new("scan.csv", &["parity", "P", "omega[rad]", "class"]);
    let mut histogram = Table::new("histogram.csv", &["parity", "P", "omega_bin", "omega_center[rad]", "count"]);
    let mut failures = Table::new("scan_failures.csv", &["parity", "P", "error"]);
    let mut failed = 0;
    let mut total = 0;
    for &parity in &plan.blocks {
        let basis = plan.basis(parity)?;
        let table = spectrum_scan(&plan.kick_strengths, plan.tau, &basis, &plan.spectrum, omega_bins)?;
        for (point, counts) in table.points.iter().zip(&table.histogram) {
            total += 1;
            let p = num(point.kick_strength);
            match &point.outcome {
                Ok(states) => {
                    for (w, class) in states {
                        levels.row(&[parity.to_string(), p.clone(), num(*w), class.to_string()]);
                    }
                }
                Err(e) => {
                    failed += 1;
                    failures.row(&[parity.to_string(), p.clone(), format!("\"{}\"", e.replace('"', "'"))]);
                }
            }
            for (bin, count) in counts.iter().enumerate() {
                let centre = -PI + (bin as f64 + 0.5) * 2.0 * PI / omega_bins as f64;
                histogram.row(&[parity.to_string(), p.clone(), bin.to_string(), num(centre), count.to_string()]);
            }
        }
    }
    let failure = (failed > 0).then_some(CliError::ScanFailures { failed, total });
    Ok((vec![levels, histogram, failures], failure))
}

/// Populations on J = 0..=j_max after each pulse, one series per source.
struct Series {
    source: String,
    populations: Vec<Vec<f64>>,
}

fn pure_state_runs(plan: &Plan, cfg: &RunConfig) -> Result<Vec<(String, Vec<WaveFunction>)>, CliError> {
    let train = plan.train(plan.single_kick())?;
    let mut ops = Vec::new();
    for &parity in &plan.blocks {
        let basis = plan.basis(parity)?;
        ops.push((parity, cycle_operator(&train, &basis, &plan.spectrum)?));
    }
    cfg.sampling
        .initial_j
        .par_iter()
        .map(|&j| {
            let op = &ops.iter().find(|(p, _)| *p == Parity::of(j)).expect("parity checked").1;
            let psi0 = WaveFunction::basis_state(op.basis(), j)?;
            Ok((format!("J0={j}"), propagate_with(op, &psi0, plan.pulses)?))
        })
        .collect()
}

fn dynamics_series(plan: &Plan, cfg: &RunConfig) -> Result<Vec<Series>, CliError> {
    if let Some(t) = plan.temperature {
        let bridge = plan.bridge.expect("checked with temperature");
        let ensemble = thermal_ensemble(t, &bridge, &plan.spectrum)?;
        let run = propagate_ensemble(&ensemble, &plan.train(plan.single_kick())?, plan.j_max)?;
        let populations = (0..=plan.pulses).map(|n| run.populations(n)).collect::<crate::Result<Vec<_>>>()?;
        return Ok(vec![Series { source: "thermal".into(), populations }]);
    }
    pure_state_runs(plan, cfg)?
        .into_iter()
        .map(|(source, traj)| {
            let populations = traj.iter().map(|psi| populations_on_axis(psi, plan.j_max)).collect::<crate::Result<Vec<_>>>()?;
            Ok(Series { source, populations })
        })
        .collect()
}

fn dynamics(plan: &Plan, cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let series = dynamics_series(plan, cfg)?;
    let mut heatmap = Table::new("populations.csv", &["source", "pulse_index", "J", "population"]);
    let mut energy = Table::new("energy.csv", &["source", "N", "E[hbar^2/I]", "mean_J", "support_J"]);
    let threshold = cfg.sampling.support_threshold;
    for s in &series {
        for (n, pops) in s.populations.iter().enumerate() {
            for (j, p) in pops.iter().enumerate() {
                heatmap.row(&[s.source.clone(), n.to_string(), j.to_string(), num(*p)]);
            }
            let e: f64 = pops.iter().enumerate().map(|(j, p)| p * plan.spectrum.energy(j as u32)).sum();
            let mean: f64 = pops.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
            let support = pops.iter().rposition(|&p| p > threshold).unwrap_or(0);
            energy.row(&[s.source.clone(), n.to_string(), num(e), num(mean), support.to_string()]);
        }
    }
    Ok(vec![heatmap, energy])
}

fn overlap_scan(plan: &Plan, cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let mut table = Table::new("overlap.csv", &["P", "initial_J", "overlap"]);
    let jobs: Vec<(f64, Parity)> = plan
        .kick_strengths
        .iter()
        .flat_map(|&p| plan.blocks.iter().map(move |&b| (p, b)))
        .filter(|(_, b)| cfg.sampling.initial_j.iter().any(|&j| Parity::of(j) == *b))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(p, parity)| {
            let basis = plan.basis(parity)?;
            let set = decompose(plan, p, &basis)?;
            let mut rows = Vec::new();
            for &j in cfg.sampling.initial_j.iter().filter(|&&j| Parity::of(j) == parity) {
                let report = edge_overlap(&WaveFunction::basis_state(&basis, j)?, &set)?;
                rows.push((p, j, report.overlap));
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut rows: Vec<(f64, u32, f64)> = results.into_iter().flatten().collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (p, j, o) in rows {
        table.row(&[num(p), j.to_string(), num(o)]);
    }
    Ok(vec![table])
}

fn alignment(plan: &Plan, cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let broadening = cfg.sampling.broadening.expect("checked");
    let reduced_width = match &plan.bridge {
        Some(b) => broadening / b.energy_unit_cm(),
        None => broadening,
    };
    // the default trace spans ±4σ of the Gaussian window
    let window = cfg.sampling.window.unwrap_or(8.0 * 2.0 * (2.0 * LN_2).sqrt() / reduced_width);
    let analyse = cfg.sampling.analyse_pulses.clone().unwrap_or_else(|| vec![plan.pulses]);
    let oversampling = cfg.sampling.oversampling;

    let mut traces: Vec<(String, AlignmentTrace)> = Vec::new();
    if let Some(t) = plan.temperature {
        let bridge = plan.bridge.expect("checked with temperature");
        let ensemble = thermal_ensemble(t, &bridge, &plan.spectrum)?;
        let run = propagate_ensemble(&ensemble, &plan.train(plan.single_kick())?, plan.j_max)?;
        for &n in &analyse {
            let samples = oversampling * run.nyquist_samples(n, window)?;
            traces.push(("thermal".into(), run.alignment_trace(n, window, samples)?));
        }
    } else {
        for (source, traj) in pure_state_runs(plan, cfg)? {
            for &n in &analyse {
                let psi = WaveFunction::from_coeffs(traj[n].basis(), traj[n].coeffs().clone(), 0.0)?;
                let samples = oversampling * nyquist_samples(&psi, &plan.spectrum, window)?;
                let trace = alignment_trace(&psi, &plan.spectrum, &cos2_matrix(psi.basis()), window, samples, n)?;
                traces.push((source.clone(), trace));
            }
        }
    }

    let spectra: Vec<AlignmentSpectrum> =
        traces.iter().map(|(_, t)| alignment_spectrum(t, broadening, plan.bridge.as_ref())).collect::<crate::Result<_>>()?;
    let unit = match plan.bridge {
        Some(_) => "frequency[cm^-1]",
        None => "frequency[reduced]",
    };
    let mut trace_table = Table::new("alignment_trace.csv", &["source", "pulse_index", "t[reduced]", "cos2"]);
    let mut spectrum_table = Table::new("alignment_spectrum.csv", &["source", "pulse_index", unit, "magnitude"]);
    for ((source, trace), spectrum) in traces.iter().zip(&spectra) {
        let pulse = trace.start_pulse.to_string();
        for (t, v) in trace.times.iter().zip(&trace.values) {
            trace_table.row(&[source.clone(), pulse.clone(), num(*t), num(*v)]);
        }
        for (f, m) in spectrum.frequencies.iter().zip(&spectrum.magnitudes) {
            spectrum_table.row(&[source.clone(), pulse.clone(), num(*f), num(*m)]);
        }
    }
    Ok(vec![trace_table, spectrum_table])
}

fn planar(plan: &Plan, cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let kick = cfg.sampling.planar_kick.into();
    let grid = cfg.sampling.planar_grid;
    let spectra = plan
        .kick_strengths
        .par_iter()
        .map(|&p| planar_reference_spectrum(p, plan.tau, grid, kick).map(|w| (p, w)))
        .collect::<crate::Result<Vec<_>>>()
        .map_err(|e| match e {
            crate::Error::InvalidBasis(m) => config_error("sampling.planar_grid", m),
            e => e.into(),
        })?;
    let mut table = Table::new("planar_quasienergies.csv", &["P", "omega[rad]"]);
    for (p, omegas) in spectra {
        for w in omegas {
            table.row(&[num(p), num(w)]);
        }
    }
    Ok(vec![table])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> RunConfig {
        toml::from_str(text).unwrap()
    }

    fn key_of(e: CliError) -> String {
        match e {
            CliError::Config { key, .. } => key,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn defaults_resolve() {
        let cfg = config("scenario = \"states\"\noutput = \"x\"\n[train]\nkick_strength = 3.0\n");
        let plan = resolve(&cfg).unwrap();
        assert_eq!(plan.j_max, 512);
        assert_eq!(plan.blocks, vec![Parity::Even]);
        assert_eq!(plan.tau, TauFraction::new(1, 3).unwrap());
    }

    #[test]
    fn errors_name_the_key() {
        let base = "scenario = \"overlap-scan\"\noutput = \"x\"\n";
        assert_eq!(key_of(resolve(&config(&format!("{base}[train]\nkick_strengths = []\n"))).unwrap_err()), "train.kick_strengths");
        assert_eq!(key_of(resolve(&config(&format!("{base}[train]\nkick_strength = 1.0\ntau = \"1/0\"\n"))).unwrap_err()), "train.tau");
        assert_eq!(
            key_of(resolve(&config(&format!("{base}[train]\nkick_strength = 1.0\n[sampling]\ninitial_j = [3]\n"))).unwrap_err()),
            "sampling.initial_j"
        );
        assert_eq!(key_of(resolve(&config(&format!("{base}[train]\nkick_strength = 1.0\n[basis]\nj_max = 10\n"))).unwrap_err()), "basis");
        assert_eq!(key_of(resolve(&config("output = \"x\"\n[train]\nkick_strength = 1.0\n")).unwrap_err()), "scenario");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[train]\nkick_strenght = 3.0\n").is_err());
    }

    #[test]
    fn kick_grid_endpoints() {
        let cfg = config("scenario = \"spectrum-scan\"\noutput = \"x\"\n[train]\nkick_grid = { start = 0.0, stop = 10.0, step = 0.1 }\n");
        let plan = resolve(&cfg).unwrap();
        assert_eq!(plan.kick_strengths.len(), 101);
        assert!((plan.kick_strengths[100] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(config_error("a", "b").exit_code(), EXIT_CONFIG);
        let guard = CliError::Library(crate::Error::TruncationGuard { cycle: 3, population: 1e-3 });
        assert_eq!(guard.exit_code(), EXIT_NUMERICAL);
    }

    #[test]
    fn number_format() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(3.0), "3.0000000000000000e0");
    }
}
