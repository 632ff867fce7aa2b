//! Run configuration read from TOML.
//!
//! Defaults are filled in at parse time, so serializing a parsed config gives
//! the fully resolved run description that goes into the manifest.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::basis::Parity;
use crate::floquet::PlanarKick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    States,
    SpectrumScan,
    Dynamics,
    OverlapScan,
    AlignmentFt,
    PlanarRef,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::States => "states",
            Scenario::SpectrumScan => "spectrum-scan",
            Scenario::Dynamics => "dynamics",
            Scenario::OverlapScan => "overlap-scan",
            Scenario::AlignmentFt => "alignment-ft",
            Scenario::PlanarRef => "planar-ref",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParityChoice {
    Even,
    Odd,
    Both,
}

impl ParityChoice {
    pub fn blocks(&self) -> Vec<Parity> {
        match self {
            ParityChoice::Even => vec![Parity::Even],
            ParityChoice::Odd => vec![Parity::Odd],
            ParityChoice::Both => vec![Parity::Even, Parity::Odd],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeChoice {
    Delta,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanarKickChoice {
    Cosine,
    CosineSquared,
}

impl From<PlanarKickChoice> for PlanarKick {
    fn from(c: PlanarKickChoice) -> Self {
        match c {
            PlanarKickChoice::Cosine => PlanarKick::Cosine,
            PlanarKickChoice::CosineSquared => PlanarKick::CosineSquared,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    /// Output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Kelvin. Switches dynamics and alignment runs to a thermal ensemble.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub rotor: RotorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub molecule: Option<MoleculeConfig>,
    #[serde(default)]
    pub sampling: SamplingConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config parses")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    #[serde(default)]
    pub m: i32,
    #[serde(default = "default_parity")]
    pub parity: ParityChoice,
    #[serde(default = "default_j_max")]
    pub j_max: u32,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig { m: 0, parity: default_parity(), j_max: default_j_max() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kick_strength: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kick_strengths: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kick_grid: Option<GridConfig>,
    /// Pulse period as a fraction p/q of the revival time.
    #[serde(default = "default_tau")]
    pub tau: String,
    #[serde(default = "default_pulses")]
    pub pulses: usize,
    #[serde(default = "default_shape")]
    pub shape: ShapeChoice,
    /// Intensity FWHM in reduced time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fwhm: Option<f64>,
    /// Intensity FWHM in femtoseconds (needs [molecule]).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fwhm_fs: Option<f64>,
    /// Peak intensity in W/cm²; the kick strength then follows from Δα.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_intensity: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            kick_strength: None,
            kick_strengths: None,
            kick_grid: None,
            tau: default_tau(),
            pulses: default_pulses(),
            shape: default_shape(),
            fwhm: None,
            fwhm_fs: None,
            peak_intensity: None,
        }
    }
}

/// Evenly spaced kick strengths start, start+step, ... up to stop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotorConfig {
    /// Reduced centrifugal constant; zero for a rigid rotor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeConfig {
    pub b_cm: f64,
    pub d_cm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_alpha_a3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    /// Initial J of pure-state runs.
    #[serde(default = "default_initial_j")]
    pub initial_j: Vec<u32>,
    #[serde(default = "default_omega_bins")]
    pub omega_bins: usize,
    /// Population above which a level counts toward the support edge.
    #[serde(default = "default_support_threshold")]
    pub support_threshold: f64,
    /// Pulse indices after which the alignment trace is taken; defaults to the last pulse.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analyse_pulses: Option<Vec<usize>>,
    /// Line FWHM in cm⁻¹ with [molecule], reduced angular frequency without.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub broadening: Option<f64>,
    /// Trace length in reduced time; defaults to eight window widths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(default = "default_oversampling")]
    pub oversampling: usize,
    #[serde(default = "default_planar_grid")]
    pub planar_grid: u32,
    #[serde(default = "default_planar_kick")]
    pub planar_kick: PlanarKickChoice,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty sampling table parses")
    }
}

fn default_parity() -> ParityChoice {
    ParityChoice::Even
}
fn default_j_max() -> u32 {
    512
}
fn default_tau() -> String {
    "1/3".into()
}
fn default_pulses() -> usize {
    1
}
fn default_shape() -> ShapeChoice {
    ShapeChoice::Delta
}
fn default_initial_j() -> Vec<u32> {
    vec![0]
}
fn default_omega_bins() -> usize {
    crate::floquet::DEFAULT_OMEGA_BINS
}
fn default_support_threshold() -> f64 {
    1e-4
}
fn default_oversampling() -> usize {
    crate::observables::DEFAULT_OVERSAMPLING
}
fn default_planar_grid() -> u32 {
    200
}
fn default_planar_kick() -> PlanarKickChoice {
    PlanarKickChoice::Cosine
}
