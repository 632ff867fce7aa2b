//! Floquet analysis and pulse-train dynamics of periodically kicked linear rotors.

pub mod basis;
pub mod cli;
pub mod coupling;
pub mod error;
pub mod floquet;
pub mod observables;
pub mod propagation;

pub use basis::{BasisSpec, Parity, RotorSpectrum, UnitBridge};
pub use coupling::{cos2_matrix, CouplingMatrix};
pub use error::{Error, Result};
pub use floquet::{classify_edge_states, edge_overlap, quasienergy_decomposition, QuasienergySet, StateClass};
pub use propagation::{one_cycle_operator, propagate_train, PulseShape, PulseTrainSpec, TauFraction, WaveFunction};
