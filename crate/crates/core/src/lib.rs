//! Stochastic interaction graphs for cascading-failure analysis.
//!
//! The pipeline: ingest cascade data organized in generations
//! ([`cascade`]), build a state-based stochastic interaction graph whose
//! vertices are whole failure generations ([`graph`]), eigen-analyze its
//! left-stochastic matrix to classify failure-propagation modes
//! ([`spectral`]), and turn modal information into mitigation plans whose
//! effect is evaluated against synthetic generators with known ground truth
//! ([`chain`], [`grid`], [`mitigation`]).

pub mod cascade;
pub mod chain;
pub mod error;
pub mod evd;
pub mod graph;
pub mod grid;
pub mod mitigation;
pub mod seed;
pub mod spectral;

pub use cascade::{CascadeDataset, ComponentId};
pub use error::{Error, Result};
pub use graph::{InteractionGraph, StochasticMatrix};
pub use spectral::{Mode, ModeKind, SpectralAnalysis};
