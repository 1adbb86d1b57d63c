//! Simulation and numerical verification of supercritical branching
//! processes in random environment.

pub mod acceptance;
pub mod config;
pub mod edgeworth;
pub mod envmodel;
pub mod error;
pub mod fourier;
pub mod limits;
pub mod numeric;
pub mod oracle;
pub mod rng;
pub mod runner;
pub mod series;
pub mod simulate;

pub use envmodel::{build_model, check_hypotheses, EnvironmentKind, EnvironmentModel, HypothesisReport, OffspringLaw};
pub use error::{Error, Result};
pub use simulate::{raw_ensemble, simulate_trajectory, survivor_ensemble, Ensemble, EnsembleSpec, PopulationState, SimPolicy, Trajectory};
