//! Monte Carlo machinery for treating confidence-interval coverage as a
//! Bernoulli event and scoring probability forecasts for it.
//!
//! The crate simulates a finite-window uniform model (two observations on a
//! window of known width centered on the target), realizes several 50%
//! confidence procedures for it, and evaluates forecast strategies for the
//! coverage event under strictly proper scoring rules, from plain constants
//! up to conditional-coverage lookup tables keyed on interval geometry.
//! A three-cup shell game with the same fixed-but-unknown structure is
//! included as a sanity world where the design-level success probability is
//! demonstrably the right forecast.

pub mod composite;
pub mod conditioning;
pub mod experiment;
pub mod model;
pub mod monty;
pub mod procedures;
pub mod rng;
pub mod scoring;
pub mod simulation;

pub use model::{
    covers, CoverageOutcome, Interval, ModelError, ProcedureId, SimulationConfig, StatisticId,
    TrialRecord, UniformDesign,
};
pub use scoring::{Forecast, MomentAccumulator, ScoringRuleKind};
