//! Core domain types: intervals, coverage indicators, procedure identities,
//! and simulation configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("interval endpoints must satisfy lower <= upper without NaN, got [{lower}, {upper}]")]
    InvalidInterval { lower: f64, upper: f64 },
    #[error("theta must be finite, got {0}")]
    InvalidTheta(f64),
    #[error("hull width must be positive and finite, got {0}")]
    InvalidHullWidth(f64),
    #[error("sample point {value} lies outside the design window [{lo}, {hi}]")]
    SampleOutsideWindow { value: f64, lo: f64, hi: f64 },
    #[error("alpha must lie strictly inside (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("n_trials must be at least 1")]
    ZeroTrials,
    #[error("{0} grid must be non-empty")]
    EmptyGrid(&'static str),
    #[error("unknown procedure id `{0}`")]
    UnknownProcedure(String),
    #[error("unknown statistic id `{0}`")]
    UnknownStatistic(String),
}

/// A closed interval with possibly unbounded endpoints: the realized CI.
///
/// Unbounded endpoints are the IEEE infinities, treated as distinguished
/// values; `width` never performs `inf - inf` arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lower: f64,
    upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self, ModelError> {
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(ModelError::InvalidInterval { lower, upper });
        }
        Ok(Self { lower, upper })
    }

    /// The trivial interval `[-inf, inf]`: coverage is certain.
    pub fn unbounded() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// Interval length; infinite as soon as either endpoint is infinite.
    pub fn width(&self) -> f64 {
        if self.lower.is_infinite() || self.upper.is_infinite() {
            f64::INFINITY
        } else {
            self.upper - self.lower
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn is_finite(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }

    /// Closed containment: both endpoints count.
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lower, self.upper)
    }
}

/// The coverage indicator: did the interval capture the target?
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CoverageOutcome {
    covered: bool,
}

impl CoverageOutcome {
    pub fn from_bool(covered: bool) -> Self {
        Self { covered }
    }

    pub fn covered(&self) -> bool {
        self.covered
    }

    /// The indicator as a real number in {0, 1}.
    pub fn indicator(&self) -> f64 {
        if self.covered {
            1.0
        } else {
            0.0
        }
    }
}

impl From<bool> for CoverageOutcome {
    fn from(covered: bool) -> Self {
        Self::from_bool(covered)
    }
}

/// Coverage with boundary points included on both sides. Total function.
pub fn covers(interval: &Interval, theta: f64) -> CoverageOutcome {
    CoverageOutcome::from_bool(interval.contains(theta))
}

/// Stable tokens identifying the confidence procedures; these appear
/// verbatim in CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProcedureId {
    /// Interval spanned by the two observations.
    Np,
    /// Shorter of the two same-coverage intervals.
    Ump,
    /// Fixed-width interval around the sample mean.
    Sd,
    /// The `[-inf, inf]` interval.
    Trivial,
    /// Normal-model t interval.
    T,
}

impl ProcedureId {
    pub const SUBMARINE: [ProcedureId; 4] = [
        ProcedureId::Np,
        ProcedureId::Ump,
        ProcedureId::Sd,
        ProcedureId::Trivial,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProcedureId::Np => "np",
            ProcedureId::Ump => "ump",
            ProcedureId::Sd => "sd",
            ProcedureId::Trivial => "trivial",
            ProcedureId::T => "t",
        }
    }
}

impl fmt::Display for ProcedureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProcedureId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "np" => Ok(ProcedureId::Np),
            "ump" => Ok(ProcedureId::Ump),
            "sd" => Ok(ProcedureId::Sd),
            "trivial" => Ok(ProcedureId::Trivial),
            "t" => Ok(ProcedureId::T),
            other => Err(ModelError::UnknownProcedure(other.to_string())),
        }
    }
}

/// Stable tokens for per-trial statistics retained for conditioning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StatisticId {
    /// Relative width of the spanned interval: `|x1 - x2| / hull_width`.
    RelativeWidth,
    /// Folded relative width `min(D, 1 - D)`; the short interval's width.
    FoldedWidth,
    /// Relative width of the outer interval of the nested UMP/SD pair.
    MaxWidth,
    /// Which of the UMP/SD pair contains the other (0 or 1).
    Nesting,
}

impl StatisticId {
    pub fn as_str(&self) -> &'static str {
        match self {
            StatisticId::RelativeWidth => "D",
            StatisticId::FoldedWidth => "W",
            StatisticId::MaxWidth => "max_width",
            StatisticId::Nesting => "nesting",
        }
    }
}

impl fmt::Display for StatisticId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StatisticId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "D" => Ok(StatisticId::RelativeWidth),
            "W" => Ok(StatisticId::FoldedWidth),
            "max_width" => Ok(StatisticId::MaxWidth),
            "nesting" => Ok(StatisticId::Nesting),
            other => Err(ModelError::UnknownStatistic(other.to_string())),
        }
    }
}

/// One point of the sweep: observations land uniformly on a window of
/// known width centered on the target location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformDesign {
    theta: f64,
    hull_width: f64,
}

impl UniformDesign {
    pub fn new(theta: f64, hull_width: f64) -> Result<Self, ModelError> {
        if !theta.is_finite() {
            return Err(ModelError::InvalidTheta(theta));
        }
        if !(hull_width.is_finite() && hull_width > 0.0) {
            return Err(ModelError::InvalidHullWidth(hull_width));
        }
        Ok(Self { theta, hull_width })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn hull_width(&self) -> f64 {
        self.hull_width
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.hull_width
    }

    /// Support window `[theta - hull_width/2, theta + hull_width/2]`.
    pub fn support(&self) -> (f64, f64) {
        (
            self.theta - self.half_width(),
            self.theta + self.half_width(),
        )
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.support();
        lo <= x && x <= hi
    }
}

/// Full sweep configuration: grids, trial count, seed, and nominal level.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub theta_grid: Vec<f64>,
    pub hull_width_grid: Vec<f64>,
    pub n_trials: u64,
    pub seed: u64,
    pub alpha: f64,
}

impl SimulationConfig {
    pub fn new(
        theta_grid: Vec<f64>,
        hull_width_grid: Vec<f64>,
        n_trials: u64,
        seed: u64,
        alpha: f64,
    ) -> Result<Self, ModelError> {
        let config = Self {
            theta_grid,
            hull_width_grid,
            n_trials,
            seed,
            alpha,
        };
        config.validate()?;
        Ok(config)
    }

    /// The 100-configuration reference sweep: hatch locations 0..=9,
    /// hull widths 10, 20, ..., 100, at 1e5 trials per configuration.
    pub fn reference_sweep(seed: u64) -> Self {
        Self {
            theta_grid: (0..10).map(f64::from).collect(),
            hull_width_grid: (1..=10).map(|k| 10.0 * f64::from(k)).collect(),
            n_trials: 100_000,
            seed,
            alpha: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.theta_grid.is_empty() {
            return Err(ModelError::EmptyGrid("theta"));
        }
        if self.hull_width_grid.is_empty() {
            return Err(ModelError::EmptyGrid("hull_width"));
        }
        if self.n_trials == 0 {
            return Err(ModelError::ZeroTrials);
        }
        if !(self.alpha.is_finite() && 0.0 < self.alpha && self.alpha < 1.0) {
            return Err(ModelError::InvalidAlpha(self.alpha));
        }
        for &theta in &self.theta_grid {
            if !theta.is_finite() {
                return Err(ModelError::InvalidTheta(theta));
            }
        }
        for &w in &self.hull_width_grid {
            if !(w.is_finite() && w > 0.0) {
                return Err(ModelError::InvalidHullWidth(w));
            }
        }
        Ok(())
    }

    pub fn n_configs(&self) -> usize {
        self.theta_grid.len() * self.hull_width_grid.len()
    }

    /// Sweep points in a fixed order: theta-major, hull-width-minor.
    /// Stream derivation keys off the position in this list.
    pub fn designs(&self) -> Vec<UniformDesign> {
        let mut out = Vec::with_capacity(self.n_configs());
        for &theta in &self.theta_grid {
            for &w in &self.hull_width_grid {
                out.push(UniformDesign {
                    theta,
                    hull_width: w,
                });
            }
        }
        out
    }
}

/// One simulated experiment: the sample, the realized intervals and their
/// coverage indicators, and the statistics retained for conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub theta: f64,
    pub hull_width: f64,
    pub x1: f64,
    pub x2: f64,
    pub intervals: BTreeMap<ProcedureId, Interval>,
    pub outcomes: BTreeMap<ProcedureId, CoverageOutcome>,
    pub stats: BTreeMap<StatisticId, f64>,
}

impl TrialRecord {
    pub fn interval(&self, procedure: ProcedureId) -> Option<&Interval> {
        self.intervals.get(&procedure)
    }

    pub fn outcome(&self, procedure: ProcedureId) -> Option<CoverageOutcome> {
        self.outcomes.get(&procedure).copied()
    }

    pub fn stat(&self, statistic: StatisticId) -> Option<f64> {
        self.stats.get(&statistic).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covers_boundary_and_interior() {
        let i = Interval::new(1.0, 3.0).unwrap();
        assert!(covers(&i, 2.0).covered());
        assert!(covers(&i, 3.0).covered());
        assert!(covers(&i, 1.0).covered());
        assert!(!covers(&i, 5.0).covered());
    }

    #[test]
    fn trivial_interval_always_covers() {
        let i = Interval::unbounded();
        for theta in [-1e300, -7.5, 0.0, 3.0, 1e300] {
            assert!(covers(&i, theta).covered());
        }
        assert_eq!(i.width(), f64::INFINITY);
    }

    #[test]
    fn half_infinite_width_is_infinite() {
        let i = Interval::new(f64::NEG_INFINITY, 4.0).unwrap();
        assert_eq!(i.width(), f64::INFINITY);
        let i = Interval::new(4.0, f64::INFINITY).unwrap();
        assert_eq!(i.width(), f64::INFINITY);
    }

    #[test]
    fn rejects_malformed_intervals() {
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(f64::NAN, 1.0).is_err());
        assert!(Interval::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn design_window() {
        let d = UniformDesign::new(3.0, 10.0).unwrap();
        assert_eq!(d.support(), (-2.0, 8.0));
        assert!(d.contains(-2.0));
        assert!(d.contains(8.0));
        assert!(!d.contains(8.0001));
        assert!(UniformDesign::new(0.0, 0.0).is_err());
        assert!(UniformDesign::new(0.0, -1.0).is_err());
        assert!(UniformDesign::new(f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = SimulationConfig::new(vec![0.0], vec![10.0], 1, 7, 0.5);
        assert!(ok.is_ok());
        assert!(matches!(
            SimulationConfig::new(vec![], vec![10.0], 1, 7, 0.5),
            Err(ModelError::EmptyGrid("theta"))
        ));
        assert!(matches!(
            SimulationConfig::new(vec![0.0], vec![], 1, 7, 0.5),
            Err(ModelError::EmptyGrid("hull_width"))
        ));
        assert!(matches!(
            SimulationConfig::new(vec![0.0], vec![10.0], 0, 7, 0.5),
            Err(ModelError::ZeroTrials)
        ));
        assert!(matches!(
            SimulationConfig::new(vec![0.0], vec![10.0], 1, 7, 1.0),
            Err(ModelError::InvalidAlpha(_))
        ));
    }

    #[test]
    fn reference_sweep_has_100_configs() {
        let config = SimulationConfig::reference_sweep(1);
        assert_eq!(config.n_configs(), 100);
        let designs = config.designs();
        assert_eq!(designs.len(), 100);
        assert_eq!(designs[0].theta(), 0.0);
        assert_eq!(designs[0].hull_width(), 10.0);
        assert_eq!(designs[9].hull_width(), 100.0);
        assert_eq!(designs[99].theta(), 9.0);
    }

    #[test]
    fn id_tokens_round_trip() {
        for p in [
            ProcedureId::Np,
            ProcedureId::Ump,
            ProcedureId::Sd,
            ProcedureId::Trivial,
            ProcedureId::T,
        ] {
            assert_eq!(p.as_str().parse::<ProcedureId>().unwrap(), p);
        }
        for s in [
            StatisticId::RelativeWidth,
            StatisticId::FoldedWidth,
            StatisticId::MaxWidth,
            StatisticId::Nesting,
        ] {
            assert_eq!(s.as_str().parse::<StatisticId>().unwrap(), s);
        }
        assert!("bogus".parse::<ProcedureId>().is_err());
        assert!("bogus".parse::<StatisticId>().is_err());
    }
}
