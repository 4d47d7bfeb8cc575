//! Strictly proper scoring rules for Bernoulli coverage forecasts, expected
//! risk, and streaming score accumulation.

use thiserror::Error;

use crate::model::CoverageOutcome;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("forecast probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("cannot summarize an empty score sequence")]
    EmptyScores,
}

/// The two rules exercised here. Both are strictly proper on (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScoringRuleKind {
    Brier,
    Log,
}

impl ScoringRuleKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScoringRuleKind::Brier => "brier",
            ScoringRuleKind::Log => "log",
        }
    }
}

/// A probability forecast q in [0, 1], validated at construction.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Forecast(f64);

impl Forecast {
    pub const ZERO: Forecast = Forecast(0.0);
    pub const ONE: Forecast = Forecast(1.0);

    pub fn new(q: f64) -> Result<Self, ScoringError> {
        if q.is_nan() || !(0.0..=1.0).contains(&q) {
            return Err(ScoringError::InvalidProbability(q));
        }
        Ok(Self(q))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Loss of forecast `q` against outcome `z`.
///
/// The log score with q in {0, 1} and the mismatching outcome is an
/// infinite loss; it is returned as `f64::INFINITY`, never clamped.
pub fn score(rule: ScoringRuleKind, q: Forecast, z: CoverageOutcome) -> f64 {
    let q = q.value();
    match rule {
        ScoringRuleKind::Brier => {
            let d = z.indicator() - q;
            d * d
        }
        ScoringRuleKind::Log => {
            if z.covered() {
                -q.ln()
            } else {
                -(1.0 - q).ln()
            }
        }
    }
}

/// Pre-trial risk of a constant forecast against a Bernoulli(p) outcome:
/// `p * S(q, 1) + (1 - p) * S(q, 0)`, with the `0 * inf` products defined
/// as zero so a certain outcome never manufactures infinite risk.
pub fn expected_score(rule: ScoringRuleKind, q: Forecast, p: Forecast) -> f64 {
    let p = p.value();
    let s1 = score(rule, q, CoverageOutcome::from_bool(true));
    let s0 = score(rule, q, CoverageOutcome::from_bool(false));
    let win = if p > 0.0 { p * s1 } else { 0.0 };
    let lose = if p < 1.0 { (1.0 - p) * s0 } else { 0.0 };
    win + lose
}

/// The unique expected-risk minimizer among constant forecasts under any
/// strictly proper rule: the success probability itself.
pub fn optimal_constant_forecast(_rule: ScoringRuleKind, p: Forecast) -> Forecast {
    p
}

/// Mean and population variance of per-pair losses.
pub fn empirical_mean_score<I>(rule: ScoringRuleKind, pairs: I) -> Result<(f64, f64), ScoringError>
where
    I: IntoIterator<Item = (Forecast, CoverageOutcome)>,
{
    let mut acc = MomentAccumulator::new();
    for (q, z) in pairs {
        acc.push(score(rule, q, z));
    }
    if acc.count() == 0 {
        return Err(ScoringError::EmptyScores);
    }
    Ok((acc.mean(), acc.population_variance()))
}

/// Single-pass mean/variance accumulator (Welford), mergeable for parallel
/// reduction. Infinite samples are tallied separately so one infinite loss
/// makes the mean infinite instead of degrading into NaN.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentAccumulator {
    finite: u64,
    infinite: u64,
    mean: f64,
    m2: f64,
}

impl MomentAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        if x.is_infinite() {
            self.infinite += 1;
            return;
        }
        self.finite += 1;
        let delta = x - self.mean;
        self.mean += delta / self.finite as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: MomentAccumulator) {
        self.infinite += other.infinite;
        if other.finite == 0 {
            return;
        }
        if self.finite == 0 {
            self.finite = other.finite;
            self.mean = other.mean;
            self.m2 = other.m2;
            return;
        }
        let n1 = self.finite as f64;
        let n2 = other.finite as f64;
        let total = n1 + n2;
        let delta = other.mean - self.mean;
        self.mean += delta * n2 / total;
        self.m2 += other.m2 + delta * delta * n1 * n2 / total;
        self.finite += other.finite;
    }

    pub fn count(&self) -> u64 {
        self.finite + self.infinite
    }

    pub fn infinite_count(&self) -> u64 {
        self.infinite
    }

    /// Mean of everything pushed; infinite if any sample was infinite,
    /// NaN when empty.
    pub fn mean(&self) -> f64 {
        if self.infinite > 0 {
            f64::INFINITY
        } else if self.finite == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    pub fn population_variance(&self) -> f64 {
        if self.infinite > 0 {
            f64::INFINITY
        } else if self.finite == 0 {
            f64::NAN
        } else {
            self.m2 / self.finite as f64
        }
    }

    pub fn sample_variance(&self) -> f64 {
        if self.infinite > 0 {
            f64::INFINITY
        } else if self.finite < 2 {
            f64::NAN
        } else {
            self.m2 / (self.finite - 1) as f64
        }
    }

    /// Standard error of the mean, from the sample variance.
    pub fn standard_error(&self) -> f64 {
        (self.sample_variance() / self.count() as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(covered: bool) -> CoverageOutcome {
        CoverageOutcome::from_bool(covered)
    }

    fn q(v: f64) -> Forecast {
        Forecast::new(v).unwrap()
    }

    #[test]
    fn brier_examples() {
        assert_eq!(score(ScoringRuleKind::Brier, q(1.0), z(true)), 0.0);
        assert_eq!(score(ScoringRuleKind::Brier, q(0.5), z(false)), 0.25);
    }

    #[test]
    fn log_examples() {
        let ln2 = std::f64::consts::LN_2;
        assert!((score(ScoringRuleKind::Log, q(0.5), z(true)) - ln2).abs() < 1e-15);
        assert_eq!(score(ScoringRuleKind::Log, q(1.0), z(true)), 0.0);
        // mismatching certainty is an infinite loss, not a panic
        assert_eq!(score(ScoringRuleKind::Log, q(0.0), z(true)), f64::INFINITY);
        assert_eq!(score(ScoringRuleKind::Log, q(1.0), z(false)), f64::INFINITY);
    }

    #[test]
    fn expected_score_examples() {
        assert_eq!(expected_score(ScoringRuleKind::Brier, q(1.0), q(0.5)), 0.5);
        assert_eq!(expected_score(ScoringRuleKind::Brier, q(0.5), q(0.5)), 0.25);
        // q = p gives p(1 - p)
        for p in [0.1, 0.25, 0.5, 0.9] {
            let e = expected_score(ScoringRuleKind::Brier, q(p), q(p));
            assert!((e - p * (1.0 - p)).abs() < 1e-15);
        }
        // certain outcome never multiplies an infinite loss into the risk
        assert_eq!(expected_score(ScoringRuleKind::Log, q(1.0), q(1.0)), 0.0);
        assert_eq!(expected_score(ScoringRuleKind::Log, q(0.0), q(0.0)), 0.0);
        assert_eq!(
            expected_score(ScoringRuleKind::Log, q(1.0), q(0.5)),
            f64::INFINITY
        );
    }

    #[test]
    fn optimal_constant_forecast_is_p() {
        for p in [0.5, 0.95, 0.586] {
            let f = optimal_constant_forecast(ScoringRuleKind::Brier, q(p));
            assert_eq!(f.value(), p);
            let f = optimal_constant_forecast(ScoringRuleKind::Log, q(p));
            assert_eq!(f.value(), p);
        }
    }

    #[test]
    fn strict_propriety_on_grid() {
        // expected_score(q, p) > expected_score(p, p) for every q != p
        for rule in [ScoringRuleKind::Brier, ScoringRuleKind::Log] {
            for pi in 1..100 {
                let p = pi as f64 / 100.0;
                let at_p = expected_score(rule, q(p), q(p));
                for qi in 1..100 {
                    if qi == pi {
                        continue;
                    }
                    let cand = qi as f64 / 100.0;
                    assert!(
                        expected_score(rule, q(cand), q(p)) > at_p,
                        "{rule:?}: q={cand} should lose to q=p={p}"
                    );
                }
            }
        }
    }

    #[test]
    fn empirical_mean_score_basics() {
        let pairs = vec![(q(1.0), z(true)); 10];
        let (mean, var) = empirical_mean_score(ScoringRuleKind::Brier, pairs).unwrap();
        assert_eq!((mean, var), (0.0, 0.0));

        let empty: Vec<(Forecast, CoverageOutcome)> = vec![];
        assert!(matches!(
            empirical_mean_score(ScoringRuleKind::Brier, empty),
            Err(ScoringError::EmptyScores)
        ));
    }

    #[test]
    fn infinite_losses_propagate_through_means() {
        let pairs = vec![(q(1.0), z(true)), (q(1.0), z(false)), (q(1.0), z(true))];
        let (mean, _) = empirical_mean_score(ScoringRuleKind::Log, pairs).unwrap();
        assert_eq!(mean, f64::INFINITY);

        let mut acc = MomentAccumulator::new();
        acc.push(f64::INFINITY);
        acc.push(1.0);
        assert_eq!(acc.mean(), f64::INFINITY);
        assert_eq!(acc.infinite_count(), 1);
        assert_eq!(acc.count(), 2);
    }

    #[test]
    fn accumulator_merge_matches_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut whole = MomentAccumulator::new();
        for &x in &xs {
            whole.push(x);
        }
        let mut left = MomentAccumulator::new();
        let mut right = MomentAccumulator::new();
        for &x in &xs[..37] {
            left.push(x);
        }
        for &x in &xs[37..] {
            right.push(x);
        }
        left.merge(right);
        assert_eq!(left.count(), whole.count());
        assert!((left.mean() - whole.mean()).abs() < 1e-12);
        assert!((left.population_variance() - whole.population_variance()).abs() < 1e-12);
    }
}
