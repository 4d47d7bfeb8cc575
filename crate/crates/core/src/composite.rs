//! The composite UMP + SD procedure: nesting classification, conditional
//! coverage by nesting direction, gap probabilities, and the joint
//! forecast comparison.
//!
//! Both intervals are centered on the sample mean, so one always contains
//! the other; nesting reduces to a width comparison.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::conditioning::Binning;
use crate::model::{Interval, ProcedureId, StatisticId, TrialRecord};
use crate::scoring::{score, Forecast, ScoringRuleKind};
use crate::simulation::TrialAccumulator;

#[derive(Debug, Error)]
pub enum CompositeError {
    #[error("intervals do not share a midpoint: {0} vs {1}")]
    MidpointMismatch(f64, f64),
    #[error("record lacks the composite outcomes or statistics")]
    IncompleteRecord,
    #[error("no records with nesting outcome {0:?}")]
    NoSuchOutcome(NestingOutcome),
    #[error("no records")]
    Empty,
}

/// Which of the two same-midpoint intervals contains the other. Ties on
/// width (probability zero) classify as UMP-inside-SD.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NestingOutcome {
    SdInsideUmp,
    UmpInsideSd,
}

impl NestingOutcome {
    pub const ALL: [NestingOutcome; 2] = [NestingOutcome::SdInsideUmp, NestingOutcome::UmpInsideSd];

    pub fn index(self) -> usize {
        match self {
            NestingOutcome::SdInsideUmp => 0,
            NestingOutcome::UmpInsideSd => 1,
        }
    }

    /// Encoding used in `TrialRecord::stats`.
    pub fn as_stat(self) -> f64 {
        self.index() as f64
    }

    pub fn from_stat(value: f64) -> Option<Self> {
        if value == 0.0 {
            Some(NestingOutcome::SdInsideUmp)
        } else if value == 1.0 {
            Some(NestingOutcome::UmpInsideSd)
        } else {
            None
        }
    }
}

/// Classify the nested pair. The intervals must share their midpoint to a
/// 1e-9 relative tolerance; a mismatch signals a procedure bug upstream.
pub fn classify_nesting(ump: &Interval, sd: &Interval) -> Result<NestingOutcome, CompositeError> {
    let (mu, ms) = (ump.midpoint(), sd.midpoint());
    let scale = mu.abs().max(ms.abs()).max(1.0);
    if (mu - ms).abs() > 1e-9 * scale {
        return Err(CompositeError::MidpointMismatch(mu, ms));
    }
    if sd.width() < ump.width() {
        Ok(NestingOutcome::SdInsideUmp)
    } else {
        Ok(NestingOutcome::UmpInsideSd)
    }
}

/// Composite view of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeRecord<'a> {
    pub trial: &'a TrialRecord,
    pub nesting: NestingOutcome,
    /// Relative width of whichever interval contains the other.
    pub outer_relative_width: f64,
    pub either_covered: bool,
    pub both_covered: bool,
}

impl<'a> CompositeRecord<'a> {
    pub fn from_trial(trial: &'a TrialRecord) -> Result<Self, CompositeError> {
        let zu = trial
            .outcome(ProcedureId::Ump)
            .ok_or(CompositeError::IncompleteRecord)?
            .covered();
        let zs = trial
            .outcome(ProcedureId::Sd)
            .ok_or(CompositeError::IncompleteRecord)?
            .covered();
        let nesting = trial
            .stat(StatisticId::Nesting)
            .and_then(NestingOutcome::from_stat)
            .ok_or(CompositeError::IncompleteRecord)?;
        let outer_relative_width = trial
            .stat(StatisticId::MaxWidth)
            .ok_or(CompositeError::IncompleteRecord)?;
        Ok(Self {
            trial,
            nesting,
            outer_relative_width,
            either_covered: zu || zs,
            both_covered: zu && zs,
        })
    }

    /// The inner interval misses while the outer covers. Because the pair
    /// is nested, this is exactly "either but not both".
    pub fn gap(&self) -> bool {
        self.either_covered && !self.both_covered
    }
}

/// Integer tallies of the composite events; exact under any merge order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompositeCounter {
    pub n: u64,
    pub either: u64,
    pub both: u64,
    pub outcome_n: [u64; 2],
    pub outcome_either: [u64; 2],
    pub outcome_gap: [u64; 2],
}

impl CompositeCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn summary(&self) -> Result<CompositeSummary, CompositeError> {
        if self.n == 0 {
            return Err(CompositeError::Empty);
        }
        let n = self.n as f64;
        Ok(CompositeSummary {
            n: self.n,
            p_either: self.either as f64 / n,
            p_both: self.both as f64 / n,
            nesting_conditional: [
                (self.outcome_n[0] > 0)
                    .then(|| self.outcome_either[0] as f64 / self.outcome_n[0] as f64),
                (self.outcome_n[1] > 0)
                    .then(|| self.outcome_either[1] as f64 / self.outcome_n[1] as f64),
            ],
            gap: GapProbability {
                sd_inside_ump: self.outcome_gap[0] as f64 / n,
                ump_inside_sd: self.outcome_gap[1] as f64 / n,
                pooled: (self.outcome_gap[0] + self.outcome_gap[1]) as f64 / n,
                n: self.n,
            },
        })
    }
}

impl TrialAccumulator for CompositeCounter {
    fn observe(&mut self, record: &TrialRecord) {
        let rec = CompositeRecord::from_trial(record)
            .expect("composite accumulation needs ump+sd records");
        self.n += 1;
        self.either += rec.either_covered as u64;
        self.both += rec.both_covered as u64;
        let k = rec.nesting.index();
        self.outcome_n[k] += 1;
        self.outcome_either[k] += rec.either_covered as u64;
        self.outcome_gap[k] += rec.gap() as u64;
    }

    fn merge(&mut self, other: Self) {
        self.n += other.n;
        self.either += other.either;
        self.both += other.both;
        for k in 0..2 {
            self.outcome_n[k] += other.outcome_n[k];
            self.outcome_either[k] += other.outcome_either[k];
            self.outcome_gap[k] += other.outcome_gap[k];
        }
    }
}

/// Probability that the outer interval covers while the inner one misses,
/// split by nesting direction (joint probabilities over all trials) and
/// pooled. The pooled value equals either-coverage minus both-coverage by
/// the set identity on indicators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapProbability {
    pub sd_inside_ump: f64,
    pub ump_inside_sd: f64,
    pub pooled: f64,
    pub n: u64,
}

/// Coverage and gap summary of a composite record stream.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeSummary {
    pub n: u64,
    pub p_either: f64,
    pub p_both: f64,
    /// P(either covers | nesting outcome), indexed by `NestingOutcome`.
    pub nesting_conditional: [Option<f64>; 2],
    pub gap: GapProbability,
}

fn count_records<'a, I>(records: I) -> Result<CompositeCounter, CompositeError>
where
    I: IntoIterator<Item = &'a TrialRecord>,
{
    let mut counter = CompositeCounter::new();
    for record in records {
        CompositeRecord::from_trial(record)?;
        counter.observe(record);
    }
    if counter.n == 0 {
        return Err(CompositeError::Empty);
    }
    Ok(counter)
}

/// P(either covers | nesting outcome).
pub fn nesting_conditional_coverage<'a, I>(
    records: I,
    outcome: NestingOutcome,
) -> Result<f64, CompositeError>
where
    I: IntoIterator<Item = &'a TrialRecord>,
{
    let counter = count_records(records)?;
    counter.summary()?.nesting_conditional[outcome.index()]
        .ok_or(CompositeError::NoSuchOutcome(outcome))
}

/// Gap probabilities per nesting direction and pooled.
pub fn gap_probability<'a, I>(records: I) -> Result<GapProbability, CompositeError>
where
    I: IntoIterator<Item = &'a TrialRecord>,
{
    Ok(count_records(records)?.summary()?.gap)
}

// Integer [miss, cover] tallies of the either-event per outer-width bin.
#[derive(Debug, Clone, PartialEq)]
struct OutcomeWidthTable {
    binning: Binning,
    counts: Vec<[u64; 2]>,
}

impl OutcomeWidthTable {
    fn new(binning: Binning) -> Self {
        let bins = binning.len();
        Self {
            binning,
            counts: vec![[0; 2]; bins],
        }
    }

    fn coverage(&self, bin: usize) -> Option<f64> {
        let [miss, cover] = self.counts[bin];
        let n = miss + cover;
        (n > 0).then(|| cover as f64 / n as f64)
    }
}

/// Trained composite forecasts: the pooled joint-coverage constant, the
/// two nesting-conditional coverages, and the two-level (nesting x
/// outer-width-bin) lookup behind the "max width" strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeForecasts {
    p_joint: f64,
    nesting_coverage: [Option<f64>; 2],
    width_tables: [OutcomeWidthTable; 2],
}

impl CompositeForecasts {
    pub fn p_joint(&self) -> f64 {
        self.p_joint
    }

    pub fn nesting_coverage(&self, outcome: NestingOutcome) -> Option<f64> {
        self.nesting_coverage[outcome.index()]
    }

    /// Forecast for the nesting-conditional strategy; the joint constant
    /// stands in when an outcome class was never observed in training.
    pub fn nesting_forecast(&self, outcome: NestingOutcome) -> Forecast {
        let q = self.nesting_coverage[outcome.index()].unwrap_or(self.p_joint);
        Forecast::new(q).expect("coverage estimates lie in [0,1]")
    }

    /// Forecast for the max-width strategy: coverage given the nesting
    /// outcome and the bin of the outer interval's relative width. Falls
    /// back to the nesting-conditional coverage, then to the constant.
    pub fn max_width_forecast(&self, outcome: NestingOutcome, outer_width: f64) -> Forecast {
        let table = &self.width_tables[outcome.index()];
        let q = table
            .binning
            .index_of(outer_width)
            .and_then(|bin| table.coverage(bin))
            .or(self.nesting_coverage[outcome.index()])
            .unwrap_or(self.p_joint);
        Forecast::new(q).expect("coverage estimates lie in [0,1]")
    }
}

/// Builds `CompositeForecasts` from a training stream.
#[derive(Debug, Clone)]
pub struct CompositeForecastTrainer {
    counter: CompositeCounter,
    width_tables: [OutcomeWidthTable; 2],
}

impl CompositeForecastTrainer {
    /// Default outer-width binning: 25 bins on [0, 1/2], the folded-width
    /// range (the SD relative width is constant and below 1/2).
    pub fn new(width_bins: usize) -> Self {
        let binning =
            Binning::equal_width(0.0, 0.5, width_bins.max(1)).expect("valid binning parameters");
        Self {
            counter: CompositeCounter::new(),
            width_tables: [
                OutcomeWidthTable::new(binning.clone()),
                OutcomeWidthTable::new(binning),
            ],
        }
    }

    pub fn finalize(&self) -> Result<CompositeForecasts, CompositeError> {
        let summary = self.counter.summary()?;
        Ok(CompositeForecasts {
            p_joint: summary.p_either,
            nesting_coverage: summary.nesting_conditional,
            width_tables: self.width_tables.clone(),
        })
    }

    /// The raw tallies observed while training.
    pub fn counter(&self) -> &CompositeCounter {
        &self.counter
    }
}

impl TrialAccumulator for CompositeForecastTrainer {
    fn observe(&mut self, record: &TrialRecord) {
        let rec =
            CompositeRecord::from_trial(record).expect("composite training needs ump+sd records");
        self.counter.observe(record);
        let table = &mut self.width_tables[rec.nesting.index()];
        if let Some(bin) = table.binning.index_of(rec.outer_relative_width) {
            table.counts[bin][rec.either_covered as usize] += 1;
        }
    }

    fn merge(&mut self, other: Self) {
        self.counter.merge(other.counter);
        for (mine, theirs) in self.width_tables.iter_mut().zip(other.width_tables) {
            assert_eq!(mine.binning, theirs.binning, "mismatched binning");
            for (m, t) in mine.counts.iter_mut().zip(theirs.counts) {
                m[0] += t[0];
                m[1] += t[1];
            }
        }
    }
}

/// The four strategies of the joint forecast comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CompositeRuleKind {
    ConstantOne,
    ConstantJoint,
    NestingConditional,
    MaxWidth,
}

impl CompositeRuleKind {
    const ALL: [CompositeRuleKind; 4] = [
        CompositeRuleKind::ConstantOne,
        CompositeRuleKind::ConstantJoint,
        CompositeRuleKind::NestingConditional,
        CompositeRuleKind::MaxWidth,
    ];

    fn id(self) -> &'static str {
        match self {
            CompositeRuleKind::ConstantOne => "constant_1",
            CompositeRuleKind::ConstantJoint => "constant_p_joint",
            CompositeRuleKind::NestingConditional => "nesting_conditional",
            CompositeRuleKind::MaxWidth => "max_width",
        }
    }

    fn num_cells(self, forecasts: &CompositeForecasts) -> usize {
        match self {
            CompositeRuleKind::ConstantOne | CompositeRuleKind::ConstantJoint => 1,
            CompositeRuleKind::NestingConditional => 2,
            // (outcome, bin) plus one fallback cell per outcome
            CompositeRuleKind::MaxWidth => 2 * (forecasts.width_tables[0].binning.len() + 1),
        }
    }

    fn cell_of(self, rec: &CompositeRecord<'_>, forecasts: &CompositeForecasts) -> usize {
        match self {
            CompositeRuleKind::ConstantOne | CompositeRuleKind::ConstantJoint => 0,
            CompositeRuleKind::NestingConditional => rec.nesting.index(),
            CompositeRuleKind::MaxWidth => {
                let k = rec.nesting.index();
                let table = &forecasts.width_tables[k];
                let stride = table.binning.len() + 1;
                let bin = table
                    .binning
                    .index_of(rec.outer_relative_width)
                    .filter(|&b| table.coverage(b).is_some())
                    .unwrap_or(table.binning.len());
                k * stride + bin
            }
        }
    }

    fn cell_forecast(self, cell: usize, forecasts: &CompositeForecasts) -> Forecast {
        match self {
            CompositeRuleKind::ConstantOne => Forecast::ONE,
            CompositeRuleKind::ConstantJoint => {
                Forecast::new(forecasts.p_joint).expect("p_joint lies in [0,1]")
            }
            CompositeRuleKind::NestingConditional => {
                forecasts.nesting_forecast(NestingOutcome::ALL[cell])
            }
            CompositeRuleKind::MaxWidth => {
                let stride = forecasts.width_tables[0].binning.len() + 1;
                let outcome = NestingOutcome::ALL[cell / stride];
                let bin = cell % stride;
                let table = &forecasts.width_tables[outcome.index()];
                let q = if bin < table.binning.len() {
                    table.coverage(bin)
                } else {
                    None
                };
                let q = q
                    .or(forecasts.nesting_coverage[outcome.index()])
                    .unwrap_or(forecasts.p_joint);
                Forecast::new(q).expect("coverage estimates lie in [0,1]")
            }
        }
    }
}

/// One row of the joint forecast comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeScoreRow {
    pub id: String,
    pub rule_kind: ScoringRuleKind,
    pub mean: f64,
    pub across_config_variance: f64,
    /// Mean score within each (theta, hull_width) configuration.
    pub per_config: Vec<((f64, f64), f64)>,
}

impl CompositeScoreRow {
    pub fn per_config_means(&self) -> impl Iterator<Item = f64> + '_ {
        self.per_config.iter().map(|(_, m)| *m)
    }
}

/// Exact per-(config, rule, cell, outcome) tallies against the
/// either-covers event.
#[derive(Debug, Clone)]
pub struct CompositeEvaluationAccumulator {
    forecasts: CompositeForecasts,
    kind: ScoringRuleKind,
    configs: BTreeMap<(u64, u64), Vec<Vec<[u64; 2]>>>,
}

impl CompositeEvaluationAccumulator {
    pub fn new(forecasts: CompositeForecasts, kind: ScoringRuleKind) -> Self {
        Self {
            forecasts,
            kind,
            configs: BTreeMap::new(),
        }
    }

    fn empty_cells(forecasts: &CompositeForecasts) -> Vec<Vec<[u64; 2]>> {
        CompositeRuleKind::ALL
            .iter()
            .map(|r| vec![[0u64; 2]; r.num_cells(forecasts)])
            .collect()
    }

    pub fn finalize(&self) -> Result<Vec<CompositeScoreRow>, CompositeError> {
        if self.configs.is_empty() {
            return Err(CompositeError::Empty);
        }
        let mut out = Vec::with_capacity(CompositeRuleKind::ALL.len());
        for (rule_index, rule) in CompositeRuleKind::ALL.iter().enumerate() {
            let mut per_config = Vec::with_capacity(self.configs.len());
            let mut pooled: Vec<[u64; 2]> = vec![[0; 2]; rule.num_cells(&self.forecasts)];
            for (&(theta_bits, width_bits), cells) in &self.configs {
                let cells = &cells[rule_index];
                per_config.push((
                    (f64::from_bits(theta_bits), f64::from_bits(width_bits)),
                    self.mean_from_cells(*rule, cells),
                ));
                for (p, c) in pooled.iter_mut().zip(cells) {
                    p[0] += c[0];
                    p[1] += c[1];
                }
            }
            let mean = self.mean_from_cells(*rule, &pooled);
            let k = per_config.len() as f64;
            let grand = per_config.iter().map(|(_, m)| m).sum::<f64>() / k;
            let across_config_variance = per_config
                .iter()
                .map(|(_, m)| (m - grand) * (m - grand))
                .sum::<f64>()
                / k;
            out.push(CompositeScoreRow {
                id: rule.id().to_string(),
                rule_kind: self.kind,
                mean,
                across_config_variance,
                per_config,
            });
        }
        Ok(out)
    }

    fn mean_from_cells(&self, rule: CompositeRuleKind, cells: &[[u64; 2]]) -> f64 {
        let mut total = 0u64;
        let mut sum = 0.0;
        for (cell, counts) in cells.iter().enumerate() {
            let n = counts[0] + counts[1];
            if n == 0 {
                continue;
            }
            total += n;
            let q = rule.cell_forecast(cell, &self.forecasts);
            if counts[0] > 0 {
                sum += counts[0] as f64 * score(self.kind, q, false.into());
            }
            if counts[1] > 0 {
                sum += counts[1] as f64 * score(self.kind, q, true.into());
            }
        }
        if total == 0 {
            f64::NAN
        } else {
            sum / total as f64
        }
    }
}

impl TrialAccumulator for CompositeEvaluationAccumulator {
    fn observe(&mut self, record: &TrialRecord) {
        let rec =
            CompositeRecord::from_trial(record).expect("composite evaluation needs ump+sd records");
        let key = (record.theta.to_bits(), record.hull_width.to_bits());
        let forecasts = &self.forecasts;
        let cells = self
            .configs
            .entry(key)
            .or_insert_with(|| Self::empty_cells(forecasts));
        for (rule_index, rule) in CompositeRuleKind::ALL.iter().enumerate() {
            let cell = rule.cell_of(&rec, &self.forecasts);
            cells[rule_index][cell][rec.either_covered as usize] += 1;
        }
    }

    fn merge(&mut self, other: Self) {
        for (key, other_cells) in other.configs {
            let forecasts = &self.forecasts;
            let cells = self
                .configs
                .entry(key)
                .or_insert_with(|| Self::empty_cells(forecasts));
            for (mine, theirs) in cells.iter_mut().zip(other_cells) {
                for (m, t) in mine.iter_mut().zip(theirs) {
                    m[0] += t[0];
                    m[1] += t[1];
                }
            }
        }
    }
}

/// Score the four joint strategies against the either-covers outcome.
/// Train the forecasts on a separate stream first.
pub fn evaluate_composite_forecasts<'a, I>(
    records: I,
    forecasts: &CompositeForecasts,
    kind: ScoringRuleKind,
) -> Result<Vec<CompositeScoreRow>, CompositeError>
where
    I: IntoIterator<Item = &'a TrialRecord>,
{
    let mut acc = CompositeEvaluationAccumulator::new(forecasts.clone(), kind);
    let mut any = false;
    for record in records {
        CompositeRecord::from_trial(record)?;
        acc.observe(record);
        any = true;
    }
    if !any {
        return Err(CompositeError::Empty);
    }
    acc.finalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ProcedureId as P, SimulationConfig};
    use crate::simulation::{run_sweep, StreamPhase};

    fn interval(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn classify_by_width() {
        assert_eq!(
            classify_nesting(&interval(0.0, 8.0), &interval(2.5, 5.5)).unwrap(),
            NestingOutcome::SdInsideUmp
        );
        assert_eq!(
            classify_nesting(&interval(3.0, 5.0), &interval(1.5, 6.5)).unwrap(),
            NestingOutcome::UmpInsideSd
        );
        // equal widths take the UMP-inside branch
        assert_eq!(
            classify_nesting(&interval(1.0, 3.0), &interval(1.0, 3.0)).unwrap(),
            NestingOutcome::UmpInsideSd
        );
        assert!(matches!(
            classify_nesting(&interval(0.0, 2.0), &interval(5.0, 7.0)),
            Err(CompositeError::MidpointMismatch(..))
        ));
    }

    fn records(n: u64, seed: u64) -> Vec<TrialRecord> {
        let config = SimulationConfig::new(vec![0.0], vec![10.0], n, seed, 0.5).unwrap();
        run_sweep(&config, &[P::Ump, P::Sd], StreamPhase::Train)
            .unwrap()
            .collect()
    }

    #[test]
    fn composite_record_extraction() {
        let recs = records(200, 21);
        for rec in &recs {
            let c = CompositeRecord::from_trial(rec).unwrap();
            assert!(c.either_covered >= c.both_covered);
            assert!((0.0..=0.5).contains(&c.outer_relative_width));
            // outer width is the wider of the two relative widths
            let w_ump = rec.interval(P::Ump).unwrap().width() / rec.hull_width;
            let w_sd = rec.interval(P::Sd).unwrap().width() / rec.hull_width;
            assert!((c.outer_relative_width - w_ump.max(w_sd)).abs() < 1e-12);
        }
    }

    #[test]
    fn incomplete_records_are_rejected() {
        let config = SimulationConfig::new(vec![0.0], vec![10.0], 10, 3, 0.5).unwrap();
        let recs: Vec<TrialRecord> = run_sweep(&config, &[P::Np], StreamPhase::Train)
            .unwrap()
            .collect();
        assert!(matches!(
            CompositeRecord::from_trial(&recs[0]),
            Err(CompositeError::IncompleteRecord)
        ));
        assert!(gap_probability(&recs).is_err());
    }

    #[test]
    fn gap_identity_is_exact() {
        let recs = records(30_000, 5);
        let gap = gap_probability(&recs).unwrap();
        let either = crate::simulation::joint_coverage(
            &recs,
            P::Ump,
            P::Sd,
            crate::simulation::JointMode::Either,
        )
        .unwrap();
        let both = crate::simulation::joint_coverage(
            &recs,
            P::Ump,
            P::Sd,
            crate::simulation::JointMode::Both,
        )
        .unwrap();
        assert!((gap.pooled - (either - both)).abs() <= 1e-12);
        assert!((gap.pooled - (gap.sd_inside_ump + gap.ump_inside_sd)).abs() <= 1e-15);
    }

    #[test]
    fn law_of_total_probability_over_nesting() {
        let recs = records(30_000, 9);
        let counter = count_records(&recs).unwrap();
        let summary = counter.summary().unwrap();
        let p_sd_in = counter.outcome_n[0] as f64 / counter.n as f64;
        let p_ump_in = counter.outcome_n[1] as f64 / counter.n as f64;
        let mix = p_sd_in * summary.nesting_conditional[0].unwrap()
            + p_ump_in * summary.nesting_conditional[1].unwrap();
        assert!((mix - summary.p_either).abs() <= 1e-12);
    }

    // constant forecasts have exact count identities: scoring 1 yields
    // 1 - p_hat, and scoring p_hat on the same records yields
    // p_hat(1 - p_hat)
    #[test]
    fn constant_forecast_identities() {
        let recs = records(25_000, 41);
        let either: Vec<bool> = recs
            .iter()
            .map(|r| CompositeRecord::from_trial(r).unwrap().either_covered)
            .collect();
        let p_hat = either.iter().filter(|&&z| z).count() as f64 / either.len() as f64;

        let mean_constant_one = either
            .iter()
            .map(|&z| score(ScoringRuleKind::Brier, Forecast::ONE, z.into()))
            .sum::<f64>()
            / either.len() as f64;
        assert!((mean_constant_one - (1.0 - p_hat)).abs() <= 1e-12);

        let q = Forecast::new(p_hat).unwrap();
        let mean_constant_p = either
            .iter()
            .map(|&z| score(ScoringRuleKind::Brier, q, z.into()))
            .sum::<f64>()
            / either.len() as f64;
        assert!((mean_constant_p - p_hat * (1.0 - p_hat)).abs() <= 1e-12);
    }

    #[test]
    fn evaluation_matches_direct_scoring() {
        let train = records(20_000, 31);
        let mut trainer = CompositeForecastTrainer::new(25);
        for rec in &train {
            trainer.observe(rec);
        }
        let forecasts = trainer.finalize().unwrap();

        let eval = records(5_000, 32);
        let rows = evaluate_composite_forecasts(&eval, &forecasts, ScoringRuleKind::Brier).unwrap();
        assert_eq!(rows.len(), 4);

        for row in &rows {
            let direct: f64 = eval
                .iter()
                .map(|rec| {
                    let c = CompositeRecord::from_trial(rec).unwrap();
                    let q = match row.id.as_str() {
                        "constant_1" => Forecast::ONE,
                        "constant_p_joint" => Forecast::new(forecasts.p_joint()).unwrap(),
                        "nesting_conditional" => forecasts.nesting_forecast(c.nesting),
                        "max_width" => {
                            forecasts.max_width_forecast(c.nesting, c.outer_relative_width)
                        }
                        other => panic!("unexpected row {other}"),
                    };
                    score(ScoringRuleKind::Brier, q, c.either_covered.into())
                })
                .sum::<f64>()
                / eval.len() as f64;
            assert!(
                (row.mean - direct).abs() < 1e-12,
                "{}: {} vs {}",
                row.id,
                row.mean,
                direct
            );
        }
    }
}
