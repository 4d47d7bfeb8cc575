//! Seeded, reproducible Monte Carlo engine: generates trial records over
//! the configuration sweep and reduces them into coverage summaries.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::composite;
use crate::model::{
    covers, ModelError, ProcedureId, SimulationConfig, StatisticId, TrialRecord, UniformDesign,
};
use crate::procedures::{
    self, folded_width, relative_width, NormalSample, ProcedureError, SubmarineSample,
};
use crate::rng::{self, domain};
use crate::scoring::ScoringRuleKind;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("procedure `{0}` cannot be simulated on the window design")]
    UnsupportedProcedure(ProcedureId),
    #[error("no records carry procedure `{0}`")]
    MissingProcedure(ProcedureId),
    #[error("no records to summarize")]
    NoRecords,
    #[error("procedure set must be non-empty")]
    NoProcedures,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Procedure(#[from] ProcedureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Independent record streams derived from the same user seed; lookup
/// tables are built on one and scored on the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPhase {
    Train,
    Eval,
}

impl StreamPhase {
    fn word(self) -> u64 {
        match self {
            StreamPhase::Train => 0,
            StreamPhase::Eval => 1,
        }
    }
}

/// Default number of trials per parallel work unit.
pub const DEFAULT_CHUNK: u64 = 1 << 14;

fn validated_procedures(procedures: &[ProcedureId]) -> Result<Vec<ProcedureId>, SimulationError> {
    if procedures.is_empty() {
        return Err(SimulationError::NoProcedures);
    }
    let mut procs = procedures.to_vec();
    procs.sort();
    procs.dedup();
    if let Some(&bad) = procs.iter().find(|&&p| p == ProcedureId::T) {
        return Err(SimulationError::UnsupportedProcedure(bad));
    }
    Ok(procs)
}

/// Simulate one experiment: two uniform draws on the design window plus
/// every requested interval, outcome, and conditioning statistic.
/// A pure function of its arguments.
pub fn simulate_trial(
    seed: u64,
    phase: StreamPhase,
    config_index: u64,
    trial_index: u64,
    design: UniformDesign,
    procedures_set: &[ProcedureId],
) -> TrialRecord {
    let mut rng = rng::stream(
        seed,
        &[domain::SUBMARINE, phase.word(), config_index, trial_index],
    );
    let (lo, _) = design.support();
    let width = design.hull_width();
    let x1 = lo + rng.gen::<f64>() * width;
    let x2 = lo + rng.gen::<f64>() * width;
    let sample = SubmarineSample::new(x1, x2, design).expect("draws land inside the window");

    let mut intervals = BTreeMap::new();
    let mut outcomes = BTreeMap::new();
    for &p in procedures_set {
        let interval = match p {
            ProcedureId::Np => procedures::np_interval(&sample),
            ProcedureId::Ump => procedures::ump_interval(&sample),
            ProcedureId::Sd => procedures::sd_interval(&sample),
            ProcedureId::Trivial => procedures::trivial_interval(),
            ProcedureId::T => unreachable!("rejected by validation"),
        };
        outcomes.insert(p, covers(&interval, design.theta()));
        intervals.insert(p, interval);
    }

    let mut stats = BTreeMap::new();
    let d = sample.spread() / width;
    stats.insert(StatisticId::RelativeWidth, d);
    stats.insert(StatisticId::FoldedWidth, folded_width(d));
    if let (Some(ump), Some(sd)) = (
        intervals.get(&ProcedureId::Ump),
        intervals.get(&ProcedureId::Sd),
    ) {
        let nesting = composite::classify_nesting(ump, sd)
            .expect("same-sample intervals share their midpoint");
        let outer = match nesting {
            composite::NestingOutcome::SdInsideUmp => ump,
            composite::NestingOutcome::UmpInsideSd => sd,
        };
        stats.insert(StatisticId::Nesting, nesting.as_stat());
        stats.insert(
            StatisticId::MaxWidth,
            relative_width(outer, width).expect("window intervals have relative width in [0,1]"),
        );
    }

    TrialRecord {
        theta: design.theta(),
        hull_width: design.hull_width(),
        x1,
        x2,
        intervals,
        outcomes,
        stats,
    }
}

/// Sequential record stream over the whole sweep, config-major.
pub fn run_sweep(
    config: &SimulationConfig,
    procedures_set: &[ProcedureId],
    phase: StreamPhase,
) -> Result<impl Iterator<Item = TrialRecord>, SimulationError> {
    config.validate()?;
    let procs = validated_procedures(procedures_set)?;
    let designs = config.designs();
    let seed = config.seed;
    let n_trials = config.n_trials;
    Ok(designs
        .into_iter()
        .enumerate()
        .flat_map(move |(config_index, design)| {
            let procs = procs.clone();
            (0..n_trials).map(move |trial| {
                simulate_trial(seed, phase, config_index as u64, trial, design, &procs)
            })
        }))
}

/// Anything that reduces a record stream and merges associatively.
pub trait TrialAccumulator: Send {
    fn observe(&mut self, record: &TrialRecord);
    fn merge(&mut self, other: Self)
    where
        Self: Sized;
}

/// Parallel fold over the sweep, one accumulator per configuration.
///
/// Work is split into fixed chunks and partial accumulators are merged in
/// chunk-index order, so the result is identical for any thread count.
pub fn fold_sweep<A, F>(
    config: &SimulationConfig,
    procedures_set: &[ProcedureId],
    phase: StreamPhase,
    chunk_size: u64,
    make: F,
) -> Result<Vec<A>, SimulationError>
where
    A: TrialAccumulator,
    F: Fn() -> A + Sync + Send,
{
    config.validate()?;
    let procs = validated_procedures(procedures_set)?;
    let designs = config.designs();
    let n_trials = config.n_trials;
    let chunk = chunk_size.max(1);
    let chunks_per_config = n_trials.div_ceil(chunk);

    let tasks: Vec<(u64, u64)> = (0..designs.len() as u64)
        .flat_map(|ci| (0..chunks_per_config).map(move |ck| (ci, ck)))
        .collect();

    let partials: Vec<(u64, A)> = tasks
        .par_iter()
        .map(|&(config_index, chunk_index)| {
            let mut acc = make();
            let start = chunk_index * chunk;
            let end = (start + chunk).min(n_trials);
            let design = designs[config_index as usize];
            for trial in start..end {
                let record =
                    simulate_trial(config.seed, phase, config_index, trial, design, &procs);
                acc.observe(&record);
            }
            (config_index, acc)
        })
        .collect();

    let mut out: Vec<Option<A>> = (0..designs.len()).map(|_| None).collect();
    for (config_index, acc) in partials {
        match &mut out[config_index as usize] {
            slot @ None => *slot = Some(acc),
            Some(existing) => existing.merge(acc),
        }
    }
    Ok(out
        .into_iter()
        .map(|slot| slot.expect("every config has at least one chunk"))
        .collect())
}

/// Fraction of records whose outcome for `procedure` is 1.
pub fn marginal_coverage<'a, I>(records: I, procedure: ProcedureId) -> Result<f64, SimulationError>
where
    I: IntoIterator<Item = &'a TrialRecord>,
{
    let mut total = 0u64;
    let mut carrying = 0u64;
    let mut covered = 0u64;
    for record in records {
        total += 1;
        if let Some(z) = record.outcome(procedure) {
            carrying += 1;
            covered += z.covered() as u64;
        }
    }
    if total == 0 {
        return Err(SimulationError::NoRecords);
    }
    if carrying == 0 {
        return Err(SimulationError::MissingProcedure(procedure));
    }
    Ok(covered as f64 / carrying as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointMode {
    Either,
    Both,
}

/// Fraction of records where either (or both) of the procedures cover.
pub fn joint_coverage<'a, I>(
    records: I,
    a: ProcedureId,
    b: ProcedureId,
    mode: JointMode,
) -> Result<f64, SimulationError>
where
    I: IntoIterator<Item = &'a TrialRecord>,
{
    let mut total = 0u64;
    let mut carrying = 0u64;
    let mut hits = 0u64;
    for record in records {
        total += 1;
        let (za, zb) = match (record.outcome(a), record.outcome(b)) {
            (Some(za), Some(zb)) => (za.covered(), zb.covered()),
            (None, _) => return Err(SimulationError::MissingProcedure(a)),
            (_, None) => return Err(SimulationError::MissingProcedure(b)),
        };
        carrying += 1;
        let hit = match mode {
            JointMode::Either => za || zb,
            JointMode::Both => za && zb,
        };
        hits += hit as u64;
    }
    if total == 0 || carrying == 0 {
        return Err(SimulationError::NoRecords);
    }
    Ok(hits as f64 / carrying as f64)
}

/// Integer coverage counters per procedure; exact under any merge order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoverageCounter {
    pub n: u64,
    pub covered: BTreeMap<ProcedureId, u64>,
}

impl CoverageCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn coverage(&self, procedure: ProcedureId) -> Option<f64> {
        self.covered
            .get(&procedure)
            .map(|&c| c as f64 / self.n as f64)
    }
}

impl TrialAccumulator for CoverageCounter {
    fn observe(&mut self, record: &TrialRecord) {
        self.n += 1;
        for (&p, z) in &record.outcomes {
            *self.covered.entry(p).or_insert(0) += z.covered() as u64;
        }
    }

    fn merge(&mut self, other: Self) {
        self.n += other.n;
        for (p, c) in other.covered {
            *self.covered.entry(p).or_insert(0) += c;
        }
    }
}

/// Per-configuration summary of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSummary {
    pub n: u64,
    pub coverage_by_procedure: BTreeMap<ProcedureId, f64>,
    pub mean_scores: BTreeMap<(String, ScoringRuleKind), f64>,
}

/// Sweep output: one summary per (theta, hull_width) in grid order, plus
/// the pooled summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub per_config: Vec<((f64, f64), ConfigSummary)>,
    pub pooled: ConfigSummary,
}

impl SweepResult {
    pub fn get(&self, theta: f64, hull_width: f64) -> Option<&ConfigSummary> {
        self.per_config
            .iter()
            .find(|((t, w), _)| *t == theta && *w == hull_width)
            .map(|(_, s)| s)
    }
}

fn fmt_f64(value: f64) -> String {
    // shortest round-trip decimal; infinities as bare inf literals
    format!("{value}")
}

/// Raw-record CSV: one row per (trial, procedure), fixed column order.
/// Infinite endpoints print as `-inf` / `inf`.
pub fn write_records_csv<W, I>(mut out: W, records: I) -> Result<(), SimulationError>
where
    W: Write,
    I: IntoIterator<Item = TrialRecord>,
{
    writeln!(out, "theta,hull_width,x1,x2,proc,lower,upper,covered,D,W")?;
    for record in records {
        let d = record.stat(StatisticId::RelativeWidth).unwrap_or(f64::NAN);
        let w = record.stat(StatisticId::FoldedWidth).unwrap_or(f64::NAN);
        for (&proc, interval) in &record.intervals {
            let z = record.outcome(proc).map(|z| z.covered() as u8).unwrap_or(0);
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                fmt_f64(record.theta),
                fmt_f64(record.hull_width),
                fmt_f64(record.x1),
                fmt_f64(record.x2),
                proc,
                fmt_f64(interval.lower()),
                fmt_f64(interval.upper()),
                z,
                fmt_f64(d),
                fmt_f64(w),
            )?;
        }
    }
    Ok(())
}

/// One normal-model t-interval trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TIntervalTrial {
    pub width: f64,
    pub covered: bool,
    /// Zero sample variance collapsed the interval to a point.
    pub degenerate: bool,
}

/// Simulate `n_trials` t intervals at one (mu, sigma) configuration.
pub fn run_t_trials(
    n_per_sample: usize,
    mu: f64,
    sigma: f64,
    alpha: f64,
    n_trials: u64,
    seed: u64,
) -> Result<Vec<TIntervalTrial>, SimulationError> {
    if n_per_sample < 2 {
        return Err(ProcedureError::SampleTooSmall.into());
    }
    let trials: Vec<TIntervalTrial> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng::stream(seed, &[domain::NORMAL, trial]);
            let values: Vec<f64> = (0..n_per_sample)
                .map(|_| mu + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let sample = NormalSample::new(values, mu, sigma).expect("valid by construction");
            let interval = procedures::t_interval(&sample, alpha).expect("alpha validated");
            TIntervalTrial {
                width: interval.width(),
                covered: interval.contains(mu),
                degenerate: interval.width() == 0.0,
            }
        })
        .collect();
    Ok(trials)
}

/// Coverage within equal-count width deciles: `(count, coverage)` per
/// decile, ordered from narrowest to widest.
pub fn width_decile_coverages(trials: &[TIntervalTrial]) -> Vec<(u64, f64)> {
    let mut order: Vec<usize> = (0..trials.len()).collect();
    order.sort_by(|&a, &b| trials[a].width.total_cmp(&trials[b].width));
    let n = trials.len();
    (0..10)
        .map(|k| {
            let start = k * n / 10;
            let end = (k + 1) * n / 10;
            let count = (end - start) as u64;
            let covered = order[start..end]
                .iter()
                .filter(|&&i| trials[i].covered)
                .count();
            (count, covered as f64 / count.max(1) as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SimulationConfig {
        SimulationConfig::new(vec![0.0, 3.0], vec![10.0, 40.0], 500, 99, 0.5).unwrap()
    }

    #[test]
    fn sweep_is_deterministic() {
        let config = small_config();
        let a: Vec<TrialRecord> = run_sweep(&config, &ProcedureId::SUBMARINE, StreamPhase::Train)
            .unwrap()
            .collect();
        let b: Vec<TrialRecord> = run_sweep(&config, &ProcedureId::SUBMARINE, StreamPhase::Train)
            .unwrap()
            .collect();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4 * 500);
        // eval phase is a different stream
        let c: Vec<TrialRecord> = run_sweep(&config, &ProcedureId::SUBMARINE, StreamPhase::Eval)
            .unwrap()
            .collect();
        assert_ne!(a, c);
    }

    #[test]
    fn records_respect_model_invariants() {
        let config = small_config();
        for record in run_sweep(&config, &ProcedureId::SUBMARINE, StreamPhase::Train).unwrap() {
            let half = 0.5 * record.hull_width;
            assert!(record.x1 >= record.theta - half && record.x1 <= record.theta + half);
            assert!(record.x2 >= record.theta - half && record.x2 <= record.theta + half);
            for (&p, interval) in &record.intervals {
                let z = record.outcome(p).unwrap();
                assert_eq!(z, covers(interval, record.theta));
            }
            let d = record.stat(StatisticId::RelativeWidth).unwrap();
            assert!((0.0..=1.0).contains(&d));
            let w = record.stat(StatisticId::FoldedWidth).unwrap();
            assert!((w - folded_width(d)).abs() < 1e-15);
        }
    }

    #[test]
    fn trivial_coverage_is_one_and_t_is_rejected() {
        let config = small_config();
        let records: Vec<TrialRecord> =
            run_sweep(&config, &ProcedureId::SUBMARINE, StreamPhase::Train)
                .unwrap()
                .collect();
        assert_eq!(
            marginal_coverage(&records, ProcedureId::Trivial).unwrap(),
            1.0
        );
        assert!(matches!(
            run_sweep(&config, &[ProcedureId::T], StreamPhase::Train).map(|_| ()),
            Err(SimulationError::UnsupportedProcedure(ProcedureId::T))
        ));
    }

    #[test]
    fn joint_coverage_modes() {
        let config = small_config();
        let records: Vec<TrialRecord> =
            run_sweep(&config, &ProcedureId::SUBMARINE, StreamPhase::Train)
                .unwrap()
                .collect();
        let either = joint_coverage(
            &records,
            ProcedureId::Trivial,
            ProcedureId::Np,
            JointMode::Either,
        )
        .unwrap();
        assert_eq!(either, 1.0);
        // NP and UMP cover at exactly the same times
        let np = marginal_coverage(&records, ProcedureId::Np).unwrap();
        for mode in [JointMode::Either, JointMode::Both] {
            let j = joint_coverage(&records, ProcedureId::Np, ProcedureId::Ump, mode).unwrap();
            assert_eq!(j, np);
        }
        assert!(matches!(
            marginal_coverage(&records, ProcedureId::T),
            Err(SimulationError::MissingProcedure(ProcedureId::T))
        ));
    }

    #[test]
    fn fold_is_chunk_size_invariant() {
        let config = small_config();
        let coarse: Vec<CoverageCounter> = fold_sweep(
            &config,
            &ProcedureId::SUBMARINE,
            StreamPhase::Train,
            DEFAULT_CHUNK,
            CoverageCounter::new,
        )
        .unwrap();
        let fine: Vec<CoverageCounter> = fold_sweep(
            &config,
            &ProcedureId::SUBMARINE,
            StreamPhase::Train,
            7,
            CoverageCounter::new,
        )
        .unwrap();
        assert_eq!(coarse, fine);
        assert_eq!(coarse.len(), 4);
        assert!(coarse.iter().all(|c| c.n == 500));
    }

    #[test]
    fn records_csv_shape() {
        let config = SimulationConfig::new(vec![0.0], vec![10.0], 3, 5, 0.5).unwrap();
        let records = run_sweep(&config, &ProcedureId::SUBMARINE, StreamPhase::Train).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&mut buf, records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "theta,hull_width,x1,x2,proc,lower,upper,covered,D,W"
        );
        let body: Vec<&str> = lines.collect();
        assert_eq!(body.len(), 3 * 4);
        let trivial_row = body.iter().find(|l| l.contains(",trivial,")).unwrap();
        assert!(trivial_row.contains("-inf"));
        assert!(trivial_row.contains(",inf,"));
    }

    #[test]
    fn t_trials_deterministic_and_flagged() {
        let a = run_t_trials(5, 0.0, 1.0, 0.05, 200, 11).unwrap();
        let b = run_t_trials(5, 0.0, 1.0, 0.05, 200, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|t| !t.degenerate && t.width > 0.0));
        let deciles = width_decile_coverages(&a);
        assert_eq!(deciles.len(), 10);
        assert_eq!(deciles.iter().map(|(n, _)| n).sum::<u64>(), 200);
    }
}
