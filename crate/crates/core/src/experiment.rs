//! End-to-end window-model experiment: trains the conditional-coverage
//! tables and composite forecasts on one record stream, checks θ-freeness
//! across the sweep, then scores every forecast strategy on an independent
//! stream. Everything downstream of the seed is deterministic.

use thiserror::Error;

use crate::composite::{
    CompositeCounter, CompositeError, CompositeEvaluationAccumulator, CompositeForecastTrainer,
    CompositeForecasts, CompositeScoreRow, CompositeSummary,
};
use crate::conditioning::{
    theta_freeness, Binning, ConditionalCoverageTable, ConditioningError, ForecastRule, NamedRule,
    RuleEvaluationAccumulator, RuleScore, TableBuilder, ThetaFreenessReport,
};
use crate::model::{ProcedureId, SimulationConfig, StatisticId, TrialRecord};
use crate::scoring::ScoringRuleKind;
use crate::simulation::{
    fold_sweep, ConfigSummary, CoverageCounter, SimulationError, StreamPhase, SweepResult,
    TrialAccumulator, DEFAULT_CHUNK,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("the experiment needs the np, ump, and sd procedures")]
    MissingProcedures,
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Conditioning(#[from] ConditioningError),
    #[error(transparent)]
    Composite(#[from] CompositeError),
}

/// Tunables with the defaults used throughout: 50 bins for the spanned
/// relative width, 25 for the folded width, a 200-count occupancy floor,
/// and the default θ-freeness tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    pub bins_d: usize,
    pub bins_w: usize,
    pub min_occupancy: u64,
    pub theta_free_tolerance: f64,
    pub chunk_size: u64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            bins_d: 50,
            bins_w: 25,
            min_occupancy: crate::conditioning::DEFAULT_MIN_OCCUPANCY,
            theta_free_tolerance: crate::conditioning::DEFAULT_THETA_FREE_TOLERANCE,
            chunk_size: DEFAULT_CHUNK,
        }
    }
}

#[derive(Clone)]
struct TrainAccumulator {
    np_d: TableBuilder,
    ump_w: TableBuilder,
    composite: CompositeForecastTrainer,
    coverage: CoverageCounter,
}

impl TrialAccumulator for TrainAccumulator {
    fn observe(&mut self, record: &TrialRecord) {
        self.np_d.observe(record);
        self.ump_w.observe(record);
        self.composite.observe(record);
        self.coverage.observe(record);
    }

    fn merge(&mut self, other: Self) {
        self.np_d.merge(other.np_d);
        self.ump_w.merge(other.ump_w);
        self.composite.merge(other.composite);
        self.coverage.merge(other.coverage);
    }
}

#[derive(Clone)]
struct EvalAccumulator {
    coverage: CoverageCounter,
    composite: CompositeCounter,
    rules: RuleEvaluationAccumulator,
    composite_rules: CompositeEvaluationAccumulator,
}

impl TrialAccumulator for EvalAccumulator {
    fn observe(&mut self, record: &TrialRecord) {
        self.coverage.observe(record);
        self.composite.observe(record);
        self.rules.observe(record);
        self.composite_rules.observe(record);
    }

    fn merge(&mut self, other: Self) {
        self.coverage.merge(other.coverage);
        self.composite.merge(other.composite);
        self.rules.merge(other.rules);
        self.composite_rules.merge(other.composite_rules);
    }
}

/// Everything the reports need, produced by one train + eval pass.
#[derive(Debug, Clone)]
pub struct SubmarineExperiment {
    pub config: SimulationConfig,
    pub options: ExperimentOptions,
    pub procedures: Vec<ProcedureId>,

    /// Pooled conditional-coverage tables from the training stream.
    pub np_table: ConditionalCoverageTable,
    pub ump_table: ConditionalCoverageTable,
    pub np_per_config_tables: Vec<ConditionalCoverageTable>,
    pub ump_per_config_tables: Vec<ConditionalCoverageTable>,

    pub np_freeness: ThetaFreenessReport,
    pub ump_freeness: ThetaFreenessReport,
    /// Stability of the nesting-conditional coverages across the sweep.
    pub nesting_freeness: ThetaFreenessReport,

    /// Rule-of-thumb recommendations for the two width statistics.
    pub np_recommendation: ForecastRule,
    pub ump_recommendation: ForecastRule,

    /// Composite forecasts trained alongside the tables.
    pub forecasts: CompositeForecasts,
    pub train_composite: CompositeSummary,
    pub per_config_train_composite: Vec<CompositeCounter>,
    pub train_coverage: CoverageCounter,
    pub per_config_train_coverage: Vec<CoverageCounter>,

    /// Evaluation-stream results.
    pub table1: Vec<RuleScore>,
    pub table2: Vec<CompositeScoreRow>,
    pub composite_eval: CompositeSummary,
    pub per_config_composite: Vec<CompositeCounter>,
    pub per_config_coverage: Vec<CoverageCounter>,
    pub pooled_coverage: CoverageCounter,
    pub sweep: SweepResult,
}

impl SubmarineExperiment {
    pub fn table1_row(&self, id: &str) -> Option<&RuleScore> {
        self.table1.iter().find(|r| r.id == id)
    }

    pub fn table2_row(&self, id: &str) -> Option<&CompositeScoreRow> {
        self.table2.iter().find(|r| r.id == id)
    }
}

/// Run the full experiment. The procedure set must include np, ump, and
/// sd; trivial is carried through the summaries when requested.
pub fn run_experiment(
    config: &SimulationConfig,
    procedures: &[ProcedureId],
    options: &ExperimentOptions,
) -> Result<SubmarineExperiment, ExperimentError> {
    for required in [ProcedureId::Np, ProcedureId::Ump, ProcedureId::Sd] {
        if !procedures.contains(&required) {
            return Err(ExperimentError::MissingProcedures);
        }
    }
    config.validate().map_err(SimulationError::from)?;

    let binning_d = Binning::equal_width(0.0, 1.0, options.bins_d)?;
    let binning_w = Binning::equal_width(0.0, 0.5, options.bins_w)?;

    // --- training stream: tables and composite forecasts ---
    let make_train = || TrainAccumulator {
        np_d: TableBuilder::new(
            StatisticId::RelativeWidth,
            ProcedureId::Np,
            binning_d.clone(),
        ),
        ump_w: TableBuilder::new(
            StatisticId::FoldedWidth,
            ProcedureId::Ump,
            binning_w.clone(),
        ),
        composite: CompositeForecastTrainer::new(options.bins_w),
        coverage: CoverageCounter::new(),
    };
    let train = fold_sweep(
        config,
        procedures,
        StreamPhase::Train,
        options.chunk_size,
        make_train,
    )?;

    let np_per_config_tables: Vec<_> = train.iter().map(|a| a.np_d.finalize()).collect();
    let ump_per_config_tables: Vec<_> = train.iter().map(|a| a.ump_w.finalize()).collect();
    let per_config_train_composite: Vec<_> = train.iter().map(|a| *a.composite.counter()).collect();
    let per_config_train_coverage: Vec<_> = train.iter().map(|a| a.coverage.clone()).collect();

    let mut pooled_train = train[0].clone();
    for acc in &train[1..] {
        pooled_train.merge(acc.clone());
    }
    let np_table = pooled_train.np_d.finalize();
    let ump_table = pooled_train.ump_w.finalize();
    let forecasts = pooled_train.composite.finalize()?;
    let train_composite = pooled_train.composite.counter().summary()?;
    let train_coverage = pooled_train.coverage;

    // --- θ-freeness across the sweep ---
    let single_config = config.n_configs() < 2;
    let np_freeness = if single_config {
        constant_report(StatisticId::RelativeWidth, options)
    } else {
        theta_freeness(
            &np_per_config_tables,
            options.theta_free_tolerance,
            options.min_occupancy,
        )?
    };
    let ump_freeness = if single_config {
        constant_report(StatisticId::FoldedWidth, options)
    } else {
        theta_freeness(
            &ump_per_config_tables,
            options.theta_free_tolerance,
            options.min_occupancy,
        )?
    };
    let nesting_freeness =
        nesting_freeness_report(&per_config_train_composite, options, single_config);

    let alpha = config.alpha;
    let np_recommendation = crate::conditioning::recommend_forecast(&np_freeness, &np_table, alpha);
    let ump_recommendation =
        crate::conditioning::recommend_forecast(&ump_freeness, &ump_table, alpha);

    // --- evaluation stream: coverage and forecast scores ---
    let table1_rules = vec![
        NamedRule::new("constant_1", ProcedureId::Np, ForecastRule::ConstantOne),
        NamedRule::new(
            "constant_level",
            ProcedureId::Np,
            ForecastRule::ConstantLevel { alpha },
        ),
        NamedRule::new(
            "np_width",
            ProcedureId::Np,
            ForecastRule::TableLookup {
                table: np_table.clone(),
                alpha,
            },
        ),
        NamedRule::new(
            "ump_width",
            ProcedureId::Ump,
            ForecastRule::TableLookup {
                table: ump_table.clone(),
                alpha,
            },
        ),
    ];
    let make_eval = || EvalAccumulator {
        coverage: CoverageCounter::new(),
        composite: CompositeCounter::new(),
        rules: RuleEvaluationAccumulator::new(table1_rules.clone(), ScoringRuleKind::Brier),
        composite_rules: CompositeEvaluationAccumulator::new(
            forecasts.clone(),
            ScoringRuleKind::Brier,
        ),
    };
    let eval = fold_sweep(
        config,
        procedures,
        StreamPhase::Eval,
        options.chunk_size,
        make_eval,
    )?;

    let per_config_coverage: Vec<_> = eval.iter().map(|a| a.coverage.clone()).collect();
    let per_config_composite: Vec<_> = eval.iter().map(|a| a.composite).collect();
    let mut pooled_eval = eval[0].clone();
    for acc in &eval[1..] {
        pooled_eval.merge(acc.clone());
    }
    let table1 = pooled_eval.rules.finalize()?;
    let table2 = pooled_eval.composite_rules.finalize()?;
    let composite_eval = pooled_eval.composite.summary()?;
    let pooled_coverage = pooled_eval.coverage;

    let sweep = assemble_sweep(
        config,
        &per_config_coverage,
        &pooled_coverage,
        &table1,
        &table2,
    );

    Ok(SubmarineExperiment {
        config: config.clone(),
        options: options.clone(),
        procedures: procedures.to_vec(),
        np_table,
        ump_table,
        np_per_config_tables,
        ump_per_config_tables,
        np_freeness,
        ump_freeness,
        nesting_freeness,
        np_recommendation,
        ump_recommendation,
        forecasts,
        train_composite,
        per_config_train_composite,
        train_coverage,
        per_config_train_coverage,
        table1,
        table2,
        composite_eval,
        per_config_composite,
        per_config_coverage,
        pooled_coverage,
        sweep,
    })
}

// A single configuration cannot witness θ-dependence; report a zero
// deviation with nothing compared.
fn constant_report(statistic: StatisticId, options: &ExperimentOptions) -> ThetaFreenessReport {
    ThetaFreenessReport {
        statistic,
        max_cross_config_deviation: 0.0,
        tolerance: options.theta_free_tolerance,
        is_theta_free: true,
        bins_compared: 0,
    }
}

// Range of the per-config nesting-conditional coverages, per outcome class.
fn nesting_freeness_report(
    per_config: &[CompositeCounter],
    options: &ExperimentOptions,
    single_config: bool,
) -> ThetaFreenessReport {
    let mut max_deviation = 0.0_f64;
    let mut bins_compared = 0;
    if !single_config {
        for outcome in 0..2 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            let mut seen = 0;
            for counter in per_config {
                if counter.outcome_n[outcome] >= options.min_occupancy.max(1) {
                    let c =
                        counter.outcome_either[outcome] as f64 / counter.outcome_n[outcome] as f64;
                    lo = lo.min(c);
                    hi = hi.max(c);
                    seen += 1;
                }
            }
            if seen >= 2 {
                bins_compared += 1;
                max_deviation = max_deviation.max(hi - lo);
            }
        }
    }
    ThetaFreenessReport {
        statistic: StatisticId::Nesting,
        max_cross_config_deviation: max_deviation,
        tolerance: options.theta_free_tolerance,
        is_theta_free: max_deviation <= options.theta_free_tolerance,
        bins_compared,
    }
}

fn assemble_sweep(
    config: &SimulationConfig,
    per_config_coverage: &[CoverageCounter],
    pooled_coverage: &CoverageCounter,
    table1: &[RuleScore],
    table2: &[CompositeScoreRow],
) -> SweepResult {
    let designs = config.designs();
    let summary_for = |counter: &CoverageCounter, key: Option<(f64, f64)>| {
        let coverage_by_procedure = counter
            .covered
            .keys()
            .map(|&p| (p, counter.coverage(p).unwrap()))
            .collect();
        let mut mean_scores = std::collections::BTreeMap::new();
        for row in table1 {
            let value = match key {
                Some(k) => row
                    .per_config
                    .iter()
                    .find(|(ck, _)| *ck == k)
                    .map(|(_, m)| *m),
                None => Some(row.mean),
            };
            if let Some(m) = value {
                mean_scores.insert((row.id.clone(), row.rule_kind), m);
            }
        }
        for row in table2 {
            let value = match key {
                Some(k) => row
                    .per_config
                    .iter()
                    .find(|(ck, _)| *ck == k)
                    .map(|(_, m)| *m),
                None => Some(row.mean),
            };
            if let Some(m) = value {
                mean_scores.insert((format!("composite_{}", row.id), row.rule_kind), m);
            }
        }
        ConfigSummary {
            n: counter.n,
            coverage_by_procedure,
            mean_scores,
        }
    };

    let per_config = designs
        .iter()
        .zip(per_config_coverage)
        .map(|(design, counter)| {
            let key = (design.theta(), design.hull_width());
            (key, summary_for(counter, Some(key)))
        })
        .collect();
    SweepResult {
        per_config,
        pooled: summary_for(pooled_coverage, None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_experiment_is_consistent() {
        let config =
            SimulationConfig::new(vec![0.0, 5.0], vec![10.0, 30.0], 4_000, 17, 0.5).unwrap();
        let experiment = run_experiment(
            &config,
            &ProcedureId::SUBMARINE,
            &ExperimentOptions::default(),
        )
        .unwrap();

        assert_eq!(experiment.sweep.per_config.len(), 4);
        assert_eq!(experiment.sweep.pooled.n, 16_000);
        assert!(experiment
            .sweep
            .per_config
            .iter()
            .all(|(_, s)| s.n == 4_000));

        // the tower identity holds for the pooled tables
        let weighted = experiment.np_table.weighted_mean_coverage().unwrap();
        let marginal = experiment
            .np_table
            .bins()
            .iter()
            .map(|b| b.count)
            .sum::<u64>();
        assert_eq!(marginal, 16_000);
        assert!((0.0..=1.0).contains(&weighted));

        // table rows are present and ordered by information content
        let ids: Vec<&str> = experiment.table1.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(
            ids,
            ["constant_1", "constant_level", "np_width", "ump_width"]
        );
        let ids: Vec<&str> = experiment.table2.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(
            ids,
            [
                "constant_1",
                "constant_p_joint",
                "nesting_conditional",
                "max_width"
            ]
        );

        // per-config scores carry their configuration keys
        let row = experiment.table1_row("np_width").unwrap();
        assert_eq!(row.per_config.len(), 4);
        for ((theta, width), _) in &row.per_config {
            assert!(config.theta_grid.contains(theta));
            assert!(config.hull_width_grid.contains(width));
        }
    }

    #[test]
    fn experiment_requires_the_composite_procedures() {
        let config = SimulationConfig::new(vec![0.0], vec![10.0], 100, 3, 0.5).unwrap();
        let err = run_experiment(
            &config,
            &[ProcedureId::Np, ProcedureId::Ump],
            &ExperimentOptions::default(),
        );
        assert!(matches!(err, Err(ExperimentError::MissingProcedures)));
    }
}
