//! Empirical conditional-coverage tables over θ-free statistics, the
//! θ-freeness check across the sweep, and the forecast rules built from
//! them.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::model::{ProcedureId, StatisticId, TrialRecord};
use crate::scoring::{score, Forecast, ScoringRuleKind};
use crate::simulation::TrialAccumulator;

#[derive(Debug, Error)]
pub enum ConditioningError {
    #[error("binning needs at least two strictly increasing finite edges")]
    InvalidBinning,
    #[error("statistic `{0}` missing from records")]
    MissingStatistic(StatisticId),
    #[error("procedure `{0}` missing from records")]
    MissingProcedure(ProcedureId),
    #[error("{count} statistic values fell outside the binning range")]
    ValuesOutOfRange { count: u64 },
    #[error("value {value} outside the binning range [{lo}, {hi}]")]
    ValueOutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("tables must share statistic, procedure, and binning")]
    TableMismatch,
    #[error("theta-freeness needs at least two per-config tables")]
    TooFewConfigs,
    #[error("no records observed")]
    Empty,
    #[error("table csv: {msg} at line {line}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Default bin occupancy below which a bin is noise, not signal.
pub const DEFAULT_MIN_OCCUPANCY: u64 = 200;

/// Default absolute coverage deviation tolerated across configurations.
///
/// The deviation statistic is a max of ranges over ~40 bins x 100
/// configurations, so even for an exactly θ-free statistic it concentrates
/// near five per-bin standard errors (~0.055 at 50 bins x 1e5 trials);
/// 0.08 clears that noise floor while rejecting genuinely θ-dependent
/// statistics by a wide margin (the scale-dependent absolute-width
/// counterexample deviates by ~0.3).
pub const DEFAULT_THETA_FREE_TOLERANCE: f64 = 0.08;

/// A partition of a statistic's range. Bins are left-closed/right-open;
/// the last bin is closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Binning {
    edges: Vec<f64>,
}

impl Binning {
    pub fn new(edges: Vec<f64>) -> Result<Self, ConditioningError> {
        if edges.len() < 2
            || edges.iter().any(|e| !e.is_finite())
            || edges.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(ConditioningError::InvalidBinning);
        }
        Ok(Self { edges })
    }

    pub fn equal_width(lo: f64, hi: f64, bins: usize) -> Result<Self, ConditioningError> {
        if bins == 0 || !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(ConditioningError::InvalidBinning);
        }
        let mut edges: Vec<f64> = (0..=bins)
            .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
            .collect();
        edges[0] = lo;
        edges[bins] = hi;
        Self::new(edges)
    }

    /// Number of bins.
    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn range(&self) -> (f64, f64) {
        (self.edges[0], *self.edges.last().unwrap())
    }

    pub fn bounds(&self, bin: usize) -> (f64, f64) {
        (self.edges[bin], self.edges[bin + 1])
    }

    /// Containing bin, or None outside the range.
    pub fn index_of(&self, value: f64) -> Option<usize> {
        let (lo, hi) = self.range();
        if value.is_nan() || value < lo || value > hi {
            return None;
        }
        if value == hi {
            return Some(self.len() - 1);
        }
        Some(self.edges.partition_point(|&e| e <= value) - 1)
    }
}

/// One bin of an empirical conditional-coverage table. Empty bins carry
/// no estimate, never a fabricated value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinEstimate {
    pub count: u64,
    pub coverage: Option<f64>,
}

/// Binned estimate of coverage probability given a statistic: the ex-post
/// forecast lookup table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalCoverageTable {
    statistic: StatisticId,
    procedure: ProcedureId,
    binning: Binning,
    bins: Vec<BinEstimate>,
}

/// A resolved lookup: the containing bin and its estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinLookup {
    pub bin: usize,
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    pub coverage: Option<f64>,
}

impl ConditionalCoverageTable {
    pub fn statistic(&self) -> StatisticId {
        self.statistic
    }

    pub fn procedure(&self) -> ProcedureId {
        self.procedure
    }

    pub fn binning(&self) -> &Binning {
        &self.binning
    }

    pub fn bins(&self) -> &[BinEstimate] {
        &self.bins
    }

    pub fn total_count(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// Count-weighted mean of per-bin coverage: the tower-property face of
    /// the table, equal to the marginal coverage on the same records.
    pub fn weighted_mean_coverage(&self) -> Option<f64> {
        let total = self.total_count();
        if total == 0 {
            return None;
        }
        let sum: f64 = self
            .bins
            .iter()
            .filter_map(|b| b.coverage.map(|c| c * b.count as f64))
            .sum();
        Some(sum / total as f64)
    }

    /// Min and max per-bin coverage over bins with at least `min_count`
    /// observations.
    pub fn coverage_range(&self, min_count: u64) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut seen = false;
        for b in &self.bins {
            if b.count >= min_count.max(1) {
                if let Some(c) = b.coverage {
                    lo = lo.min(c);
                    hi = hi.max(c);
                    seen = true;
                }
            }
        }
        seen.then_some((lo, hi))
    }

    pub fn lookup(&self, value: f64) -> Result<BinLookup, ConditioningError> {
        let (lo, hi) = self.binning.range();
        let bin = self
            .binning
            .index_of(value)
            .ok_or(ConditioningError::ValueOutOfRange { value, lo, hi })?;
        let (lo, hi) = self.binning.bounds(bin);
        let estimate = self.bins[bin];
        Ok(BinLookup {
            bin,
            lo,
            hi,
            count: estimate.count,
            coverage: estimate.coverage,
        })
    }
}

/// Mergeable builder for a conditional-coverage table; counts are integers
/// so merging is exact and order-free.
#[derive(Debug, Clone)]
pub struct TableBuilder {
    statistic: StatisticId,
    procedure: ProcedureId,
    binning: Binning,
    totals: Vec<u64>,
    covered: Vec<u64>,
    out_of_range: u64,
    missing: u64,
    observed: u64,
}

impl TableBuilder {
    pub fn new(statistic: StatisticId, procedure: ProcedureId, binning: Binning) -> Self {
        let bins = binning.len();
        Self {
            statistic,
            procedure,
            binning,
            totals: vec![0; bins],
            covered: vec![0; bins],
            out_of_range: 0,
            missing: 0,
            observed: 0,
        }
    }

    pub fn push(&mut self, value: f64, covered: bool) {
        self.observed += 1;
        match self.binning.index_of(value) {
            Some(bin) => {
                self.totals[bin] += 1;
                self.covered[bin] += covered as u64;
            }
            None => self.out_of_range += 1,
        }
    }

    pub fn observed(&self) -> u64 {
        self.observed
    }

    pub fn out_of_range(&self) -> u64 {
        self.out_of_range
    }

    pub fn missing(&self) -> u64 {
        self.missing
    }

    pub fn finalize(&self) -> ConditionalCoverageTable {
        let bins = self
            .totals
            .iter()
            .zip(&self.covered)
            .map(|(&n, &c)| BinEstimate {
                count: n,
                coverage: (n > 0).then(|| c as f64 / n as f64),
            })
            .collect();
        ConditionalCoverageTable {
            statistic: self.statistic,
            procedure: self.procedure,
            binning: self.binning.clone(),
            bins,
        }
    }
}

impl TrialAccumulator for TableBuilder {
    fn observe(&mut self, record: &TrialRecord) {
        match (record.stat(self.statistic), record.outcome(self.procedure)) {
            (Some(value), Some(z)) => self.push(value, z.covered()),
            _ => self.missing += 1,
        }
    }

    fn merge(&mut self, other: Self) {
        assert_eq!(self.binning, other.binning, "mismatched binning");
        for (a, b) in self.totals.iter_mut().zip(&other.totals) {
            *a += b;
        }
        for (a, b) in self.covered.iter_mut().zip(&other.covered) {
            *a += b;
        }
        self.out_of_range += other.out_of_range;
        self.missing += other.missing;
        self.observed += other.observed;
    }
}

/// Tabulate coverage of `procedure` as a function of `statistic` over the
/// records. Pool across configurations only after θ-freeness has been
/// established; otherwise build per-configuration tables.
pub fn build_table<'a, I>(
    records: I,
    procedure: ProcedureId,
    statistic: StatisticId,
    binning: &Binning,
) -> Result<ConditionalCoverageTable, ConditioningError>
where
    I: IntoIterator<Item = &'a TrialRecord>,
{
    let mut builder = TableBuilder::new(statistic, procedure, binning.clone());
    let mut saw_statistic = false;
    let mut saw_procedure = false;
    let mut any = false;
    for record in records {
        any = true;
        saw_statistic |= record.stat(statistic).is_some();
        saw_procedure |= record.outcome(procedure).is_some();
        builder.observe(record);
    }
    if !any {
        return Err(ConditioningError::Empty);
    }
    if !saw_statistic {
        return Err(ConditioningError::MissingStatistic(statistic));
    }
    if !saw_procedure {
        return Err(ConditioningError::MissingProcedure(procedure));
    }
    if builder.out_of_range() > 0 {
        return Err(ConditioningError::ValuesOutOfRange {
            count: builder.out_of_range(),
        });
    }
    Ok(builder.finalize())
}

/// A table lookup resolved into a forecast, with the explicit fallback to
/// the nominal level when the bin holds no estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableForecast {
    pub forecast: Forecast,
    pub fallback: bool,
    pub lookup: BinLookup,
}

/// The per-bin conditional coverage of the containing bin; empty bins fall
/// back to the constant `1 - alpha`.
pub fn lookup_forecast(
    table: &ConditionalCoverageTable,
    value: f64,
    alpha: f64,
) -> Result<TableForecast, ConditioningError> {
    let lookup = table.lookup(value)?;
    match lookup.coverage {
        Some(q) => Ok(TableForecast {
            forecast: Forecast::new(q).expect("coverage estimates lie in [0,1]"),
            fallback: false,
            lookup,
        }),
        None => Ok(TableForecast {
            forecast: Forecast::new(1.0 - alpha).expect("alpha lies in (0,1)"),
            fallback: true,
            lookup,
        }),
    }
}

/// Verdict on whether conditional coverage given a statistic has the same
/// shape in every sweep configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaFreenessReport {
    pub statistic: StatisticId,
    pub max_cross_config_deviation: f64,
    pub tolerance: f64,
    pub is_theta_free: bool,
    /// Bins that met the occupancy floor in at least two configurations.
    pub bins_compared: usize,
}

/// Compare per-configuration tables bin by bin: the deviation is the
/// largest range of per-config coverage estimates over bins meeting the
/// occupancy floor.
pub fn theta_freeness(
    per_config_tables: &[ConditionalCoverageTable],
    tolerance: f64,
    min_occupancy: u64,
) -> Result<ThetaFreenessReport, ConditioningError> {
    if per_config_tables.len() < 2 {
        return Err(ConditioningError::TooFewConfigs);
    }
    let first = &per_config_tables[0];
    if per_config_tables.iter().any(|t| {
        t.statistic != first.statistic
            || t.procedure != first.procedure
            || t.binning != first.binning
    }) {
        return Err(ConditioningError::TableMismatch);
    }

    let mut max_deviation = 0.0_f64;
    let mut bins_compared = 0;
    for bin in 0..first.binning.len() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut seen = 0;
        for table in per_config_tables {
            let estimate = table.bins[bin];
            if estimate.count >= min_occupancy.max(1) {
                if let Some(c) = estimate.coverage {
                    lo = lo.min(c);
                    hi = hi.max(c);
                    seen += 1;
                }
            }
        }
        if seen >= 2 {
            bins_compared += 1;
            max_deviation = max_deviation.max(hi - lo);
        }
    }

    Ok(ThetaFreenessReport {
        statistic: first.statistic,
        max_cross_config_deviation: max_deviation,
        tolerance,
        is_theta_free: max_deviation <= tolerance,
        bins_compared,
    })
}

/// A forecast strategy for coverage events.
#[derive(Debug, Clone)]
pub enum ForecastRule {
    /// Always forecast certain coverage.
    ConstantOne,
    /// The nominal level `1 - alpha`.
    ConstantLevel { alpha: f64 },
    /// A pooled joint-coverage constant for composite procedures.
    ConstantJoint { p_joint: f64 },
    /// Conditional-coverage lookup with the constant-level fallback.
    TableLookup {
        table: ConditionalCoverageTable,
        alpha: f64,
    },
    /// Reads the realized indicator itself; simulation-only reference.
    Oracle,
}

impl ForecastRule {
    /// The forecast this rule issues for one record.
    pub fn forecast(
        &self,
        record: &TrialRecord,
        procedure: ProcedureId,
    ) -> Result<Forecast, ConditioningError> {
        match self {
            ForecastRule::ConstantOne => Ok(Forecast::ONE),
            ForecastRule::ConstantLevel { alpha } => {
                Ok(Forecast::new(1.0 - alpha).expect("alpha lies in (0,1)"))
            }
            ForecastRule::ConstantJoint { p_joint } => {
                Ok(Forecast::new(*p_joint).expect("p_joint lies in [0,1]"))
            }
            ForecastRule::TableLookup { table, alpha } => {
                let value = record
                    .stat(table.statistic())
                    .ok_or(ConditioningError::MissingStatistic(table.statistic()))?;
                Ok(lookup_forecast(table, value, *alpha)?.forecast)
            }
            ForecastRule::Oracle => {
                let z = record
                    .outcome(procedure)
                    .ok_or(ConditioningError::MissingProcedure(procedure))?;
                Ok(Forecast::new(z.indicator()).expect("indicator is 0 or 1"))
            }
        }
    }

    /// Number of distinct forecast cells the rule can emit. Piecewise
    /// constancy is what makes count-based scoring exact.
    fn num_cells(&self) -> usize {
        match self {
            ForecastRule::ConstantOne
            | ForecastRule::ConstantLevel { .. }
            | ForecastRule::ConstantJoint { .. } => 1,
            // one cell per bin plus the fallback cell
            ForecastRule::TableLookup { table, .. } => table.binning().len() + 1,
            // one cell per outcome value
            ForecastRule::Oracle => 2,
        }
    }

    /// Cell index for one record. Out-of-range lookups route to the
    /// fallback cell.
    fn cell_of(
        &self,
        record: &TrialRecord,
        procedure: ProcedureId,
    ) -> Result<usize, ConditioningError> {
        match self {
            ForecastRule::ConstantOne
            | ForecastRule::ConstantLevel { .. }
            | ForecastRule::ConstantJoint { .. } => Ok(0),
            ForecastRule::TableLookup { table, .. } => {
                let value = record
                    .stat(table.statistic())
                    .ok_or(ConditioningError::MissingStatistic(table.statistic()))?;
                match table.binning().index_of(value) {
                    Some(bin) if table.bins()[bin].coverage.is_some() => Ok(bin),
                    _ => Ok(table.binning().len()),
                }
            }
            ForecastRule::Oracle => {
                let z = record
                    .outcome(procedure)
                    .ok_or(ConditioningError::MissingProcedure(procedure))?;
                Ok(z.covered() as usize)
            }
        }
    }

    /// Forecast attached to a cell index.
    fn cell_forecast(&self, cell: usize) -> f64 {
        match self {
            ForecastRule::ConstantOne => 1.0,
            ForecastRule::ConstantLevel { alpha } => 1.0 - alpha,
            ForecastRule::ConstantJoint { p_joint } => *p_joint,
            ForecastRule::TableLookup { table, alpha } => {
                if cell < table.binning().len() {
                    table.bins()[cell].coverage.unwrap_or(1.0 - alpha)
                } else {
                    1.0 - alpha
                }
            }
            ForecastRule::Oracle => cell as f64,
        }
    }
}

/// The §3.4.4 decision: if the statistic is θ-free and its conditional
/// coverage actually varies, forecast from the table; otherwise default to
/// the nominal level.
pub fn recommend_forecast(
    report: &ThetaFreenessReport,
    table: &ConditionalCoverageTable,
    alpha: f64,
) -> ForecastRule {
    debug_assert_eq!(report.statistic, table.statistic());
    if report.is_theta_free {
        if let Some((lo, hi)) = table.coverage_range(DEFAULT_MIN_OCCUPANCY) {
            if hi - lo > report.tolerance {
                return ForecastRule::TableLookup {
                    table: table.clone(),
                    alpha,
                };
            }
        }
    }
    ForecastRule::ConstantLevel { alpha }
}

/// A rule bound to an output row: which procedure's coverage it forecasts
/// and the token it is reported under.
#[derive(Debug, Clone)]
pub struct NamedRule {
    pub id: String,
    pub procedure: ProcedureId,
    pub rule: ForecastRule,
}

impl NamedRule {
    pub fn new(id: &str, procedure: ProcedureId, rule: ForecastRule) -> Self {
        Self {
            id: id.to_string(),
            procedure,
            rule,
        }
    }
}

/// Scores of one rule over the sweep: pooled mean and the variance of
/// per-configuration means (the table's variance column).
#[derive(Debug, Clone, PartialEq)]
pub struct RuleScore {
    pub id: String,
    pub rule_kind: ScoringRuleKind,
    pub mean: f64,
    pub across_config_variance: f64,
    /// Mean score within each (theta, hull_width) configuration.
    pub per_config: Vec<((f64, f64), f64)>,
}

impl RuleScore {
    pub fn per_config_means(&self) -> impl Iterator<Item = f64> + '_ {
        self.per_config.iter().map(|(_, m)| *m)
    }
}

/// Exact per-(config, rule, cell, outcome) counts. Because every rule is
/// piecewise constant over finitely many cells, mean scores reduce to
/// integer counts and are bit-identical under any chunking or threading.
#[derive(Debug, Clone)]
pub struct RuleEvaluationAccumulator {
    rules: Vec<NamedRule>,
    kind: ScoringRuleKind,
    // per config key: per rule: per cell: [misses, covers]
    configs: BTreeMap<(u64, u64), Vec<Vec<[u64; 2]>>>,
}

impl RuleEvaluationAccumulator {
    pub fn new(rules: Vec<NamedRule>, kind: ScoringRuleKind) -> Self {
        Self {
            rules,
            kind,
            configs: BTreeMap::new(),
        }
    }

    fn empty_cells(rules: &[NamedRule]) -> Vec<Vec<[u64; 2]>> {
        rules
            .iter()
            .map(|r| vec![[0u64; 2]; r.rule.num_cells()])
            .collect()
    }

    pub fn finalize(&self) -> Result<Vec<RuleScore>, ConditioningError> {
        if self.configs.is_empty() {
            return Err(ConditioningError::Empty);
        }
        let mut out = Vec::with_capacity(self.rules.len());
        for (rule_index, named) in self.rules.iter().enumerate() {
            let mut per_config = Vec::with_capacity(self.configs.len());
            let mut pooled: Vec<[u64; 2]> = vec![[0; 2]; named.rule.num_cells()];
            for (&(theta_bits, width_bits), cells) in &self.configs {
                let cells = &cells[rule_index];
                per_config.push((
                    (f64::from_bits(theta_bits), f64::from_bits(width_bits)),
                    mean_from_cells(&named.rule, cells, self.kind),
                ));
                for (p, c) in pooled.iter_mut().zip(cells) {
                    p[0] += c[0];
                    p[1] += c[1];
                }
            }
            let mean = mean_from_cells(&named.rule, &pooled, self.kind);
            let k = per_config.len() as f64;
            let grand = per_config.iter().map(|(_, m)| m).sum::<f64>() / k;
            let across_config_variance = per_config
                .iter()
                .map(|(_, m)| (m - grand) * (m - grand))
                .sum::<f64>()
                / k;
            out.push(RuleScore {
                id: named.id.clone(),
                rule_kind: self.kind,
                mean,
                across_config_variance,
                per_config,
            });
        }
        Ok(out)
    }
}

fn mean_from_cells(rule: &ForecastRule, cells: &[[u64; 2]], kind: ScoringRuleKind) -> f64 {
    let mut total = 0u64;
    let mut sum = 0.0;
    for (cell, counts) in cells.iter().enumerate() {
        let n = counts[0] + counts[1];
        if n == 0 {
            continue;
        }
        total += n;
        let q = Forecast::new(rule.cell_forecast(cell)).expect("cell forecasts lie in [0,1]");
        let miss = score(kind, q, false.into());
        let hit = score(kind, q, true.into());
        // 0 * inf stays zero: an unrealized infinite loss is no loss
        if counts[0] > 0 {
            sum += counts[0] as f64 * miss;
        }
        if counts[1] > 0 {
            sum += counts[1] as f64 * hit;
        }
    }
    if total == 0 {
        f64::NAN
    } else {
        sum / total as f64
    }
}

impl TrialAccumulator for RuleEvaluationAccumulator {
    fn observe(&mut self, record: &TrialRecord) {
        let key = (record.theta.to_bits(), record.hull_width.to_bits());
        let rules = &self.rules;
        let cells = self
            .configs
            .entry(key)
            .or_insert_with(|| Self::empty_cells(rules));
        for (rule_index, named) in self.rules.iter().enumerate() {
            let cell = named
                .rule
                .cell_of(record, named.procedure)
                .expect("records carry the rule's inputs");
            let z = record
                .outcome(named.procedure)
                .expect("records carry the scored procedure")
                .covered() as usize;
            cells[rule_index][cell][z] += 1;
        }
    }

    fn merge(&mut self, other: Self) {
        for (key, other_cells) in other.configs {
            let rules = &self.rules;
            let cells = self
                .configs
                .entry(key)
                .or_insert_with(|| Self::empty_cells(rules));
            for (mine, theirs) in cells.iter_mut().zip(other_cells) {
                for (m, t) in mine.iter_mut().zip(theirs) {
                    m[0] += t[0];
                    m[1] += t[1];
                }
            }
        }
    }
}

/// Score a set of rules over a record stream; one row per rule, with the
/// across-configuration variance of per-config means.
pub fn evaluate_forecast_rules<'a, I>(
    records: I,
    rules: &[NamedRule],
    kind: ScoringRuleKind,
) -> Result<Vec<RuleScore>, ConditioningError>
where
    I: IntoIterator<Item = &'a TrialRecord>,
{
    let mut acc = RuleEvaluationAccumulator::new(rules.to_vec(), kind);
    for record in records {
        acc.observe(record);
    }
    acc.finalize()
}

/// Persist a table as CSV. Values are shortest-round-trip decimals, so the
/// file reproduces the table exactly; empty bins leave the coverage field
/// blank.
pub fn write_table_csv<W: Write>(
    mut out: W,
    table: &ConditionalCoverageTable,
) -> Result<(), ConditioningError> {
    writeln!(out, "statistic,procedure,bin_lo,bin_hi,count,coverage")?;
    for (bin, estimate) in table.bins().iter().enumerate() {
        let (lo, hi) = table.binning().bounds(bin);
        let coverage = estimate
            .coverage
            .map(|c| format!("{c}"))
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            table.statistic(),
            table.procedure(),
            lo,
            hi,
            estimate.count,
            coverage,
        )?;
    }
    Ok(())
}

/// Read a table back from its CSV form.
pub fn read_table_csv<R: BufRead>(
    reader: R,
) -> Result<ConditionalCoverageTable, ConditioningError> {
    let parse_err = |line: usize, msg: &str| ConditioningError::Parse {
        line,
        msg: msg.to_string(),
    };
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?;
    if header.trim() != "statistic,procedure,bin_lo,bin_hi,count,coverage" {
        return Err(parse_err(1, "unexpected header"));
    }

    let mut statistic: Option<StatisticId> = None;
    let mut procedure: Option<ProcedureId> = None;
    let mut edges: Vec<f64> = Vec::new();
    let mut bins: Vec<BinEstimate> = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(parse_err(line_no, "expected 6 fields"));
        }
        let stat: StatisticId = fields[0]
            .parse()
            .map_err(|_| parse_err(line_no, "bad statistic token"))?;
        let proc: ProcedureId = fields[1]
            .parse()
            .map_err(|_| parse_err(line_no, "bad procedure token"))?;
        if *statistic.get_or_insert(stat) != stat || *procedure.get_or_insert(proc) != proc {
            return Err(parse_err(line_no, "mixed statistic or procedure tokens"));
        }
        let lo: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(line_no, "bad bin_lo"))?;
        let hi: f64 = fields[3]
            .parse()
            .map_err(|_| parse_err(line_no, "bad bin_hi"))?;
        let count: u64 = fields[4]
            .parse()
            .map_err(|_| parse_err(line_no, "bad count"))?;
        let coverage = if fields[5].is_empty() {
            None
        } else {
            Some(
                fields[5]
                    .parse::<f64>()
                    .map_err(|_| parse_err(line_no, "bad coverage"))?,
            )
        };
        match edges.last() {
            None => {
                edges.push(lo);
                edges.push(hi);
            }
            Some(&last) => {
                if last != lo {
                    return Err(parse_err(line_no, "bins are not contiguous"));
                }
                edges.push(hi);
            }
        }
        bins.push(BinEstimate { count, coverage });
    }
    if bins.is_empty() {
        return Err(parse_err(1, "no bins"));
    }
    Ok(ConditionalCoverageTable {
        statistic: statistic.unwrap(),
        procedure: procedure.unwrap(),
        binning: Binning::new(edges)?,
        bins,
    })
}
