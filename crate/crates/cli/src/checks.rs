//! Reproduction checks: compare run results against the expected values
//! at their tolerances, print one line per check, and report failures.

use std::collections::BTreeMap;

use coverage_forecast::experiment::SubmarineExperiment;
use coverage_forecast::model::ProcedureId;
use coverage_forecast::monty::{
    enumerate_win_probability, simulate_mean_payout, GameConfig, Strategy,
};
use coverage_forecast::procedures::t_quantile;
use coverage_forecast::simulation::{run_t_trials, width_decile_coverages};

pub struct CheckLine {
    pub key: &'static str,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Default)]
pub struct CheckReport {
    pub lines: Vec<CheckLine>,
}

impl CheckReport {
    fn push(&mut self, key: &'static str, expected: f64, actual: f64, tolerance: f64) {
        let pass = (actual - expected).abs() <= tolerance;
        self.lines.push(CheckLine {
            key,
            expected,
            actual,
            tolerance,
            pass,
        });
    }

    // one-sided: pass when actual <= bound
    fn push_bound(&mut self, key: &'static str, bound: f64, actual: f64) {
        self.lines.push(CheckLine {
            key,
            expected: 0.0,
            actual,
            tolerance: bound,
            pass: actual <= bound,
        });
    }

    fn push_flag(&mut self, key: &'static str, pass: bool) {
        self.lines.push(CheckLine {
            key,
            expected: 1.0,
            actual: pass as u8 as f64,
            tolerance: 0.0,
            pass,
        });
    }

    pub fn all_pass(&self) -> bool {
        self.lines.iter().all(|l| l.pass)
    }

    pub fn print(&self) {
        for line in &self.lines {
            println!(
                "{} {:<28} expected {:>12.6} ± {:<10} actual {:>12.6}",
                if line.pass { "PASS" } else { "FAIL" },
                line.key,
                line.expected,
                format!("{:.2e}", line.tolerance),
                line.actual
            );
        }
        let failed = self.lines.iter().filter(|l| !l.pass).count();
        println!(
            "{} of {} checks passed",
            self.lines.len() - failed,
            self.lines.len()
        );
    }
}

/// Tolerance table; every key can be overridden with `--tol KEY=VALUE`.
pub fn parse_overrides(pairs: &[String]) -> Result<BTreeMap<String, f64>, String> {
    let mut out = BTreeMap::new();
    for pair in pairs {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| format!("--tol `{pair}` must be KEY=VALUE"))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| format!("--tol `{pair}`: bad value"))?;
        out.insert(key.trim().to_string(), value);
    }
    Ok(out)
}

struct Tolerances<'a>(&'a BTreeMap<String, f64>);

impl Tolerances<'_> {
    fn get(&self, key: &str, default: f64) -> f64 {
        self.0.get(key).copied().unwrap_or(default)
    }
}

// bin average of the spanned-width conditional coverage over [a, b]:
// the conditional coverage is d/(1-d) below 1/2 and 1 above, with
// density 2(1-d), so g*f integrates to 2d below 1/2 and 2(1-d) above
fn np_oracle_bin(a: f64, b: f64) -> f64 {
    let mut numerator = 0.0;
    if a < 0.5 {
        let hi = b.min(0.5);
        numerator += hi * hi - a * a;
    }
    if b > 0.5 {
        let lo = a.max(0.5);
        numerator += (2.0 * b - b * b) - (2.0 * lo - lo * lo);
    }
    let mass = (1.0 - a) * (1.0 - a) - (1.0 - b) * (1.0 - b);
    numerator / mass
}

// folded width: conditional coverage 2w with uniform density
fn ump_oracle_bin(a: f64, b: f64) -> f64 {
    a + b
}

/// Checks on the sweep reproduction (used by both the sweep runner's
/// `--check` mode and the standalone check command).
pub fn submarine_checks(
    experiment: &SubmarineExperiment,
    overrides: &BTreeMap<String, f64>,
) -> CheckReport {
    let tol = Tolerances(overrides);
    let mut report = CheckReport::default();

    // marginal coverage per configuration
    let mut worst = 0.0f64;
    for proc in [ProcedureId::Np, ProcedureId::Ump, ProcedureId::Sd] {
        for (_, summary) in &experiment.sweep.per_config {
            worst = worst.max((summary.coverage_by_procedure[&proc] - 0.5).abs());
        }
    }
    report.push_bound(
        "coverage_per_config",
        tol.get("coverage_per_config", 0.006),
        worst,
    );

    // score table means and variances
    let mean1 = |id: &str| experiment.table1_row(id).unwrap().mean;
    report.push(
        "table1_constant_1",
        0.500,
        mean1("constant_1"),
        tol.get("table1_constant_1", 0.001),
    );
    report.push(
        "table1_constant_level",
        0.250,
        mean1("constant_level"),
        tol.get("table1_constant_level", 0.001),
    );
    report.push(
        "table1_np_width",
        0.114,
        mean1("np_width"),
        tol.get("table1_np_width", 0.010),
    );
    report.push(
        "table1_ump_width",
        0.166,
        mean1("ump_width"),
        tol.get("table1_ump_width", 0.009),
    );
    let max_var = experiment
        .table1
        .iter()
        .map(|r| r.across_config_variance)
        .fold(0.0f64, f64::max);
    report.push_bound(
        "table1_variance",
        tol.get("table1_variance", 0.001),
        max_var,
    );

    // conditional-coverage curves against the closed-form bin averages
    let mut worst_np = 0.0f64;
    for (bin, estimate) in experiment.np_table.bins().iter().enumerate() {
        if let Some(coverage) = estimate.coverage {
            let (a, b) = experiment.np_table.binning().bounds(bin);
            worst_np = worst_np.max((coverage - np_oracle_bin(a, b)).abs());
        }
    }
    report.push_bound("curve_np", tol.get("curve_np", 0.03), worst_np);
    let mut worst_ump = 0.0f64;
    for (bin, estimate) in experiment.ump_table.bins().iter().enumerate() {
        if let Some(coverage) = estimate.coverage {
            let (a, b) = experiment.ump_table.binning().bounds(bin);
            worst_ump = worst_ump.max((coverage - ump_oracle_bin(a, b)).abs());
        }
    }
    report.push_bound("curve_ump", tol.get("curve_ump", 0.03), worst_ump);
    if let Ok(lookup) = experiment.np_table.lookup(0.25) {
        report.push(
            "spot_d025",
            0.333,
            lookup.coverage.unwrap_or(f64::NAN),
            tol.get("spot_d025", 0.03),
        );
    }

    // composite coverage
    let c = &experiment.composite_eval;
    report.push("p_joint", 0.586, c.p_either, tol.get("p_joint", 0.006));
    report.push(
        "nesting_sd_inside",
        0.793,
        c.nesting_conditional[0].unwrap_or(f64::NAN),
        tol.get("nesting_sd_inside", 0.010),
    );
    report.push(
        "nesting_ump_inside",
        0.441,
        c.nesting_conditional[1].unwrap_or(f64::NAN),
        tol.get("nesting_ump_inside", 0.010),
    );
    report.push(
        "gap_sd_inside",
        0.085,
        c.gap.sd_inside_ump,
        tol.get("gap_sd_inside", 0.005),
    );
    report.push(
        "gap_ump_inside",
        0.085,
        c.gap.ump_inside_sd,
        tol.get("gap_ump_inside", 0.005),
    );
    report.push_bound(
        "gap_identity",
        tol.get("gap_identity", 1e-12),
        (c.gap.pooled - (c.p_either - c.p_both)).abs(),
    );

    let mean2 = |id: &str| experiment.table2_row(id).unwrap().mean;
    report.push(
        "table2_constant_1",
        0.414,
        mean2("constant_1"),
        tol.get("table2_constant_1", 0.006),
    );
    report.push(
        "table2_constant_p_joint",
        0.243,
        mean2("constant_p_joint"),
        tol.get("table2_constant_p_joint", 0.005),
    );
    report.push(
        "table2_nesting",
        0.213,
        mean2("nesting_conditional"),
        tol.get("table2_nesting", 0.010),
    );
    report.push(
        "table2_max_width",
        0.208,
        mean2("max_width"),
        tol.get("table2_max_width", 0.010),
    );
    report.push_flag(
        "table2_ordering",
        mean2("constant_p_joint") >= mean2("nesting_conditional")
            && mean2("nesting_conditional") >= mean2("max_width"),
    );

    // tower identity over the pooled and per-config tables
    let mut worst_tower = 0.0f64;
    let np_marginal = experiment.train_coverage.coverage(ProcedureId::Np).unwrap();
    worst_tower = worst_tower
        .max((experiment.np_table.weighted_mean_coverage().unwrap() - np_marginal).abs());
    let ump_marginal = experiment
        .train_coverage
        .coverage(ProcedureId::Ump)
        .unwrap();
    worst_tower = worst_tower
        .max((experiment.ump_table.weighted_mean_coverage().unwrap() - ump_marginal).abs());
    for (table, counter) in experiment
        .np_per_config_tables
        .iter()
        .zip(&experiment.per_config_train_coverage)
    {
        let marginal = counter.coverage(ProcedureId::Np).unwrap();
        worst_tower = worst_tower.max((table.weighted_mean_coverage().unwrap() - marginal).abs());
    }
    report.push_bound(
        "tower_identity",
        tol.get("tower_identity", 1e-12),
        worst_tower,
    );

    report
}

/// Shell-game and t-interval checks for the standalone check command.
pub fn auxiliary_checks(seed: u64, overrides: &BTreeMap<String, f64>) -> CheckReport {
    let tol = Tolerances(overrides);
    let mut report = CheckReport::default();

    let stay = enumerate_win_probability(Strategy::Stay);
    let switch = enumerate_win_probability(Strategy::Switch);
    report.push_flag(
        "monty_enumeration",
        *stay.numer() == 1 && *stay.denom() == 3 && *switch.numer() == 2 && *switch.denom() == 3,
    );

    let config = GameConfig::new(10.0).expect("standard terms");
    let z_max = tol.get("monty_z_max", 4.0);
    let stay_sim = simulate_mean_payout(&config, Strategy::Stay, 1_000_000, seed).unwrap();
    report.push(
        "monty_stay_payout",
        -5.0,
        stay_sim.mean,
        z_max * stay_sim.standard_error,
    );
    let switch_sim = simulate_mean_payout(&config, Strategy::Switch, 1_000_000, seed).unwrap();
    report.push(
        "monty_switch_payout",
        0.0,
        switch_sim.mean,
        z_max * switch_sim.standard_error,
    );

    let trials = run_t_trials(5, 0.0, 1.0, 0.05, 100_000, seed).unwrap();
    let marginal = trials.iter().filter(|t| t.covered).count() as f64 / trials.len() as f64;
    report.push("t_marginal", 0.950, marginal, tol.get("t_marginal", 0.004));
    report.push(
        "t_crit_975_4",
        2.776,
        t_quantile(0.975, 4.0),
        tol.get("t_crit_975_4", 0.0005),
    );
    // the width deciles average back to the marginal even though the
    // per-decile coverages vary with the realized width
    let deciles = width_decile_coverages(&trials);
    let back: f64 = deciles.iter().map(|(n, c)| *n as f64 * c).sum::<f64>() / trials.len() as f64;
    report.push_bound(
        "t_decile_tower",
        tol.get("t_decile_tower", 1e-12),
        (back - marginal).abs(),
    );

    report
}
