//! Artifact writers: per-config summary CSV, score tables as CSV and
//! markdown, the composite summary, and the run manifest.
//!
//! CSV floats are shortest-round-trip decimals; markdown shows 3 decimals
//! (ties to even), so every markdown number is the rounding of the
//! corresponding CSV value.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use coverage_forecast::experiment::SubmarineExperiment;
use coverage_forecast::model::{ProcedureId, SimulationConfig};

use crate::settings::Settings;

pub struct Artifacts {
    pub paths: Vec<PathBuf>,
}

fn create(dir: &Path, name: &str, paths: &mut Vec<PathBuf>) -> std::io::Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path)?;
    paths.push(path);
    Ok(BufWriter::new(file))
}

/// Row labels as they appear in the published score tables.
pub fn table1_label(id: &str) -> &str {
    match id {
        "constant_1" => "Constant 1",
        "constant_level" => "Constant 1−α",
        "np_width" => "NP width",
        "ump_width" => "UMP width",
        other => other,
    }
}

pub fn table2_label(id: &str) -> &str {
    match id {
        "constant_1" => "Constant 1",
        "constant_p_joint" => "Constant p_joint",
        "nesting_conditional" => "Nest. Cond.",
        "max_width" => "Max Width",
        other => other,
    }
}

pub fn write_all(
    dir: &Path,
    settings: &Settings,
    experiment: &SubmarineExperiment,
    write_records: bool,
) -> std::io::Result<Artifacts> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();

    // per-config coverage summary
    {
        let mut out = create(dir, "per_config_summary.csv", &mut paths)?;
        let mut header = String::from("theta,hull_width,n");
        for p in &settings.procedures {
            header.push(',');
            header.push_str(p.as_str());
        }
        header.push_str(",either,both");
        writeln!(out, "{header}")?;
        for (((theta, width), summary), composite) in experiment
            .sweep
            .per_config
            .iter()
            .zip(&experiment.per_config_composite)
        {
            let mut row = format!("{theta},{width},{}", summary.n);
            for p in &settings.procedures {
                row.push(',');
                row.push_str(&format!("{}", summary.coverage_by_procedure[p]));
            }
            let n = composite.n as f64;
            row.push_str(&format!(
                ",{},{}",
                composite.either as f64 / n,
                composite.both as f64 / n
            ));
            writeln!(out, "{row}")?;
        }
    }

    // conditional-coverage lookup tables
    {
        let mut out = create(dir, "table_np_D.csv", &mut paths)?;
        coverage_forecast::conditioning::write_table_csv(&mut out, &experiment.np_table)
            .map_err(io_error)?;
        let mut out = create(dir, "table_ump_W.csv", &mut paths)?;
        coverage_forecast::conditioning::write_table_csv(&mut out, &experiment.ump_table)
            .map_err(io_error)?;
    }

    // score tables, CSV and markdown
    {
        let mut csv = create(dir, "table1.csv", &mut paths)?;
        writeln!(
            csv,
            "forecast,scoring_rule,mean_score,across_config_variance"
        )?;
        for row in &experiment.table1 {
            writeln!(
                csv,
                "{},{},{},{}",
                row.id,
                row.rule_kind.as_str(),
                row.mean,
                row.across_config_variance
            )?;
        }

        let mut md = create(dir, "table1.md", &mut paths)?;
        writeln!(md, "| Forecast | Brier score (μ) | Brier score σ² |")?;
        writeln!(md, "|:---|---:|---:|")?;
        for row in &experiment.table1 {
            writeln!(
                md,
                "| {} | {:.3} | {:.3} |",
                table1_label(&row.id),
                row.mean,
                row.across_config_variance
            )?;
        }
    }
    {
        let mut csv = create(dir, "table2.csv", &mut paths)?;
        writeln!(
            csv,
            "forecast,scoring_rule,mean_score,across_config_variance"
        )?;
        for row in &experiment.table2 {
            writeln!(
                csv,
                "{},{},{},{}",
                row.id,
                row.rule_kind.as_str(),
                row.mean,
                row.across_config_variance
            )?;
        }

        let mut md = create(dir, "table2.md", &mut paths)?;
        writeln!(md, "| Forecast | Brier score (μ) | Brier score σ² |")?;
        writeln!(md, "|:---|---:|---:|")?;
        for row in &experiment.table2 {
            writeln!(
                md,
                "| {} | {:.3} | {:.3} |",
                table2_label(&row.id),
                row.mean,
                row.across_config_variance
            )?;
        }
    }

    // composite coverage summary
    {
        let mut out = create(dir, "composite.csv", &mut paths)?;
        writeln!(out, "quantity,value")?;
        let c = &experiment.composite_eval;
        let rows = [
            ("p_joint_train", experiment.forecasts.p_joint()),
            ("either", c.p_either),
            ("both", c.p_both),
            (
                "cover_given_sd_inside_ump",
                c.nesting_conditional[0].unwrap_or(f64::NAN),
            ),
            (
                "cover_given_ump_inside_sd",
                c.nesting_conditional[1].unwrap_or(f64::NAN),
            ),
            ("gap_sd_inside_ump", c.gap.sd_inside_ump),
            ("gap_ump_inside_sd", c.gap.ump_inside_sd),
            ("gap_pooled", c.gap.pooled),
        ];
        for (key, value) in rows {
            writeln!(out, "{key},{value}")?;
        }
    }

    // optional raw records (eval stream; sizable)
    if write_records {
        let mut out = create(dir, "records.csv", &mut paths)?;
        let records = coverage_forecast::simulation::run_sweep(
            &settings.config,
            &settings.procedures,
            coverage_forecast::simulation::StreamPhase::Eval,
        )
        .map_err(io_error)?;
        coverage_forecast::simulation::write_records_csv(&mut out, records).map_err(io_error)?;
    }

    Ok(Artifacts { paths })
}

fn io_error<E: std::fmt::Display>(e: E) -> std::io::Error {
    std::io::Error::other(e.to_string())
}

#[derive(Serialize)]
struct ManifestConfig<'a> {
    theta_grid: &'a [f64],
    hull_width_grid: &'a [f64],
    n_trials: u64,
    seed: u64,
    alpha: f64,
    bins_d: usize,
    bins_w: usize,
    procedures: Vec<&'a str>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool_version: &'a str,
    command: &'a str,
    started: String,
    finished: String,
    config: ManifestConfig<'a>,
    outputs: Vec<String>,
}

/// Every output file of a run is listed in exactly one manifest; the
/// manifest carries everything needed to reproduce the run bit-exactly.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    settings: &Settings,
    started: chrono::DateTime<chrono::Utc>,
    artifacts: &Artifacts,
) -> std::io::Result<PathBuf> {
    let config: &SimulationConfig = &settings.config;
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        command,
        started: started.to_rfc3339(),
        finished: chrono::Utc::now().to_rfc3339(),
        config: ManifestConfig {
            theta_grid: &config.theta_grid,
            hull_width_grid: &config.hull_width_grid,
            n_trials: config.n_trials,
            seed: config.seed,
            alpha: config.alpha,
            bins_d: settings.bins_d,
            bins_w: settings.bins_w,
            procedures: settings
                .procedures
                .iter()
                .map(ProcedureId::as_str)
                .collect(),
        },
        outputs: artifacts
            .paths
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
    };
    let path = dir.join("manifest.json");
    let file = File::create(&path)?;
    serde_json::to_writer_pretty(BufWriter::new(file), &manifest)?;
    Ok(path)
}
