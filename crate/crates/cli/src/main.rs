mod dataio;
mod famspec;
mod modelfile;
mod reports;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use cpmle_core::{
    fit, kl_v_detailed, profiled_ratio_demo, run_bundle, run_consistency, run_normality, run_rate,
    wald_intervals, FitOptions, ScenarioSpec, VerifyOptions,
};
use reports::{CheckRow, RunConfigEcho};
use serde::Serialize;
use std::path::{Path, PathBuf};

const DEFAULT_SEED: u64 = 20100501;

/// Exact maximum likelihood for multiple-change-point models: fitting,
/// Monte Carlo simulation, and numerical verification.
#[derive(Parser)]
#[command(name = "cpmle", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a change-point model to a CSV dataset.
    Fit {
        /// Input CSV: rows are ordered observations, columns are dimensions.
        #[arg(long)]
        data: PathBuf,
        /// Model description file (TOML). Defaults to shared-variance
        /// normal segments when only --k is given.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Number of change points (overrides the model file's k when the
        /// file declares a single shared family).
        #[arg(long)]
        k: Option<usize>,
        /// Output directory for fit.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Root seed; echoed into reports.
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Confidence level for Wald intervals.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Extra psi starts: comma-separated coordinates, ';' between
        /// starts, e.g. "0.5; 1; 2" or "1,0,1; 2,0,2".
        #[arg(long)]
        psi_grid: Option<String>,
    },
    /// Run a Monte Carlo suite against a scenario.
    Simulate {
        /// Suite: consistency, rate, normality, profiled-ratio, or all.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Scenario file (TOML), or the bundled name "normal-shift-small".
        #[arg(long, default_value = "normal-shift-small")]
        scenario: String,
        /// Replication count override.
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Confidence level for the normality suite.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the verification bundle (deviation bound, divergence closed
    /// forms, dynamic-program equivalence, J identity).
    Verify {
        /// Scenario file with true parameters and an explicit box;
        /// defaults to the built-in two-segment normal benchmark.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Probe count for the deviation-bound check.
        #[arg(long, default_value_t = 10_000)]
        probes: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Evaluate the discrepancy v(candidate; truth) for two family
    /// descriptors, e.g. `cpmle kl --candidate "normal(mean=1, var=1)"
    /// --truth "normal(mean=0, var=1)"`.
    Kl {
        #[arg(long)]
        candidate: String,
        #[arg(long)]
        truth: String,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code_for(&err)
        }
    };
    std::process::exit(code);
}

fn exit_code_for(err: &anyhow::Error) -> i32 {
    if let Some(core) = err.downcast_ref::<cpmle_core::Error>() {
        match core {
            cpmle_core::Error::InvalidInput(_)
            | cpmle_core::Error::OutOfSupport { .. }
            | cpmle_core::Error::Parameter(_)
            | cpmle_core::Error::SizeLimit(_) => 2,
            cpmle_core::Error::Optimization { .. } => 3,
            cpmle_core::Error::Identifiability(_) => 4,
            _ => 1,
        }
    } else {
        2
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Fit {
            data,
            model,
            k,
            out,
            seed,
            level,
            psi_grid,
        } => cmd_fit(
            &data,
            model.as_deref(),
            k,
            &out,
            seed,
            level,
            psi_grid.as_deref(),
        ),
        Command::Simulate {
            suite,
            scenario,
            reps,
            seed,
            level,
            out,
        } => cmd_simulate(&suite, &scenario, reps, seed, level, &out),
        Command::Verify {
            scenario,
            probes,
            seed,
            out,
        } => cmd_verify(scenario.as_deref(), probes, seed, &out),
        Command::Kl { candidate, truth } => cmd_kl(&candidate, &truth),
    }
}

fn parse_psi_grid(text: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';')
        .map(|group| {
            group
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .with_context(|| format!("--psi-grid: not a number: {tok:?}"))
                })
                .collect()
        })
        .collect()
}

fn write_json<T: Serialize>(out_dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let path = out_dir.join(name);
    let json = serde_json::to_string_pretty(value)?;
    std::fs::write(&path, json.as_bytes())
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

fn cmd_fit(
    data_path: &Path,
    model_path: Option<&Path>,
    k: Option<usize>,
    out: &Path,
    seed: u64,
    level: f64,
    psi_grid: Option<&str>,
) -> Result<i32> {
    let data = dataio::read_csv(data_path)?;
    let (spec, file) = match model_path {
        Some(path) => modelfile::load_model(path, k)?,
        None => modelfile::default_model(k.context("give --model or --k")?)?,
    };
    let decls: Vec<modelfile::FamilyDecl> = match (&file.family, &file.segments) {
        (Some(f), _) => vec![f.clone(); spec.n_segments()],
        (None, Some(list)) => list.clone(),
        _ => unreachable!("model construction validated the declarations"),
    };
    let psi_starts = match psi_grid {
        Some(text) => parse_psi_grid(text)?,
        None => Vec::new(),
    };
    let options = FitOptions {
        psi_starts: psi_starts.clone(),
        ..FitOptions::default()
    };
    println!("seed: {seed}");
    let fitted = fit(&spec, &data, &options)?;
    let intervals = match wald_intervals(&spec, &fitted.params, &fitted.info, level) {
        Ok(iv) => iv,
        Err(cpmle_core::Error::Singular { condition }) => {
            println!(
                "note: information matrix is singular (condition {condition:.3e}); \
                 intervals omitted — check boundary and identifiability diagnostics"
            );
            Vec::new()
        }
        Err(other) => return Err(other.into()),
    };
    let config = RunConfigEcho {
        command: "fit".to_string(),
        data: Some(data_path.display().to_string()),
        model: model_path.map(|p| p.display().to_string()),
        scenario: None,
        k: spec.k(),
        seed,
        level: Some(level),
        psi_grid: if psi_starts.is_empty() {
            None
        } else {
            Some(psi_starts)
        },
        replications: None,
        suite: None,
        probes: None,
    };
    let report = reports::fit_report(config, &spec, &decls, data.n(), &fitted, &intervals);
    reports::print_fit_table(&report);
    let path = write_json(out, "fit.json", &report)?;
    println!("report: {}", path.display());
    Ok(0)
}

fn builtin_scenario(name: &str, seed: u64, reps: Option<usize>) -> Result<ScenarioSpec> {
    match name {
        "normal-shift-small" => {
            let mut scenario = cpmle_core::simulation::scenario_normal_shift_small(seed)
                .map_err(anyhow::Error::from)?;
            if let Some(r) = reps {
                scenario.replications = r;
            }
            Ok(scenario)
        }
        other => bail!("unknown bundled scenario {other:?}; available: normal-shift-small"),
    }
}

fn load_any_scenario(name: &str, seed: u64, reps: Option<usize>) -> Result<ScenarioSpec> {
    let path = Path::new(name);
    if path.exists() {
        modelfile::load_scenario(path, seed, reps)
    } else {
        builtin_scenario(name, seed, reps)
    }
}

fn write_summary_csv(out: &Path, name: &str, header: &str, lines: &[String]) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    let path = out.join(name);
    let mut text = String::from(header);
    text.push('\n');
    for line in lines {
        text.push_str(line);
        text.push('\n');
    }
    std::fs::write(&path, text.as_bytes())?;
    Ok(path)
}

fn cmd_simulate(
    suite: &str,
    scenario_name: &str,
    reps: Option<usize>,
    seed: u64,
    level: f64,
    out: &Path,
) -> Result<i32> {
    let known = ["consistency", "rate", "normality", "profiled-ratio", "all"];
    if !known.contains(&suite) {
        bail!("unknown suite {suite:?}; available: {}", known.join(", "));
    }
    println!("seed: {seed}");
    let mut rows: Vec<CheckRow> = Vec::new();
    let config_for = |k: usize, replications: Option<usize>, which: &str| RunConfigEcho {
        command: "simulate".to_string(),
        data: None,
        model: None,
        scenario: Some(scenario_name.to_string()),
        k,
        seed,
        level: Some(level),
        psi_grid: None,
        replications,
        suite: Some(which.to_string()),
        probes: None,
    };

    let needs_scenario = suite != "profiled-ratio";
    let scenario = if needs_scenario || suite == "all" {
        Some(load_any_scenario(scenario_name, seed, reps)?)
    } else {
        None
    };

    if let Some(s) = &scenario {
        // first replication at the smallest sample size, for refitting by hand
        let n = s.sample_sizes[0];
        let sample = cpmle_core::generate(s, n, 0).map_err(anyhow::Error::from)?;
        std::fs::create_dir_all(out)?;
        dataio::write_csv(&sample, &out.join("scenario_sample.csv"))?;
    }

    if suite == "consistency" || suite == "all" {
        let scenario = scenario.as_ref().expect("scenario loaded above");
        let report = run_consistency(scenario).map_err(anyhow::Error::from)?;
        let lines: Vec<String> = report
            .levels
            .iter()
            .map(|l| {
                format!(
                    "{},{},{},{},{},{}",
                    l.n,
                    l.failures,
                    l.median_lambda_err,
                    l.mean_lambda_err,
                    l.median_theta_err
                        .iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join(";"),
                    l.median_psi_err.map(|v| v.to_string()).unwrap_or_default()
                )
            })
            .collect();
        write_summary_csv(
            out,
            "consistency_summary.csv",
            "n,failures,median_lambda_err,mean_lambda_err,median_theta_err,median_psi_err",
            &lines,
        )?;
        write_json(
            out,
            "consistency.json",
            &reports::Enveloped {
                config: config_for(
                    scenario.spec.k(),
                    Some(scenario.replications),
                    "consistency",
                ),
                report: &report,
            },
        )?;
        rows.push(CheckRow {
            check: "consistency: error medians strictly decreasing".to_string(),
            pass: report.pass,
            detail: format!(
                "lambda medians {:?}, lambda strictly decreasing: {}",
                report
                    .levels
                    .iter()
                    .map(|l| l.median_lambda_err)
                    .collect::<Vec<_>>(),
                report.lambda_median_strictly_decreasing
            ),
        });
    }
    if suite == "rate" || suite == "all" {
        let scenario = scenario.as_ref().expect("scenario loaded above");
        let report = run_rate(scenario, &[5.0, 10.0, 20.0]).map_err(anyhow::Error::from)?;
        let mut lines = Vec::new();
        for l in &report.levels {
            for t in &l.tails {
                lines.push(format!(
                    "{},{},{},{}",
                    l.n, t.delta, t.probability, t.std_error
                ));
            }
        }
        write_summary_csv(
            out,
            "rate_summary.csv",
            "n,delta,probability,std_error",
            &lines,
        )?;
        write_json(
            out,
            "rate.json",
            &reports::Enveloped {
                config: config_for(scenario.spec.k(), Some(scenario.replications), "rate"),
                report: &report,
            },
        )?;
        rows.push(CheckRow {
            check: "rate: scaled-error tails tight in n".to_string(),
            pass: report.pass,
            detail: format!(
                "P(n err >= {}) at largest n: {:.4} (target {})",
                report.delta_grid.last().unwrap(),
                report.largest_delta_final_probability,
                report.tail_target
            ),
        });
    }
    if suite == "normality" || suite == "all" {
        let scenario = scenario.as_ref().expect("scenario loaded above");
        let report = run_normality(scenario, level).map_err(anyhow::Error::from)?;
        let mut lines = Vec::new();
        for l in &report.levels {
            for (c, cov) in l.coverage.iter().enumerate() {
                lines.push(format!(
                    "{},{},{},{},{}",
                    l.n, c, cov, l.mean_z[c], l.ks_distance[c]
                ));
            }
        }
        write_summary_csv(
            out,
            "normality_summary.csv",
            "n,coordinate,coverage,mean_z,ks_distance",
            &lines,
        )?;
        write_json(
            out,
            "normality.json",
            &reports::Enveloped {
                config: config_for(scenario.spec.k(), Some(scenario.replications), "normality"),
                report: &report,
            },
        )?;
        let last = report.levels.last().expect("at least one sample size");
        rows.push(CheckRow {
            check: format!("normality: coverage at level {level}"),
            pass: report.failure_fraction_ok,
            detail: format!(
                "coverage {:?}, pooled mean z {:.4}, KS {:?}",
                last.coverage, last.mean_z_pooled, last.ks_distance
            ),
        });
    }
    if suite == "profiled-ratio" || suite == "all" {
        let trace = profiled_ratio_demo(&[10, 100, 1000, 10_000], 1.0, seed)
            .map_err(anyhow::Error::from)?;
        let lines: Vec<String> = trace
            .points
            .iter()
            .map(|p| {
                format!(
                    "{},{},{},{}",
                    p.m, p.statistic_closed_form, p.statistic_numeric_profile, p.gap
                )
            })
            .collect();
        write_summary_csv(
            out,
            "profiled_ratio_summary.csv",
            "m,statistic_closed_form,statistic_numeric_profile,gap",
            &lines,
        )?;
        write_json(
            out,
            "profiled_ratio.json",
            &reports::Enveloped {
                config: config_for(0, None, "profiled-ratio"),
                report: &trace,
            },
        )?;
        rows.push(CheckRow {
            check: "profiled-ratio demonstration".to_string(),
            pass: trace.pass,
            detail: format!(
                "max profile gap {:.3e}, nonnegative: {}, means {:?}",
                trace.max_profile_gap,
                trace.all_nonnegative,
                trace
                    .mean_checks
                    .iter()
                    .map(|c| c.sample_mean)
                    .collect::<Vec<_>>()
            ),
        });
    }

    reports::print_check_table(&rows);
    Ok(if rows.iter().all(|r| r.pass) { 0 } else { 1 })
}

fn cmd_verify(scenario: Option<&Path>, probes: usize, seed: u64, out: &Path) -> Result<i32> {
    println!("seed: {seed}");
    let (spec, truth, true_cps) = match scenario {
        None => cpmle_core::verify::default_benchmark(),
        Some(path) => {
            let s = modelfile::load_scenario(path, seed, None)?;
            let n = *s.sample_sizes.last().expect("validated non-empty");
            let cps = s.true_cps_for(n).map_err(anyhow::Error::from)?;
            (s.spec, s.truth, cps)
        }
    };
    let options = VerifyOptions {
        bound_probes: probes,
        seed,
        ..VerifyOptions::default()
    };
    let outcome = run_bundle(&spec, &truth, &true_cps, &options).map_err(anyhow::Error::from)?;
    let rows: Vec<CheckRow> = outcome
        .rows
        .iter()
        .map(|r| CheckRow {
            check: r.check.clone(),
            pass: r.pass,
            detail: r.detail.clone(),
        })
        .collect();
    reports::print_check_table(&rows);
    let config = RunConfigEcho {
        command: "verify".to_string(),
        data: None,
        model: None,
        scenario: scenario.map(|p| p.display().to_string()),
        k: spec.k(),
        seed,
        level: None,
        psi_grid: None,
        replications: None,
        suite: None,
        probes: Some(probes),
    };
    write_json(
        out,
        "verify.json",
        &reports::Enveloped {
            config,
            report: &outcome,
        },
    )?;
    Ok(if outcome.pass { 0 } else { 1 })
}

fn cmd_kl(candidate: &str, truth: &str) -> Result<i32> {
    let cand = famspec::parse_family(candidate)?;
    let tru = famspec::parse_family(truth)?;
    let result = kl_v_detailed(
        cand.family.as_ref(),
        &cand.psi,
        &cand.theta,
        tru.family.as_ref(),
        &tru.psi,
        &tru.theta,
    )
    .map_err(anyhow::Error::from)?;
    println!("v(candidate; truth) = {:.12}", result.value);
    println!("method: {:?}", result.method);
    if let Some(se) = result.std_error {
        println!("std error: {se:.3e}");
    }
    Ok(0)
}
