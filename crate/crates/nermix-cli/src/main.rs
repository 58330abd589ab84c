//! Command-line front end: `fit` runs one hierarchical-Bayes fit and writes
//! its report files, `simulate` runs the Monte Carlo study, and `evaluate`
//! scores fit reports against known targets.
//!
//! Exit codes: 0 success, 2 input/validation problem, 3 sampler failure.
//! Every run echoes its fully resolved configuration and a manifest with
//! input digests, so results can be reproduced byte for byte.

mod io;
mod outdir;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use nermix::domain::{
    log_transform_dataset, validate_dataset, ChainConfig, ModelSpec, ValidateOptions, Variant,
};
use nermix::error::{Error, Result};
use nermix::inference::PosteriorReport;
use nermix::simulation::{ScenarioSpec, StudyConfig};
use nermix::{engine, evaluation, inference, simulation};

use outdir::OutDir;

#[derive(Parser)]
#[command(name = "nermix", version, about = "Hierarchical Bayes small area estimation")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GlobalArgs {
    /// Optional TOML config file; explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed for all random streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of chains per fit.
    #[arg(long, global = true)]
    chains: Option<usize>,
    /// Retained draws per chain.
    #[arg(long, global = true)]
    draws: Option<usize>,
    /// Discarded initial iterations per chain.
    #[arg(long = "burn-in", global = true)]
    burn_in: Option<usize>,
    /// Keep every k-th post-burn-in draw.
    #[arg(long, global = true)]
    thin: Option<usize>,
    /// Suppress the human-readable summary on stdout.
    #[arg(long, global = true, action = ArgAction::SetTrue)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model to unit-level data and write report files.
    Fit(FitArgs),
    /// Run a Monte Carlo study over simulated populations.
    Simulate(SimulateArgs),
    /// Score fit reports against per-area targets.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Clone)]
struct FitArgs {
    /// Model variant: dg, cdm, or gdm.
    #[arg(long)]
    model: Option<String>,
    /// Unit-level CSV: area_id,y,x1,...,xq.
    #[arg(long)]
    units: Option<PathBuf>,
    /// Area-level CSV: area_id,N,xbar1,...,xbarq.
    #[arg(long)]
    areas: Option<PathBuf>,
    /// Natural-log transform of y and the covariates. The area means must
    /// then already be on the log scale.
    #[arg(long = "log-transform", num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    log_transform: Option<bool>,
    /// Prepend an all-ones intercept column (units and area means).
    #[arg(long, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    intercept: Option<bool>,
    /// Credible-interval levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    levels: Vec<f64>,
    /// Also write every retained draw to draws.csv.
    #[arg(long = "dump-draws", action = ArgAction::SetTrue)]
    dump_draws: bool,
    /// Accept areas that appear in areas.csv with no sampled units.
    #[arg(long = "allow-unsampled-areas", action = ArgAction::SetTrue)]
    allow_unsampled_areas: bool,
}

#[derive(Args, Clone)]
struct SimulateArgs {
    /// Named scenario i..v.
    #[arg(long)]
    scenario: Option<String>,
    /// Methods to fit, comma separated subset of dg,cdm,gdm.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    /// Replicate count S.
    #[arg(long = "S", visible_alias = "replicates")]
    replicates: Option<usize>,
    /// Number of small areas m.
    #[arg(long = "areas-count")]
    areas_count: Option<usize>,
    /// Population units per area N_i.
    #[arg(long = "pop-size")]
    pop_size: Option<usize>,
    /// Sampled units per area n_i.
    #[arg(long = "sample-size")]
    sample_size: Option<usize>,
    /// Use the full study size (m=40, N_i=200, S=100) before overrides.
    #[arg(long = "full-scale", action = ArgAction::SetTrue)]
    full_scale: bool,
}

#[derive(Args, Clone)]
struct EvaluateArgs {
    /// report.json of a fit; repeat for several methods.
    #[arg(long = "report")]
    reports: Vec<PathBuf>,
    /// Population CSV (area_id,y,...) from which geometric-mean targets are
    /// computed.
    #[arg(long)]
    population: Option<PathBuf>,
    /// Precomputed targets CSV (area_id,target); alternative to
    /// --population.
    #[arg(long)]
    truth: Option<PathBuf>,
}

/// Config-file counterpart of the CLI surface.
#[derive(Deserialize, Default)]
struct FileConfig {
    seed: Option<u64>,
    out: Option<String>,
    chains: Option<usize>,
    draws: Option<usize>,
    burn_in: Option<usize>,
    thin: Option<usize>,
    #[serde(default)]
    fit: FitFileConfig,
    #[serde(default)]
    simulate: SimulateFileConfig,
    #[serde(default)]
    evaluate: EvaluateFileConfig,
}

#[derive(Deserialize, Default)]
struct FitFileConfig {
    model: Option<String>,
    units: Option<String>,
    areas: Option<String>,
    log_transform: Option<bool>,
    intercept: Option<bool>,
    levels: Option<Vec<f64>>,
    dump_draws: Option<bool>,
    allow_unsampled_areas: Option<bool>,
}

#[derive(Deserialize, Default)]
struct SimulateFileConfig {
    scenario: Option<String>,
    methods: Option<Vec<String>>,
    replicates: Option<usize>,
    areas_count: Option<usize>,
    pop_size: Option<usize>,
    sample_size: Option<usize>,
    full_scale: Option<bool>,
}

#[derive(Deserialize, Default)]
struct EvaluateFileConfig {
    reports: Option<Vec<String>>,
    population: Option<String>,
    truth: Option<String>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            toml::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_sampler_failure() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = load_file_config(cli.global.config.as_deref())?;
    match cli.command {
        Command::Fit(args) => cmd_fit(&cli.global, &file, args),
        Command::Simulate(args) => cmd_simulate(&cli.global, &file, args),
        Command::Evaluate(args) => cmd_evaluate(&cli.global, &file, args),
    }
}

fn resolve_out(global: &GlobalArgs, file: &FileConfig) -> PathBuf {
    global
        .out
        .clone()
        .or_else(|| file.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("nermix-out"))
}

#[derive(Serialize)]
struct ResolvedFit {
    command: &'static str,
    model: String,
    units: String,
    areas: String,
    log_transform: bool,
    intercept: bool,
    levels: Vec<f64>,
    dump_draws: bool,
    allow_unsampled_areas: bool,
    chain: ChainConfig,
    out: String,
}

fn cmd_fit(global: &GlobalArgs, file: &FileConfig, args: FitArgs) -> Result<()> {
    let model = args
        .model
        .or_else(|| file.fit.model.clone())
        .ok_or_else(|| Error::InvalidConfig("fit needs --model".into()))?;
    let variant = Variant::parse(&model)?;
    let units_path = args
        .units
        .or_else(|| file.fit.units.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::InvalidConfig("fit needs --units".into()))?;
    let areas_path = args
        .areas
        .or_else(|| file.fit.areas.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::InvalidConfig("fit needs --areas".into()))?;
    let log_transform = args
        .log_transform
        .or(file.fit.log_transform)
        .unwrap_or(false);
    let intercept = args.intercept.or(file.fit.intercept).unwrap_or(true);
    let levels = if !args.levels.is_empty() {
        args.levels.clone()
    } else {
        file.fit.levels.clone().unwrap_or_else(|| vec![0.9, 0.95])
    };
    let dump_draws = args.dump_draws || file.fit.dump_draws.unwrap_or(false);
    let allow_unsampled =
        args.allow_unsampled_areas || file.fit.allow_unsampled_areas.unwrap_or(false);
    let chain = ChainConfig {
        n_draws: global.draws.or(file.draws).unwrap_or(10_000),
        burn_in: global.burn_in.or(file.burn_in).unwrap_or(5_000),
        thin: global.thin.or(file.thin).unwrap_or(1),
        n_chains: global.chains.or(file.chains).unwrap_or(2),
        seed: global.seed.or(file.seed).unwrap_or(42),
    };
    let out_path = resolve_out(global, file);

    let mut out = OutDir::create(&out_path)?;
    out.record_input(&units_path)?;
    out.record_input(&areas_path)?;
    out.write_json(
        "resolved_config.json",
        &ResolvedFit {
            command: "fit",
            model: variant.name().into(),
            units: units_path.display().to_string(),
            areas: areas_path.display().to_string(),
            log_transform,
            intercept,
            levels: levels.clone(),
            dump_draws,
            allow_unsampled_areas: allow_unsampled,
            chain,
            out: out_path.display().to_string(),
        },
    )?;

    let records = io::read_units(&units_path, intercept)?;
    let frame = io::read_areas(&areas_path, intercept)?;
    let options = ValidateOptions {
        allow_unsampled_areas: allow_unsampled,
    };
    let mut data = validate_dataset(&records, &frame, &options)?;
    let mut frame = frame;
    if log_transform {
        let (d, f) = log_transform_dataset(&data, &frame)?;
        data = d;
        frame = f;
    }

    let spec = ModelSpec { variant, chain };
    let fit = engine::fit(&data, &frame, &spec)?;
    let report = inference::build_report(&fit, &data, &levels)?;

    let mut buf = Vec::new();
    report.write_json(&mut buf)?;
    out.write("report.json", &buf)?;
    buf.clear();
    report.write_areas_csv(&mut buf)?;
    out.write("areas.csv", &buf)?;
    buf.clear();
    report.write_params_csv(&mut buf)?;
    out.write("params.csv", &buf)?;
    buf.clear();
    report.write_units_csv(&mut buf)?;
    out.write("units.csv", &buf)?;
    if dump_draws {
        buf.clear();
        inference::write_draws_csv(&fit.draws, &mut buf)?;
        out.write("draws.csv", &buf)?;
    }
    out.finish("fit", chain.seed)?;

    if !global.quiet {
        print_fit_summary(&report, &fit);
    }
    Ok(())
}

fn print_fit_summary(report: &PosteriorReport, fit: &engine::FitResult) {
    println!(
        "fit: {} on {} areas / {} units ({} chains x {} draws, {:.2?})",
        report.provenance.variant.name(),
        report.provenance.n_areas,
        report.provenance.n_units,
        report.provenance.chain.n_chains,
        report.provenance.chain.n_draws,
        fit.wall_time
    );
    println!("{:<14} {:>4} {:>9} {:>8} {:>9}", "area", "n_i", "mean", "sd", "median");
    for a in &report.areas {
        println!(
            "{:<14} {:>4} {:>9.1} {:>8.1} {:>9.1}",
            a.area_id, a.n_i, a.mean, a.sd, a.median
        );
    }
    let worst = report
        .diagnostics
        .iter()
        .max_by(|a, b| a.split_rhat.partial_cmp(&b.split_rhat).unwrap());
    if let Some(w) = worst {
        println!("worst split-rhat: {} = {:.3}", w.name, w.split_rhat);
    }
}

#[derive(Serialize)]
struct ResolvedSimulate {
    command: &'static str,
    scenario: ScenarioSpec,
    methods: Vec<String>,
    fit_config: StudyConfig,
    out: String,
}

fn cmd_simulate(global: &GlobalArgs, file: &FileConfig, args: SimulateArgs) -> Result<()> {
    let name = args
        .scenario
        .or_else(|| file.simulate.scenario.clone())
        .ok_or_else(|| Error::InvalidConfig("simulate needs --scenario (i..v)".into()))?;
    let seed = global.seed.or(file.seed).unwrap_or(42);
    let mut scenario = ScenarioSpec::named(&name, seed)?;
    if args.full_scale || file.simulate.full_scale.unwrap_or(false) {
        scenario = scenario.full_scale();
    }
    if let Some(s) = args.replicates.or(file.simulate.replicates) {
        scenario.replicates = s;
    }
    if let Some(m) = args.areas_count.or(file.simulate.areas_count) {
        scenario.m = m;
    }
    if let Some(n) = args.pop_size.or(file.simulate.pop_size) {
        scenario.n_pop = n;
    }
    if let Some(n) = args.sample_size.or(file.simulate.sample_size) {
        scenario.n_sample = n;
    }
    let method_names = if !args.methods.is_empty() {
        args.methods.clone()
    } else {
        file.simulate
            .methods
            .clone()
            .unwrap_or_else(|| vec!["dg".into(), "cdm".into(), "gdm".into()])
    };
    let methods: Result<Vec<Variant>> =
        method_names.iter().map(|m| Variant::parse(m)).collect();
    let methods = methods?;
    let fit_config = StudyConfig {
        burn_in: global.burn_in.or(file.burn_in).unwrap_or(2_000),
        n_draws: global.draws.or(file.draws).unwrap_or(4_000),
        thin: global.thin.or(file.thin).unwrap_or(1),
        n_chains: global.chains.or(file.chains).unwrap_or(1),
    };
    let out_path = resolve_out(global, file);

    let mut out = OutDir::create(&out_path)?;
    out.write_json(
        "resolved_config.json",
        &ResolvedSimulate {
            command: "simulate",
            scenario: scenario.clone(),
            methods: methods.iter().map(|m| m.name().to_string()).collect(),
            fit_config,
            out: out_path.display().to_string(),
        },
    )?;

    let table = simulation::run_study(&scenario, &methods, &fit_config)?;

    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    out.write("metrics.csv", &buf)?;
    buf.clear();
    table.write_json(&mut buf)?;
    out.write("metrics.json", &buf)?;
    for (name, bytes) in table.panel_files() {
        out.write(&name, &bytes)?;
    }
    out.finish("simulate", seed)?;

    if !global.quiet {
        println!(
            "simulate: scenario {} (m={}, N_i={}, n_i={}, S={})",
            scenario.name, scenario.m, scenario.n_pop, scenario.n_sample, scenario.replicates
        );
        println!(
            "{:<6} {:>9} {:>9} {:>10} {:>10} {:>9} {:>9}",
            "method", "eBias", "eMSE", "noncov90", "noncov95", "len90", "len95"
        );
        for m in &methods {
            let s = table.method_summary(*m).unwrap();
            println!(
                "{:<6} {:>9.4} {:>9.4} {:>10.4} {:>10.4} {:>9.4} {:>9.4}",
                m.name(),
                s.e_bias,
                s.e_mse,
                s.noncoverage90,
                s.noncoverage95,
                s.mean_len90,
                s.mean_len95
            );
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ResolvedEvaluate {
    command: &'static str,
    reports: Vec<String>,
    population: Option<String>,
    truth: Option<String>,
    out: String,
}

fn cmd_evaluate(global: &GlobalArgs, file: &FileConfig, args: EvaluateArgs) -> Result<()> {
    let reports: Vec<PathBuf> = if !args.reports.is_empty() {
        args.reports.clone()
    } else {
        file.evaluate
            .reports
            .clone()
            .unwrap_or_default()
            .iter()
            .map(PathBuf::from)
            .collect()
    };
    if reports.is_empty() {
        return Err(Error::InvalidConfig(
            "evaluate needs at least one --report".into(),
        ));
    }
    let population = args
        .population
        .or_else(|| file.evaluate.population.as_ref().map(PathBuf::from));
    let truth_file = args
        .truth
        .or_else(|| file.evaluate.truth.as_ref().map(PathBuf::from));
    let out_path = resolve_out(global, file);

    let mut out = OutDir::create(&out_path)?;
    let truth = match (&population, &truth_file) {
        (Some(pop), None) => {
            out.record_input(pop)?;
            let rows = io::read_area_values(pop)?;
            evaluation::geometric_means(&rows)?
        }
        (None, Some(tf)) => {
            out.record_input(tf)?;
            evaluation::TruthFrame::new(io::read_area_values(tf)?, tf.display().to_string())?
        }
        (Some(_), Some(_)) => {
            return Err(Error::InvalidConfig(
                "pass either --population or --truth, not both".into(),
            ))
        }
        (None, None) => {
            return Err(Error::InvalidConfig(
                "evaluate needs --population or --truth".into(),
            ))
        }
    };

    let mut rows = Vec::new();
    for path in &reports {
        out.record_input(path)?;
        let text = std::fs::read_to_string(path)?;
        let report: PosteriorReport = serde_json::from_str(&text)?;
        let estimates = report.point_estimates();
        let measures = evaluation::deviation_measures(&estimates, &truth)?;
        rows.push((report.provenance.variant.name().to_string(), measures));
    }

    out.write_json(
        "resolved_config.json",
        &ResolvedEvaluate {
            command: "evaluate",
            reports: reports.iter().map(|p| p.display().to_string()).collect(),
            population: population.map(|p| p.display().to_string()),
            truth: truth_file.map(|p| p.display().to_string()),
            out: out_path.display().to_string(),
        },
    )?;

    let mut buf = Vec::new();
    evaluation::write_performance_csv(&rows, &mut buf)?;
    out.write("performance.csv", &buf)?;
    #[derive(Serialize)]
    struct PerfRow<'a> {
        method: &'a str,
        #[serde(flatten)]
        measures: evaluation::DeviationMeasures,
    }
    let json_rows: Vec<PerfRow> = rows
        .iter()
        .map(|(m, d)| PerfRow {
            method: m,
            measures: *d,
        })
        .collect();
    out.write_json("performance.json", &json_rows)?;
    out.finish("evaluate", global.seed.or(file.seed).unwrap_or(42))?;

    if !global.quiet {
        println!("evaluate: truth from {}", truth.source);
        println!(
            "{:<6} {:>12} {:>16} {:>8} {:>8}",
            "method", "AAD", "ASD", "AARD", "ASRD"
        );
        for (m, d) in &rows {
            println!(
                "{:<6} {:>12.1} {:>16.1} {:>8.4} {:>8.4}",
                m, d.aad, d.asd, d.aard, d.asrd
            );
        }
    }
    Ok(())
}
