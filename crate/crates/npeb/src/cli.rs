//! The `npeb` command line: run simulation experiments, fit stratum data
//! from CSV files, and run verification suites.
//!
//! Exit codes are stable: 0 on success, 1 for runtime or experiment
//! failures, 2 for usage and validation errors.
//!
//! Every output file embeds the [`RunManifest`] that produced it (JSON files
//! as a `manifest` field, CSV files as a leading `# manifest:` comment), so
//! any artifact can be regenerated byte-for-byte from its own header.

use crate::estimate::{self, EstimateReport};
use crate::model::{BernoulliEta, ModelSpec, Outcome};
use crate::sim::{self, ExperimentConfig, ExperimentReport, PopulationSpec, SimError, TablePreset};
use crate::solver::{self, ObservationMode, ObservationSet};
use crate::verify;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "npeb",
    version,
    about = "Mixture-mean estimation under nonignorable nonresponse"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or custom simulation experiment and write reports.
    Simulate(SimulateArgs),
    /// Fit stratum data from a CSV file and write the estimates.
    Fit(FitArgs),
    /// Run a named verification suite and report pass/fail per property.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Bundled experiment table: table1 or table2.
    #[arg(long)]
    preset: Option<String>,
    /// Flat key=value (TOML) config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    config_id: Option<String>,
    /// Model family: binomial, bernoulli, poisson or geometric.
    #[arg(long)]
    family: Option<String>,
    /// Attempted sample size per stratum (binomial family).
    #[arg(long)]
    kappa: Option<u32>,
    /// Largest grid rate (poisson family).
    #[arg(long)]
    lambda_max: Option<f64>,
    /// Maximum contact attempts (geometric family).
    #[arg(long)]
    max_attempts: Option<u32>,
    /// Number of answer categories (geometric family).
    #[arg(long)]
    categories: Option<u32>,
    /// Bernoulli estimand: identity or square.
    #[arg(long)]
    eta: Option<String>,
    /// Population kind: two_type or uniform_mix.
    #[arg(long)]
    population: Option<String>,
    /// Two-type offset: strata sit at 0.5 ± delta.
    #[arg(long)]
    delta: Option<f64>,
    /// Uniform-mix range for the first half of the strata, as "lo,hi".
    #[arg(long, value_parser = parse_range)]
    range_a: Option<(f64, f64)>,
    /// Uniform-mix range for the second half of the strata, as "lo,hi".
    #[arg(long, value_parser = parse_range)]
    range_b: Option<(f64, f64)>,
    #[arg(long)]
    n_strata: Option<usize>,
    /// Observation mode: censored or truncated.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    grid_res: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Existing directory to write results.csv and report.json into.
    #[arg(long)]
    out: PathBuf,
    /// Also write one per-stratum data CSV per replication.
    #[arg(long)]
    emit_data: bool,
}

#[derive(Args)]
struct FitArgs {
    /// CSV file with header stratum_id,kappa_attempted,kappa_responded,x.
    #[arg(long)]
    input: PathBuf,
    /// Model family: binomial or bernoulli.
    #[arg(long, default_value = "binomial")]
    family: String,
    /// Expected attempted sample size; must match the file when given.
    #[arg(long)]
    kappa: Option<u32>,
    /// Observation mode: censored or truncated.
    #[arg(long, default_value = "censored")]
    mode: String,
    #[arg(long, default_value_t = 50)]
    grid_res: usize,
    #[arg(long, default_value_t = solver::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = solver::DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Existing directory to write estimate.json into.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    suite: Suite,
    #[arg(long)]
    seed: Option<u64>,
    /// Replications per configuration (consistency suite).
    #[arg(long)]
    reps: Option<usize>,
    /// Number of datasets (lemma1 suite).
    #[arg(long)]
    datasets: Option<usize>,
    #[arg(long)]
    grid_res: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Suite {
    Example1,
    Lemma1,
    Identity,
    Consistency,
}

enum CliError {
    /// Bad flags, config files or input data; exit code 2.
    Usage(String),
    /// Failures during the run itself; exit code 1.
    Runtime(String),
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::InvalidConfig(_) => CliError::Usage(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    }
}

/// Entry point used by the `npeb` binary.
pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Provenance block embedded in every artifact file.
#[derive(Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub artifact_version: String,
    pub input: Option<String>,
    pub output: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected \"lo,hi\"".into());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| "lo is not a number")?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| "hi is not a number")?;
    Ok((lo, hi))
}

fn parse_mode(s: &str) -> Result<ObservationMode, CliError> {
    match s {
        "censored" => Ok(ObservationMode::Censored),
        "truncated" => Ok(ObservationMode::Truncated),
        other => Err(CliError::Usage(format!(
            "mode must be censored or truncated, got `{other}`"
        ))),
    }
}

fn require_dir(path: &Path) -> Result<(), CliError> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "output directory {} does not exist",
            path.display()
        )))
    }
}

/// Flat key=value config file contents. Unknown keys are rejected.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    config_id: Option<String>,
    family: Option<String>,
    kappa: Option<u32>,
    lambda_max: Option<f64>,
    max_attempts: Option<u32>,
    categories: Option<u32>,
    eta: Option<String>,
    population: Option<String>,
    delta: Option<f64>,
    range_a: Option<(f64, f64)>,
    range_b: Option<(f64, f64)>,
    n_strata: Option<usize>,
    mode: Option<String>,
    grid_res: Option<usize>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    reps: Option<usize>,
    seed: Option<u64>,
}

fn build_model(
    family: &str,
    args: &SimulateArgs,
    file: &FileConfig,
) -> Result<ModelSpec, CliError> {
    match family {
        "binomial" => {
            let kappa = args.kappa.or(file.kappa).unwrap_or(4);
            ModelSpec::binomial(kappa).map_err(usage)
        }
        "bernoulli" => {
            let eta = match args.eta.as_deref().or(file.eta.as_deref()).unwrap_or("identity") {
                "identity" => BernoulliEta::Identity,
                "square" => BernoulliEta::Square,
                other => {
                    return Err(CliError::Usage(format!(
                        "eta must be identity or square, got `{other}`"
                    )))
                }
            };
            Ok(ModelSpec::bernoulli(eta))
        }
        "poisson" => {
            let lambda_max = args.lambda_max.or(file.lambda_max).unwrap_or(6.0);
            ModelSpec::poisson(lambda_max).map_err(usage)
        }
        "geometric" => {
            let max_attempts = args.max_attempts.or(file.max_attempts).unwrap_or(3);
            let categories = args.categories.or(file.categories).unwrap_or(2);
            ModelSpec::geometric(max_attempts, categories).map_err(usage)
        }
        other => Err(CliError::Usage(format!(
            "family must be binomial, bernoulli, poisson or geometric, got `{other}`"
        ))),
    }
}

fn resolve_custom_config(args: &SimulateArgs) -> Result<ExperimentConfig, CliError> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let family = args
        .family
        .clone()
        .or_else(|| file.family.clone())
        .unwrap_or_else(|| "binomial".into());
    let model = build_model(&family, args, &file)?;
    let n_strata = args.n_strata.or(file.n_strata).unwrap_or(1000);
    let population = match args
        .population
        .as_deref()
        .or(file.population.as_deref())
        .unwrap_or("two_type")
    {
        "two_type" => PopulationSpec::TwoType {
            delta: args.delta.or(file.delta).unwrap_or(0.2),
            n_strata,
        },
        "uniform_mix" => PopulationSpec::UniformMix {
            range_a: args.range_a.or(file.range_a).unwrap_or((0.1, 0.6)),
            range_b: args.range_b.or(file.range_b).unwrap_or((0.4, 0.9)),
            n_strata,
        },
        other => {
            return Err(CliError::Usage(format!(
                "population must be two_type or uniform_mix, got `{other}`"
            )))
        }
    };
    let mode = parse_mode(
        args.mode
            .as_deref()
            .or(file.mode.as_deref())
            .unwrap_or("censored"),
    )?;
    let config = ExperimentConfig {
        config_id: args
            .config_id
            .clone()
            .or_else(|| file.config_id.clone())
            .unwrap_or_else(|| "custom".into()),
        model,
        population,
        mode,
        grid_resolution: args.grid_res.or(file.grid_res).unwrap_or(50),
        tol: args.tol.or(file.tol).unwrap_or(solver::DEFAULT_TOL),
        max_iter: args.max_iter.or(file.max_iter).unwrap_or(solver::DEFAULT_MAX_ITER),
        replications: args.reps.or(file.reps).unwrap_or(50),
        seed: args.seed.or(file.seed).unwrap_or(sim::DEFAULT_EXPERIMENT_SEED),
    };
    config.validate().map_err(sim_error)?;
    Ok(config)
}

fn resolve_configs(args: &SimulateArgs) -> Result<Vec<ExperimentConfig>, CliError> {
    match &args.preset {
        Some(name) => {
            let model_flags = args.family.is_some()
                || args.kappa.is_some()
                || args.delta.is_some()
                || args.population.is_some()
                || args.n_strata.is_some()
                || args.config.is_some();
            if model_flags {
                return Err(CliError::Usage(
                    "presets fix the model and population; only solver flags \
                     (--mode --grid-res --tol --max-iter --reps --seed) may be overridden"
                        .into(),
                ));
            }
            let preset: TablePreset = name.parse().map_err(CliError::Usage)?;
            let mut configs = sim::table_preset(preset);
            for config in &mut configs {
                if let Some(mode) = &args.mode {
                    config.mode = parse_mode(mode)?;
                }
                if let Some(grid_res) = args.grid_res {
                    config.grid_resolution = grid_res;
                }
                if let Some(tol) = args.tol {
                    config.tol = tol;
                }
                if let Some(max_iter) = args.max_iter {
                    config.max_iter = max_iter;
                }
                if let Some(reps) = args.reps {
                    config.replications = reps;
                }
                if let Some(seed) = args.seed {
                    config.seed = seed;
                }
                config.validate().map_err(sim_error)?;
            }
            Ok(configs)
        }
        None => Ok(vec![resolve_custom_config(args)?]),
    }
}

fn manifest_comment(manifest: &RunManifest) -> Result<String, CliError> {
    let json = serde_json::to_string(manifest).map_err(runtime)?;
    Ok(format!("# manifest: {json}\n"))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Renders the summary table printed to standard output: mean, then the
/// standard deviation in parentheses, one row per configuration.
fn render_table(reports: &[ExperimentReport]) -> String {
    let id_width = reports
        .iter()
        .map(|r| r.config.config_id.len())
        .max()
        .unwrap_or(6)
        .max("config".len());
    let mut out = format!("{:<id_width$}  {:<16}  {:<16}\n", "config", "naive", "gmle");
    for report in reports {
        let dim = report.config.model.eta_dim();
        for i in 0..dim {
            let label = if dim == 1 {
                report.config.config_id.clone()
            } else {
                format!("{}[{i}]", report.config.config_id)
            };
            let cell = |summary: &Option<sim::EstimatorSummary>| match summary {
                Some(s) => format!("{:.3} ({:.3})", s.mean[i], s.sd[i]),
                None => "-".to_string(),
            };
            out.push_str(&format!(
                "{:<id_width$}  {:<16}  {:<16}\n",
                label,
                cell(&report.naive),
                cell(&report.gmle)
            ));
        }
    }
    out
}

/// One per-stratum data file in the fit input schema.
fn render_data_csv(
    config: &ExperimentConfig,
    rep: usize,
    manifest_line: &str,
) -> Result<String, CliError> {
    let (_, outcomes) = sim::replication_draws(config, rep).map_err(sim_error)?;
    let mut out = String::from(manifest_line);
    out.push_str("stratum_id,kappa_attempted,kappa_responded,x\n");
    for (i, outcome) in outcomes.iter().enumerate() {
        let id = i + 1;
        match (&config.model, outcome) {
            (ModelSpec::Binomial { attempts }, Outcome::Counts { successes, responders }) => {
                out.push_str(&format!("{id},{attempts},{responders},{successes}\n"));
            }
            (ModelSpec::Binomial { attempts }, Outcome::Nonresponse) => {
                out.push_str(&format!("{id},{attempts},0,\n"));
            }
            (ModelSpec::Bernoulli { .. }, Outcome::Bit { value }) => {
                out.push_str(&format!("{id},1,1,{value}\n"));
            }
            _ => {
                return Err(CliError::Usage(
                    "--emit-data supports the binomial and bernoulli families".into(),
                ))
            }
        }
    }
    Ok(out)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    require_dir(&args.out)?;
    let configs = resolve_configs(&args)?;
    if args.emit_data
        && !configs.iter().all(|c| {
            matches!(
                c.model,
                ModelSpec::Binomial { .. } | ModelSpec::Bernoulli { .. }
            )
        })
    {
        return Err(CliError::Usage(
            "--emit-data supports the binomial and bernoulli families".into(),
        ));
    }

    let manifest = RunManifest {
        subcommand: "simulate".into(),
        artifact_version: env!("CARGO_PKG_VERSION").into(),
        input: args.config.as_ref().map(|p| p.display().to_string()),
        output: args.out.display().to_string(),
        seed: Some(configs[0].seed),
        config: serde_json::to_value(&configs).map_err(runtime)?,
    };
    let manifest_line = manifest_comment(&manifest)?;

    let mut reports = Vec::with_capacity(configs.len());
    for config in &configs {
        reports.push(sim::run_experiment(config).map_err(sim_error)?);
    }

    let csv = format!("{manifest_line}{}", sim::reports_to_csv(&reports));
    write_file(&args.out.join("results.csv"), &csv)?;

    #[derive(Serialize)]
    struct SimulationDocument<'a> {
        manifest: &'a RunManifest,
        reports: &'a [ExperimentReport],
    }
    let doc = SimulationDocument {
        manifest: &manifest,
        reports: &reports,
    };
    let json = serde_json::to_string_pretty(&doc).map_err(runtime)?;
    write_file(&args.out.join("report.json"), &format!("{json}\n"))?;

    if args.emit_data {
        for config in &configs {
            for rep in 0..config.replications {
                let data = render_data_csv(config, rep, &manifest_line)?;
                let name = format!("data_{}_rep{rep}.csv", config.config_id);
                write_file(&args.out.join(name), &data)?;
            }
        }
    }

    print!("{}", render_table(&reports));
    Ok(())
}

/// Parses the fit input schema, reporting the offending line on error.
fn parse_fit_csv(
    path: &Path,
    family: &str,
    expected_kappa: Option<u32>,
) -> Result<(ModelSpec, Vec<Outcome>), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, line)) if line.trim().is_empty() => continue,
            Some((_, line)) => break line,
            None => return Err(CliError::Usage(format!("{}: empty file", path.display()))),
        }
    };
    if header.trim() != "stratum_id,kappa_attempted,kappa_responded,x" {
        return Err(CliError::Usage(format!(
            "{}: header must be `stratum_id,kappa_attempted,kappa_responded,x`",
            path.display()
        )));
    }

    let mut kappa_attempted: Option<u32> = expected_kappa;
    let mut outcomes = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let fail = |msg: String| {
            CliError::Usage(format!("{}:{line_no}: {msg}", path.display()))
        };
        if fields.len() != 4 {
            return Err(fail(format!("expected 4 fields, got {}", fields.len())));
        }
        let ka: u32 = fields[1]
            .trim()
            .parse()
            .map_err(|_| fail(format!("kappa_attempted `{}` is not a count", fields[1])))?;
        if ka == 0 {
            return Err(fail("kappa_attempted must be at least 1".into()));
        }
        match kappa_attempted {
            Some(expected) if expected != ka => {
                return Err(fail(format!(
                    "kappa_attempted must be constant across rows ({expected} vs {ka})"
                )));
            }
            None => kappa_attempted = Some(ka),
            _ => {}
        }
        let kr: u32 = fields[2]
            .trim()
            .parse()
            .map_err(|_| fail(format!("kappa_responded `{}` is not a count", fields[2])))?;
        if kr > ka {
            return Err(fail(format!("kappa_responded {kr} exceeds kappa_attempted {ka}")));
        }
        let x_field = fields[3].trim();
        let outcome = if kr == 0 {
            if !(x_field.is_empty() || x_field == "0") {
                return Err(fail("x must be empty or 0 on nonresponse rows".into()));
            }
            Outcome::Nonresponse
        } else {
            let x: u32 = x_field
                .parse()
                .map_err(|_| fail(format!("x `{x_field}` is not a count")))?;
            if x > kr {
                return Err(fail(format!("x = {x} exceeds kappa_responded = {kr}")));
            }
            Outcome::Counts {
                successes: x,
                responders: kr,
            }
        };
        match family {
            "binomial" => outcomes.push(outcome),
            "bernoulli" => match outcome {
                Outcome::Counts {
                    successes,
                    responders: 1,
                } if ka == 1 => outcomes.push(Outcome::Bit {
                    value: successes as u8,
                }),
                Outcome::Nonresponse => {
                    return Err(fail("bernoulli data cannot contain nonresponse rows".into()))
                }
                _ => {
                    return Err(fail(
                        "bernoulli rows need kappa_attempted = kappa_responded = 1".into(),
                    ))
                }
            },
            other => {
                return Err(CliError::Usage(format!(
                    "fit supports the binomial and bernoulli families, got `{other}`"
                )))
            }
        }
    }
    if outcomes.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    let spec = match family {
        "binomial" => ModelSpec::binomial(kappa_attempted.unwrap()).map_err(usage)?,
        "bernoulli" => ModelSpec::bernoulli(BernoulliEta::Identity),
        _ => unreachable!("family validated above"),
    };
    Ok((spec, outcomes))
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    require_dir(&args.out)?;
    let mode = parse_mode(&args.mode)?;
    let (spec, outcomes) = parse_fit_csv(&args.input, &args.family, args.kappa)?;
    let censored =
        ObservationSet::from_outcomes(outcomes, ObservationMode::Censored).map_err(usage)?;
    let fit_obs = match mode {
        ObservationMode::Censored => censored.clone(),
        ObservationMode::Truncated => sim::to_truncated(&censored).map_err(sim_error)?,
    };
    let grid = solver::default_grid(&spec, args.grid_res).map_err(usage)?;
    let (solution, _) = solver::fit_observations(&spec, &grid, &fit_obs, args.tol, args.max_iter)
        .map_err(runtime)?;
    let report = estimate::estimate_report(&spec, &grid, &solution.weights, &censored)
        .map_err(runtime)?;

    let manifest = RunManifest {
        subcommand: "fit".into(),
        artifact_version: env!("CARGO_PKG_VERSION").into(),
        input: Some(args.input.display().to_string()),
        output: args.out.display().to_string(),
        seed: None,
        config: serde_json::json!({
            "family": args.family,
            "mode": mode,
            "grid_res": args.grid_res,
            "tol": args.tol,
            "max_iter": args.max_iter,
        }),
    };

    #[derive(Serialize)]
    struct SupportAtom<'a> {
        theta: &'a [f64],
        weight: f64,
    }
    #[derive(Serialize)]
    struct SolutionSummary {
        converged: bool,
        iterations: usize,
        certificate: f64,
        loglik: f64,
    }
    #[derive(Serialize)]
    struct FitDocument<'a> {
        manifest: &'a RunManifest,
        estimate: &'a EstimateReport,
        solution: SolutionSummary,
        support: Vec<SupportAtom<'a>>,
    }
    let support: Vec<SupportAtom> = grid
        .points()
        .iter()
        .zip(solution.weights.as_slice())
        .filter(|(_, &w)| w > 1e-6)
        .map(|(theta, &weight)| SupportAtom {
            theta: theta.coords(),
            weight,
        })
        .collect();
    let doc = FitDocument {
        manifest: &manifest,
        estimate: &report,
        solution: SolutionSummary {
            converged: solution.converged,
            iterations: solution.iterations,
            certificate: solution.certificate,
            loglik: solution.loglik,
        },
        support,
    };
    let json = serde_json::to_string_pretty(&doc).map_err(runtime)?;
    write_file(&args.out.join("estimate.json"), &format!("{json}\n"))?;

    let naive = match &report.naive {
        Some(v) => format!("{v:?}"),
        None => "absent (no responders)".into(),
    };
    println!(
        "eta_hat: {:?}\nnaive: {naive}\nresponders: {} of {}\ncertificate: {:.3e} ({} iterations, converged: {})",
        report.eta_hat,
        report.n_responders,
        report.n_total,
        solution.certificate,
        solution.iterations,
        solution.converged
    );
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let report = match args.suite {
        Suite::Example1 => verify::example1().map_err(runtime)?,
        Suite::Lemma1 => {
            let mut options = verify::MultistartOptions::default();
            if let Some(seed) = args.seed {
                options.seed = seed;
            }
            if let Some(datasets) = args.datasets {
                options.datasets = datasets;
            }
            if let Some(grid_res) = args.grid_res {
                options.grid_resolution = grid_res;
            }
            verify::lemma1(&options).map_err(runtime)?
        }
        Suite::Identity => verify::identity().map_err(runtime)?,
        Suite::Consistency => {
            let mut options = verify::ConsistencyOptions::default();
            if let Some(seed) = args.seed {
                options.seed = seed;
            }
            if let Some(reps) = args.reps {
                options.replications = reps;
            }
            if let Some(grid_res) = args.grid_res {
                options.grid_resolution = grid_res;
            }
            verify::consistency(&options).map_err(runtime)?
        }
    };
    print!("{}", report.render());
    if report.all_passed() {
        Ok(())
    } else {
        let failing: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        Err(CliError::Runtime(format!(
            "suite {} failed: {}",
            report.suite,
            failing.join(", ")
        )))
    }
}
