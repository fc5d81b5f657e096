//! The `featurelab` command line.
//!
//! Every subcommand prints the serialized library result. Exit status is 0 on
//! success, 1 when a verification report fails, 2 for usage, parse and domain
//! errors, and 3 when a computation fails to converge.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::alloc::{FeatureAllocation, Partition, SuffStats};
use crate::config::EvalConfig;
use crate::error::Error;
use crate::harness::{growth_curve, run_suite, Execution, Suite, VerificationReport};
use crate::schema::Model;
use crate::{crm, sp, species};

/// Environment variable naming a JSON file with default numerical settings.
pub const CONFIG_ENV: &str = "FEATURELAB_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "featurelab", version, about = "Feature and species sampling: prediction, posteriors and verification")]
struct Cli {
    /// JSON file with numerical settings; overrides FEATURELAB_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write output to this file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Record wall-clock time in reports.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SampleFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GridFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SuiteArg {
    ClosedForms,
    Thm41,
    Thm42,
    Exchangeability,
    Growth,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Suite {
        match s {
            SuiteArg::ClosedForms => Suite::ClosedForms,
            SuiteArg::Thm41 => Suite::Thm41,
            SuiteArg::Thm42 => Suite::Thm42,
            SuiteArg::Exchangeability => Suite::Exchangeability,
            SuiteArg::Growth => Suite::Growth,
            SuiteArg::All => Suite::All,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a sample of n customers.
    Sample {
        /// Model as JSON, a JSON file, or shorthand `kind:key=val,...`.
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: SampleFormat,
    },
    /// Predictive law of the next customer given sufficient statistics.
    Predict {
        #[arg(long)]
        model: String,
        /// `{"n":..,"m":[..]}`, or `{"n":..,"blocks":[..]}` for species models.
        #[arg(long)]
        stats: String,
        /// Condition a scaled-process model on this value of the scale.
        #[arg(long, conflicts_with = "marginal")]
        psi: Option<f64>,
        /// Integrate the scale out (scaled-process models).
        #[arg(long)]
        marginal: bool,
        /// Largest new-feature count in the marginal pmf.
        #[arg(long, requires = "marginal")]
        ymax: Option<usize>,
    },
    /// Posterior of the scale on a grid.
    PsiPosterior {
        #[arg(long)]
        model: String,
        #[arg(long)]
        stats: String,
        #[arg(long, value_enum, default_value = "csv")]
        format: GridFormat,
    },
    /// Monte Carlo growth of the number of features or blocks.
    Growth {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        reps: u64,
        #[arg(long)]
        seed: u64,
        /// Run replicates on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Run a verification suite.
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "json")]
        format: ReportFormat,
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Lib(e) if e.is_numeric_failure() => 3,
            _ => 2,
        }
    }
}

struct Output {
    body: String,
    passed: bool,
}

impl Output {
    fn ok(body: String) -> Self {
        Output { body, passed: true }
    }
}

/// Runs the command line with `FEATURELAB_CONFIG` taken from the process
/// environment.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env_config = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
    run_with_env(args, env_config, stdout, stderr)
}

/// Runs the command line with an explicit default config path.
pub fn run_with_env<I, T>(args: I, env_config: Option<PathBuf>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                2
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    let result = load_config(cli.config.as_ref().or(env_config.as_ref()))
        .and_then(|cfg| execute(&cli, &cfg))
        .and_then(|out| {
            emit(&cli, &out.body, stdout)?;
            Ok(out.passed)
        });
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(f) => {
            let msg = match &f {
                Failure::Usage(m) => m.clone(),
                Failure::Lib(e) => e.to_string(),
            };
            let _ = writeln!(stderr, "featurelab: {msg}");
            f.code()
        }
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<EvalConfig, Failure> {
    let Some(path) = path else {
        return Ok(EvalConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: EvalConfig =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("bad config {}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn emit(cli: &Cli, body: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    match &cli.out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display()))),
        None => stdout
            .write_all(body.as_bytes())
            .map_err(|e| Failure::Lib(Error::from(e))),
    }
}

fn json_line<T: Serialize>(v: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string(v).map_err(Error::from)?;
    s.push('\n');
    Ok(s)
}

fn parse_json<T: serde::de::DeserializeOwned>(what: &str, text: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::Usage(format!("bad {what}: {e}")))
}

fn report_output(mut report: VerificationReport, started: Instant, timing: bool, format: ReportFormat) -> Result<Output, Failure> {
    if timing {
        report.runtime_secs = Some(started.elapsed().as_secs_f64());
    }
    let body = match format {
        ReportFormat::Json => json_line(&report)?,
        ReportFormat::Text => report.to_text(),
    };
    Ok(Output {
        body,
        passed: report.passed,
    })
}

fn execute(cli: &Cli, cfg: &EvalConfig) -> Result<Output, Failure> {
    let started = Instant::now();
    match &cli.command {
        Command::Sample { model, n, seed, format } => {
            let model = Model::parse(model)?;
            let mut rng = ChaCha20Rng::seed_from_u64(*seed);
            let z = match &model {
                Model::Crm(lam) => crm::sample_allocation(&mut rng, lam, *n, cfg)?,
                Model::Sp(m) => sp::sample_allocation(&mut rng, m, *n, cfg)?,
                // each customer holds exactly its block
                Model::Species(g) => {
                    let labels = species::sample_labels(&mut rng, g, *n)?;
                    let cols = (0..labels.iter().map(|&l| l + 1).max().unwrap_or(0))
                        .map(|b| (0..*n).filter(|&j| labels[j] == b).collect())
                        .collect();
                    FeatureAllocation::from_columns(*n, cols)?
                }
            };
            if *n == 0 {
                return Ok(Output::ok(String::new()));
            }
            Ok(Output::ok(match format {
                SampleFormat::Jsonl => z.to_jsonl(),
                SampleFormat::Csv => z.to_csv(),
            }))
        }
        Command::Predict {
            model,
            stats,
            psi,
            marginal,
            ymax,
        } => {
            let model = Model::parse(model)?;
            let body = match &model {
                Model::Crm(lam) => {
                    if psi.is_some() || *marginal {
                        return Err(Failure::Usage("--psi and --marginal apply to scaled-process models only".into()));
                    }
                    let stats: SuffStats = parse_json("stats", stats)?;
                    json_line(&crm::predictive(lam, &stats, cfg)?)?
                }
                Model::Sp(m) => {
                    let stats: SuffStats = parse_json("stats", stats)?;
                    match (psi, marginal) {
                        (Some(a), _) => json_line(&sp::conditional_predictive(m, &stats, *a, cfg)?)?,
                        (None, true) => json_line(&sp::marginal_predictive(m, &stats, *ymax, cfg)?)?,
                        (None, false) => {
                            return Err(Failure::Usage(
                                "scaled-process models need --psi <a> or --marginal".into(),
                            ))
                        }
                    }
                }
                Model::Species(g) => {
                    if psi.is_some() || *marginal {
                        return Err(Failure::Usage("--psi and --marginal apply to scaled-process models only".into()));
                    }
                    let part: Partition = parse_json("partition", stats)?;
                    json_line(&species::gibbs_predictive(g, &part)?)?
                }
            };
            Ok(Output::ok(body))
        }
        Command::PsiPosterior { model, stats, format } => {
            let Model::Sp(m) = Model::parse(model)? else {
                return Err(Failure::Usage("psi-posterior needs a scaled-process model (levy@prior)".into()));
            };
            let stats: SuffStats = parse_json("stats", stats)?;
            let post = sp::psi_posterior(&m, &stats, cfg)?;
            Ok(Output::ok(match format {
                GridFormat::Csv => post.to_csv(),
                GridFormat::Json => json_line(&serde_json::json!({
                    "a": post.grid,
                    "density": post.density(),
                    "cdf": post.cdf,
                }))?,
            }))
        }
        Command::Growth {
            model,
            n,
            reps,
            seed,
            sequential,
        } => {
            let model = Model::parse(model)?;
            let exec = if *sequential { Execution::Sequential } else { Execution::Parallel };
            let report = growth_curve(&model, *n, *reps, *seed, exec, cfg)?;
            report_output(report, started, cli.timing, ReportFormat::Json)
        }
        Command::Verify {
            suite,
            seed,
            format,
            sequential,
        } => {
            let exec = if *sequential { Execution::Sequential } else { Execution::Parallel };
            let report = run_suite((*suite).into(), *seed, exec, cfg)?;
            report_output(report, started, cli.timing, *format)
        }
    }
}
