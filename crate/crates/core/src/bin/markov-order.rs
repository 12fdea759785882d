use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use markov_order::divergence::DenominatorMode;
use markov_order::gdl::{default_bound, GdlParams};
use markov_order::generator::{build_tensor, default_burn_in, resolve_spec, simulate};
use markov_order::harness::{
    estimate_sample, parse_estimators, render, run_experiment, run_experiment_with_workers, ExperimentConfig,
    TableFormat,
};
use markov_order::{Error, PenaltySpec, Result, Sample};

#[derive(Debug, Parser)]
#[command(name = "markov-order", version, about = "Markov chain order estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a sample from a builtin or JSON generator spec.
    Generate {
        /// Builtin name (q1-lag2, q1-lag3, q2-iid, q3-lag2, q3-lag3, q4-iid) or spec file.
        #[arg(long)]
        spec: String,
        /// Sample length
        #[arg(long)]
        n: usize,
        /// RNG seed
        #[arg(long)]
        seed: u64,
        /// Discarded leading steps; defaults to 10 * order * m
        #[arg(long = "burn-in")]
        burn_in: Option<usize>,
        /// Output sample file
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the order of the chain in a sample file.
    Estimate {
        /// Sample file
        #[arg(long = "in")]
        input: PathBuf,
        /// Probe bound; defaults to max(1, floor(log_m n) - 2).
        #[arg(long = "B")]
        bound: Option<usize>,
        /// Decay rate of the exponential transform
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Skip the degrees-of-freedom scaling
        #[arg(long = "no-df-normalize")]
        no_df_normalize: bool,
        /// Cell denominator of the statistic: observed or expected
        #[arg(long = "delta2-denominator", default_value = "observed")]
        denominator: String,
        /// Comma-separated subset of gdl, aic, bic, edc
        #[arg(long, default_value = "gdl,aic,bic,edc")]
        estimators: String,
        /// Multiplier on the EDC penalty
        #[arg(long = "edc-coefficient", default_value_t = PenaltySpec::DEFAULT_EDC_COEFFICIENT)]
        edc_coefficient: f64,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run a Monte Carlo experiment described by a JSON config.
    Experiment {
        /// Experiment config file
        #[arg(long)]
        config: PathBuf,
        /// Table format: csv or md
        #[arg(long, default_value = "md")]
        format: String,
        /// Worker threads; defaults to all cores
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            spec,
            n,
            seed,
            burn_in,
            out,
        } => {
            let spec = resolve_spec(&spec)?;
            let tensor = build_tensor(&spec)?;
            let burn_in = burn_in.unwrap_or_else(|| default_burn_in(&tensor));
            let sample = simulate(&tensor, n, seed, burn_in)?;
            sample.write(&out)?;
            eprintln!("wrote {n} symbols to {} (seed {seed}, burn-in {burn_in})", out.display());
        }
        Command::Estimate {
            input,
            bound,
            lambda,
            no_df_normalize,
            denominator,
            estimators,
            edc_coefficient,
            json,
        } => {
            let sample = Sample::read(&input)?;
            let denominator: DenominatorMode = denominator.parse()?;
            let cfg = GdlParams {
                lambda,
                df_normalize: !no_df_normalize,
                denominator,
                bound: bound.unwrap_or_else(|| default_bound(sample.len(), sample.alphabet_size())),
            };
            let estimators = parse_estimators(&estimators)?;
            let report = estimate_sample(&sample, &cfg, &estimators, edc_coefficient)?;
            if json {
                emit(&format!("{}\n", serde_json::to_string_pretty(&report)?));
            } else {
                emit(&report.to_string());
            }
        }
        Command::Experiment {
            config,
            format,
            workers,
        } => {
            let format: TableFormat = format.parse()?;
            let config = ExperimentConfig::read(&config)?;
            let table = match workers {
                Some(w) => run_experiment_with_workers(&config, w)?,
                None => run_experiment(&config)?,
            };
            let text = render(&table, format);
            emit(&text);
            if let Some(path) = &config.output_path {
                let io_err = |source| Error::Io {
                    path: path.clone(),
                    source,
                };
                std::fs::write(path, &text).map_err(io_err)?;
                let meta_path = path.with_extension("meta.json");
                std::fs::write(&meta_path, serde_json::to_string_pretty(&table.metadata)?).map_err(|source| {
                    Error::Io {
                        path: meta_path.clone(),
                        source,
                    }
                })?;
            }
            eprintln!(
                "{} replications ({} errored) in {:.2}s",
                table.metadata.config.replications, table.errored, table.metadata.wall_time_secs
            );
        }
    }
    Ok(())
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
