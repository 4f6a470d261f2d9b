use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use interpol::config::{parse_config, Mode, RunConfig};
use interpol::estimator::{estimate, estimate_per_query, Family, FixedTarget};
use interpol::experiments::{exhaustive_oracle, run_grid};
use interpol::io::{read_log, read_policy, read_results, write_log, write_results};
use interpol::plot::{emit_plot, Metric, XAxis};
use interpol::{generate_dataset, Sampler};

/// Off-policy evaluation of ranking policies with PBM, IPM and
/// interpolating estimators.
#[derive(Debug, Parser)]
#[command(name = "interpol", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic click log.
    Simulate {
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Estimate a target policy's value from a click log.
    Evaluate {
        #[arg(long)]
        input: Option<PathBuf>,
        /// JSON ranking for every query, or an object of query id -> ranking.
        /// Defaults to the scenario's target ranking.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        estimator: EstimatorArgs,
        /// Include every per-query weighted click sum in the report.
        #[arg(long)]
        per_query: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the replicated experiment grid and write a CSV table.
    Grid {
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_delimiter = ',')]
        exponents: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        stay_probs: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        windows: Option<Vec<i64>>,
        #[arg(long)]
        replications: Option<usize>,
        /// Worker threads; results do not depend on this.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Exact expected estimate on a small scenario (K <= 4).
    Oracle {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        estimator: EstimatorArgs,
    },
    /// Draw an SVG line chart from a grid CSV.
    Plot {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// window, stay_prob or exponent.
        #[arg(long, default_value = "window")]
        x: String,
        /// Comma-separated metrics among mse, bias, variance.
        #[arg(long, default_value = "mse", value_delimiter = ',')]
        y: Vec<String>,
        /// Keep only cells with this exponent.
        #[arg(long)]
        exponent: Option<f64>,
        /// Keep only cells with this stay probability.
        #[arg(long)]
        stay_prob: Option<f64>,
        /// Keep only cells with this window.
        #[arg(long)]
        window: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    #[arg(long)]
    stay_prob: Option<f64>,
    /// Queries per dataset.
    #[arg(long)]
    n: Option<usize>,
    /// identity-or-uniform or cyclic-shift.
    #[arg(long)]
    sampler: Option<String>,
}

#[derive(Debug, Args)]
struct EstimatorArgs {
    /// pbm, ipm or interpol.
    #[arg(long)]
    family: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    window: Option<i64>,
    /// Power applied to the true curve to obtain the estimator's curve.
    #[arg(long, allow_negative_numbers = true)]
    exponent: Option<f64>,
    /// Explicit comma-separated estimator curve.
    #[arg(long, value_delimiter = ',')]
    curve: Option<Vec<f64>>,
}

impl ScenarioArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(q) = self.stay_prob {
            cfg.scenario.stay_prob = q;
        }
        if let Some(n) = self.n {
            cfg.scenario.n = n;
        }
        if let Some(s) = &self.sampler {
            cfg.scenario.sampler = s.parse::<Sampler>()?;
        }
        Ok(())
    }
}

impl EstimatorArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(f) = &self.family {
            cfg.estimator.family = f.parse::<Family>()?;
        }
        if let Some(w) = self.window {
            cfg.estimator.window = w;
        }
        if let Some(x) = self.exponent {
            cfg.estimator.exponent = x;
            cfg.estimator.curve = None;
        }
        if let Some(c) = &self.curve {
            cfg.estimator.curve = Some(c.clone());
        }
        Ok(())
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(parse_config(&text)?)
        }
        None => Ok(parse_config("")?),
    }
}

fn required(path: Option<PathBuf>, fallback: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    path.or_else(|| fallback.clone())
        .ok_or_else(|| interpol::Error::Config(format!("--{flag} is required")).into())
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate {
            seed,
            scenario,
            output,
        } => {
            cfg.mode = Mode::Simulate;
            cfg.seed = Some(seed);
            scenario.apply(&mut cfg)?;
            cfg.finalize()?;
            let out = required(output, &cfg.paths.output, "output")?;
            let records = generate_dataset(&cfg.scenario()?, cfg.scenario.n, seed)?;
            write_log(&out, &records).with_context(|| format!("writing {}", out.display()))?;
            eprintln!("wrote {} records to {}", records.len(), out.display());
        }
        Command::Evaluate {
            input,
            policy,
            scenario,
            estimator,
            per_query,
            output,
        } => {
            cfg.mode = Mode::Evaluate;
            scenario.apply(&mut cfg)?;
            estimator.apply(&mut cfg)?;
            cfg.finalize()?;
            let input = required(input, &cfg.paths.input, "input")?;
            let records =
                read_log(&input).with_context(|| format!("reading {}", input.display()))?;
            let est = cfg.estimator_config()?;
            let policy_path = policy.or_else(|| cfg.paths.policy.clone());
            let report = match policy_path {
                Some(p) => {
                    let target =
                        read_policy(&p).with_context(|| format!("reading {}", p.display()))?;
                    if per_query {
                        estimate_per_query(&records, &target, &est)?
                    } else {
                        estimate(&records, &target, &est)?
                    }
                }
                None => {
                    let target = FixedTarget(cfg.scenario()?.target);
                    if per_query {
                        estimate_per_query(&records, &target, &est)?
                    } else {
                        estimate(&records, &target, &est)?
                    }
                }
            };
            let out = output.or_else(|| cfg.paths.output.clone());
            emit(&serde_json::to_string_pretty(&report)?, out.as_deref())?;
        }
        Command::Grid {
            seed,
            scenario,
            exponents,
            stay_probs,
            windows,
            replications,
            workers,
            output,
        } => {
            cfg.mode = Mode::Grid;
            cfg.seed = Some(seed);
            scenario.apply(&mut cfg)?;
            if let Some(x) = exponents {
                cfg.grid.exponents = x;
            }
            if let Some(q) = stay_probs {
                cfg.grid.stay_probs = q;
            }
            if let Some(w) = windows {
                cfg.grid.windows = Some(w);
            }
            if let Some(r) = replications {
                cfg.grid.replications = r;
            }
            if workers.is_some() {
                cfg.workers = workers;
            }
            cfg.finalize()?;
            let out = required(output, &cfg.paths.output, "output")?;
            let scenario = cfg.scenario()?;
            let grid = cfg.experiment_grid(seed);
            let cells = match cfg.workers {
                Some(w) => rayon::ThreadPoolBuilder::new()
                    .num_threads(w)
                    .build()?
                    .install(|| run_grid(&scenario, &grid))?,
                None => run_grid(&scenario, &grid)?,
            };
            write_results(&out, &cells).with_context(|| format!("writing {}", out.display()))?;
            eprintln!("wrote {} cells to {}", cells.len(), out.display());
        }
        Command::Oracle {
            scenario,
            estimator,
        } => {
            cfg.mode = Mode::Oracle;
            scenario.apply(&mut cfg)?;
            estimator.apply(&mut cfg)?;
            cfg.finalize()?;
            let s = cfg.scenario()?;
            let window = cfg.estimator.window as usize;
            let value = exhaustive_oracle(&s, window, &cfg.estimator_curve()?)?;
            let doc = json!({
                "expected_estimate": value,
                "true_value": s.true_value(),
                "window": window,
                "stay_prob": s.logging.stay_prob(),
                "sampler": s.logging.sampler().to_string(),
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
        Command::Plot {
            input,
            output,
            x,
            y,
            exponent,
            stay_prob,
            window,
        } => {
            cfg.mode = Mode::Plot;
            let input = required(input, &cfg.paths.input, "input")?;
            let out = required(output, &cfg.paths.output, "output")?;
            let x_axis: XAxis = x.parse()?;
            let metrics = y
                .iter()
                .map(|m| m.parse::<Metric>())
                .collect::<Result<Vec<_>, _>>()?;
            let cells: Vec<_> = read_results(&input)
                .with_context(|| format!("reading {}", input.display()))?
                .into_iter()
                .filter(|c| exponent.is_none_or(|x| c.exponent == x))
                .filter(|c| stay_prob.is_none_or(|q| c.stay_prob == q))
                .filter(|c| window.is_none_or(|w| c.window == w))
                .collect();
            emit_plot(&cells, x_axis, &metrics, &out)?;
            eprintln!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .chain()
                .find_map(|c| c.downcast_ref::<interpol::Error>())
                .map_or(1, interpol::Error::exit_code);
            ExitCode::from(code)
        }
    }
}
