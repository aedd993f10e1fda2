//! Command-line front end.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use hetfb_core::analytic::{approx_minimum_best_m, average_sum_rate, i1, minimum_best_m};
use hetfb_core::channel::ImpairmentParams;
use hetfb_core::goodput::{fixed_rate_metrics, optimize_beta0, optimize_beta1, variable_rate_metrics};
use hetfb_core::montecarlo::{Comparison, EstimateWithError};
use rayon::prelude::*;

use crate::config::{RunConfig, StrategyKind};
use crate::error::{AppError, ErrorKind};
use crate::figures::{self, FigureId, FigureOptions};
use crate::output::{self, Format, Table, Value};
use crate::runner::{self, RunResult};

#[derive(Debug, Parser)]
#[command(
    name = "hetfb",
    version,
    about = "Heterogeneous best-M partial feedback: simulation, analysis and figure data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one configuration key, e.g. --set best_m=2
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Directory for data files and the manifest; stdout when absent
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Monte Carlo trial count
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Master random seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo estimate of the configured experiment
    Simulate {
        /// Compare with the analytic values; exit 4 if any |z| > 3
        #[arg(long)]
        cross_validate: bool,
    },
    /// Analytic sum rate, or goodput and outage, over the K and beta grids
    Analytic {
        /// Use the full-feedback best-M value
        #[arg(long)]
        full_feedback: bool,
    },
    /// Smallest best-M value reaching each fraction of the full-feedback rate
    MinM,
    /// Optimal threshold and backoff over the impairment grids
    Optimize,
    /// Data series of one figure with its published parameters
    Figure {
        #[arg(value_enum)]
        id: FigureId,
    },
}

impl Command {
    fn label(&self) -> String {
        match self {
            Command::Simulate { .. } => "simulate".into(),
            Command::Analytic { .. } => "analytic".into(),
            Command::MinM => "min-m".into(),
            Command::Optimize => "optimize".into(),
            Command::Figure { id } => {
                let name = clap::ValueEnum::to_possible_value(id).expect("figure ids are named");
                format!("figure {}", name.get_name())
            }
        }
    }
}

pub fn resolve_config(cli: &Cli) -> Result<RunConfig, AppError> {
    let mut cfg = RunConfig::resolve(cli.config.as_deref(), &cli.overrides)?;
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one invocation, writing results to `stdout` or the output directory.
pub fn run(cli: &Cli, stdout: &mut impl Write) -> Result<(), AppError> {
    let cfg = resolve_config(cli)?;
    let (tables, flagged) = match &cli.command {
        Command::Simulate { cross_validate } => simulate(&cfg, *cross_validate)?,
        Command::Analytic { full_feedback } => (analytic(&cfg, *full_feedback)?, false),
        Command::MinM => (min_m(&cfg)?, false),
        Command::Optimize => (optimize(&cfg)?, false),
        Command::Figure { id } => (
            figures::generate(
                *id,
                FigureOptions {
                    trials: cfg.trials,
                    seed: cfg.seed,
                },
            )?,
            false,
        ),
    };
    match &cli.out {
        Some(dir) => {
            let paths = output::emit(&tables, dir, cli.format, &cli.command.label(), &cfg)?;
            for p in paths {
                writeln!(stdout, "{}", p.display()).map_err(|e| AppError::io(e.to_string()))?;
            }
        }
        None => output::print(&tables, cli.format, stdout)?,
    }
    if flagged {
        return Err(AppError {
            kind: ErrorKind::CrossValidation,
            message: "cross-validation found |z| > 3".into(),
        });
    }
    Ok(())
}

fn estimate_row(table: &mut Table, name: &str, e: &EstimateWithError, cmp: Option<&Comparison>) {
    table.push(vec![
        name.into(),
        e.mean.into(),
        e.std_error.into(),
        e.trials.into(),
        cmp.map(|c| c.analytic).into(),
        cmp.map(|c| c.z).into(),
    ]);
}

fn simulate(cfg: &RunConfig, cross_validate: bool) -> Result<(Vec<Table>, bool), AppError> {
    let spec = cfg.experiment()?;
    if cross_validate {
        hetfb_core::montecarlo::check_comparable(&spec)?;
    }
    let result = runner::run(&spec)?;
    let comparisons = if cross_validate {
        runner::compare(&spec, &result)?
    } else {
        Vec::new()
    };
    let find = |name: &str| comparisons.iter().find(|c| c.quantity.name() == name);
    let mut table = Table::new(
        "simulate",
        "Monte Carlo estimates with standard errors",
        &["quantity", "mean", "std_error", "trials", "analytic", "z"],
    );
    match &result {
        RunResult::Perfect(e) => estimate_row(&mut table, "sum_rate", e, find("sum_rate")),
        RunResult::Imperfect(e) => {
            estimate_row(&mut table, "goodput", &e.goodput, find("goodput"));
            estimate_row(&mut table, "outage", &e.outage, find("outage"));
            estimate_row(&mut table, "idle", &e.idle, None);
            table.push(vec![
                "conditional_outage".into(),
                e.conditional_outage.into(),
                Value::Empty,
                e.goodput.trials.into(),
                Value::Empty,
                Value::Empty,
            ]);
        }
    }
    let flagged = comparisons.iter().any(Comparison::flagged);
    Ok((vec![table], flagged))
}

fn analytic(cfg: &RunConfig, full_feedback: bool) -> Result<Vec<Table>, AppError> {
    let mut jobs = Vec::new();
    for k in cfg.k_grid() {
        let mut sys = cfg.system_with_total(k)?;
        if full_feedback {
            sys = sys.with_best_m(sys.full_feedback_m())?;
        }
        for beta in cfg.beta_grid() {
            jobs.push((k, beta, sys.clone()));
            if cfg.strategy == StrategyKind::Perfect {
                break;
            }
        }
    }
    let imp = cfg.impairments()?;
    let strategy = cfg.strategy;
    let rows: Vec<Result<Vec<Value>, AppError>> = jobs
        .par_iter()
        .map(|(k, beta, sys)| -> Result<Vec<Value>, AppError> {
            let m = sys.best_m();
            Ok(match strategy {
                StrategyKind::Perfect => vec![
                    (*k).into(),
                    m.into(),
                    average_sum_rate(sys)?.into(),
                    i1(sys.snr(), sys.num_users())?.into(),
                ],
                StrategyKind::Fixed => {
                    let r = fixed_rate_metrics(sys, &imp, *beta)?;
                    vec![(*k).into(), m.into(), (*beta).into(), r.goodput.into(), r.outage.into()]
                }
                StrategyKind::Variable => {
                    let r = variable_rate_metrics(sys, &imp, *beta)?;
                    vec![(*k).into(), m.into(), (*beta).into(), r.goodput.into(), r.outage.into()]
                }
            })
        })
        .collect();
    let mut table = match strategy {
        StrategyKind::Perfect => Table::new(
            "analytic",
            "average sum rate and its full-feedback value",
            &["K", "M", "sum_rate", "full_feedback_rate"],
        ),
        StrategyKind::Fixed => Table::new(
            "analytic",
            "fixed-rate goodput and outage",
            &["K", "M", "beta0", "goodput", "outage"],
        ),
        StrategyKind::Variable => Table::new(
            "analytic",
            "variable-rate goodput and outage",
            &["K", "M", "beta1", "goodput", "outage"],
        ),
    };
    for row in rows {
        table.push(row?);
    }
    Ok(vec![table])
}

fn min_m(cfg: &RunConfig) -> Result<Vec<Table>, AppError> {
    let mut table = Table::new(
        "min_m",
        "smallest best-M value reaching each fraction of the full-feedback sum rate",
        &["K", "gamma", "M_exact", "M_approx"],
    );
    for &gamma in &cfg.gammas {
        for k in cfg.k_grid() {
            let sys = cfg.system_with_total(k)?;
            let exact = minimum_best_m(&sys, gamma)?.exact;
            table.push(vec![
                k.into(),
                gamma.into(),
                exact.into(),
                approx_minimum_best_m(&sys, gamma).into(),
            ]);
        }
    }
    Ok(vec![table])
}

fn optimize(cfg: &RunConfig) -> Result<Vec<Table>, AppError> {
    let sys = cfg.system()?;
    let jobs: Vec<(f64, f64)> = cfg
        .est_err_var_values
        .iter()
        .flat_map(|&s| cfg.alpha_values.iter().map(move |&a| (s, a)))
        .collect();
    let rows: Vec<Result<Vec<Value>, AppError>> = jobs
        .par_iter()
        .map(|&(s2, alpha)| {
            let imp = ImpairmentParams::new(s2, alpha)?;
            let o0 = optimize_beta0(&sys, &imp)?;
            let o1 = optimize_beta1(&sys, &imp)?;
            Ok(vec![
                s2.into(),
                alpha.into(),
                o0.beta0.into(),
                o0.goodput.into(),
                o1.beta1.into(),
                o1.goodput.into(),
                o1.matched_best_m.into(),
            ])
        })
        .collect();
    let mut table = Table::new(
        "optimize",
        "full-feedback optimal threshold and backoff over estimation error and delay",
        &[
            "est_err_var",
            "alpha",
            "beta0_opt",
            "goodput0_opt",
            "beta1_opt",
            "goodput1_opt",
            "M_star",
        ],
    );
    for row in rows {
        table.push(row?);
    }
    Ok(vec![table])
}
