//! `facdyn` command line: equilibrium reports, phase-portrait bundles,
//! heteroclinic curves, region grids and stochastic ensembles, with JSON
//! config files, CSV outputs and deterministic seeding.
//!
//! Exit codes: 0 success, 2 usage/validation, 3 numeric/solver failure.
//! Errors are also emitted as a JSON object on stderr.

mod cmds;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cmds::{Model, PortraitOpts, RegionsOpts, StochasticOpts};
use config::{PairFlags, ParamFlags};
use facdyn::smooth::Chart;

#[derive(Parser)]
#[command(
    name = "facdyn",
    about = "Resource-consumer facilitation dynamics under habitat loss",
    version
)]
struct Cli {
    /// JSON config file; individual flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for file-producing commands.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classified equilibria of the smooth model as a JSON report.
    Equilibria {
        #[command(flatten)]
        params: ParamFlags,
    },
    /// Phase-portrait bundle: direction field, nullclines, separatrices and
    /// the limit cycle when present; `--chart` emits a compactified chart
    /// field instead.
    Portrait {
        #[command(flatten)]
        params: ParamFlags,
        #[arg(long)]
        model: Option<Model>,
        #[arg(long)]
        chart: Option<Chart>,
        /// Direction-field sample resolution per axis.
        #[arg(long, default_value_t = 25)]
        grid_n: usize,
    },
    /// Heteroclinic bifurcation curve: solved by shooting for the smooth
    /// model, closed form for the PWL model; `--compare` aligns both with
    /// the small-F tangent line.
    Heteroclinic {
        #[command(flatten)]
        params: PairFlags,
        #[arg(long)]
        model: Option<Model>,
        /// F grid as start:stop:count or a comma list.
        #[arg(long = "F-grid")]
        f_grid: Option<String>,
        #[arg(long)]
        compare: bool,
    },
    /// Region labels over an (xe, F) grid.
    Regions {
        #[command(flatten)]
        params: PairFlags,
        #[arg(long)]
        model: Option<Model>,
        #[arg(long = "xe-grid")]
        xe_grid: Option<String>,
        #[arg(long = "F-grid")]
        f_grid: Option<String>,
    },
    /// Survival/extinction ensembles over (sigma, xe) grids, one CSV per F,
    /// plus a manifest for exact re-runs.
    Stochastic {
        #[command(flatten)]
        params: PairFlags,
        /// F values (comma list or grid spec).
        #[arg(long = "F")]
        f_values: Option<String>,
        #[arg(long)]
        sigma: Option<String>,
        #[arg(long = "xe-grid")]
        xe_grid: Option<String>,
        /// Realizations per grid cell.
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "t-max")]
        t_max: Option<f64>,
    },
}

fn numeric_exit(err: &anyhow::Error) -> bool {
    matches!(
        err.downcast_ref::<facdyn::Error>(),
        Some(
            facdyn::Error::StepUnderflow { .. }
                | facdyn::Error::NoSectionCrossing { .. }
                | facdyn::Error::BracketFailure { .. }
                | facdyn::Error::Inconclusive { .. }
                | facdyn::Error::OffsetUnstable { .. }
                | facdyn::Error::Chattering { .. }
        )
    )
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = config::load_config(cli.config.as_ref())?;
    match cli.command {
        Command::Equilibria { params } => {
            let spec = params.resolve(&config)?;
            cmds::cmd_equilibria(spec)
        }
        Command::Portrait {
            params,
            model,
            chart,
            grid_n,
        } => {
            let spec = params.resolve(&config)?;
            let opts = PortraitOpts {
                model: cmds::resolve_model(model, &config)?,
                chart,
                grid_n: grid_n.max(2),
                out: cli.out,
            };
            cmds::cmd_portrait(spec, &opts, &config)
        }
        Command::Heteroclinic {
            params,
            model,
            f_grid,
            compare,
        } => {
            let opts = cmds::HeteroclinicOpts {
                model: cmds::resolve_model(model, &config)?,
                f_grid,
                compare,
                out: cli.out,
            };
            cmds::cmd_heteroclinic(&params, &opts, &config)
        }
        Command::Regions {
            params,
            model,
            xe_grid,
            f_grid,
        } => {
            let opts = RegionsOpts {
                model: cmds::resolve_model(model, &config)?,
                xe_grid,
                f_grid,
                out: cli.out,
            };
            cmds::cmd_regions(&params, &opts, &config)
        }
        Command::Stochastic {
            params,
            f_values,
            sigma,
            xe_grid,
            n,
            seed,
            dt,
            t_max,
        } => {
            let opts = StochasticOpts {
                f_values,
                sigma,
                xe_grid,
                n,
                seed,
                dt,
                t_max,
                out: cli.out,
            };
            cmds::cmd_stochastic(&params, &opts, &config)
        }
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("FACDYN_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let numeric = numeric_exit(&err);
            let payload = serde_json::json!({
                "error": format!("{err:#}"),
                "kind": if numeric { "numeric" } else { "validation" },
            });
            eprintln!("{payload}");
            ExitCode::from(if numeric { 3 } else { 2 })
        }
    }
}
