//! Command-line driver: `granulate`, `train`, `attack`, `metrics`, `bench`.
//!
//! Every [`ExperimentConfig`] key is also a flag (`num_clients` is
//! `--num-clients`). Flags override `--config FILE`, which overrides the
//! defaults. Exit codes: 0 success, 1 runtime failure, 2 usage or config
//! error.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Arg, ArgAction, ArgMatches, Command};
use thiserror::Error;

pub use commands::{
    attack_indices, cmd_attack, cmd_bench, cmd_granulate, cmd_metrics, cmd_train, graphs_of, load_splits, num_classes,
    read_sp_rows, AttackSummary, GranulateSummary, SpRow, Splits, TrainSummary, ATTACK_DIR, CHECKPOINT_FILE,
    CONFIG_FILE, GRAPH_DIR, REPORT_CSV, REPORT_JSON, ROUNDS_FILE, SP_FILE,
};
pub use config::{DatasetKind, ExperimentConfig, InitSetting, KEYS};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn flag(key: &str) -> String {
    key.replace('_', "-")
}

pub fn command() -> Command {
    let mut cmd = Command::new("grbfl")
        .about("Granular-rectangle graphs, federated GCN training, and gradient-inversion privacy experiments")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .global(true)
                .help("key = value configuration file"),
        );
    for key in KEYS {
        cmd = cmd.arg(
            Arg::new(*key)
                .long(flag(key))
                .value_name("VALUE")
                .global(true)
                .help(config::describe(key))
                .help_heading("Experiment"),
        );
    }
    cmd.subcommand(Command::new("granulate").about("Granulate the dataset into graph files and report statistics"))
        .subcommand(Command::new("train").about("Run federated training; writes rounds.csv and model.ckpt"))
        .subcommand(
            Command::new("attack")
                .about("Gradient-inversion attacks on training samples; writes sp.csv and PGM images")
                .arg(
                    Arg::new("checkpoint")
                        .long("checkpoint")
                        .value_name("FILE")
                        .help("model to attack [default: <output-dir>/model.ckpt]"),
                )
                .arg(
                    Arg::new("untrained")
                        .long("untrained")
                        .action(ArgAction::SetTrue)
                        .conflicts_with("checkpoint")
                        .help("attack the seeded initial model instead of a checkpoint"),
                ),
        )
        .subcommand(
            Command::new("metrics")
                .about("Combine rounds.csv and sp.csv into report.json and report.csv")
                .arg(
                    Arg::new("run-dir")
                        .long("run-dir")
                        .value_name("DIR")
                        .help("run directory [default: <output-dir>]"),
                ),
        )
        .subcommand(
            Command::new("bench").about("Time granulation over image sizes and graph construction over node counts"),
        )
}

/// Defaults, then `--config`, then flags.
pub fn config_from_matches(matches: &ArgMatches) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = matches.get_one::<String>("config") {
        cfg.apply_file(path.as_ref())?;
    }
    for key in KEYS {
        if let Some(value) = matches.get_one::<String>(key) {
            cfg.set(key, value)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(name: &str, sub: &ArgMatches, cfg: &ExperimentConfig) -> Result<(), CliError> {
    match name {
        "granulate" => {
            let summary = cmd_granulate(cfg)?;
            println!("{summary}");
            println!("graphs written to {}", cfg.output_dir.join(GRAPH_DIR).display());
        }
        "train" => {
            let summary = cmd_train(cfg)?;
            println!("training data from {}", summary.source);
            for log in &summary.outcome.logs {
                println!(
                    "round {:>3}  accuracy {:.4}  comm {:.6}s  params {}",
                    log.round, log.accuracy, log.seconds, log.params_transferred
                );
            }
            println!("wrote {}", cfg.output_dir.join(ROUNDS_FILE).display());
        }
        "attack" => {
            let checkpoint = if sub.get_flag("untrained") {
                None
            } else {
                Some(
                    sub.get_one::<String>("checkpoint")
                        .map(PathBuf::from)
                        .unwrap_or_else(|| cfg.output_dir.join(CHECKPOINT_FILE)),
                )
            };
            let summary = cmd_attack(cfg, checkpoint.as_deref())?;
            for row in &summary.rows {
                println!(
                    "sample {:>3} (index {:>5})  mse {:.5}  s_p {:.5}",
                    row.sample, row.index, row.mse, row.s_p
                );
            }
            println!("mean S_p {:.5}  mean MSE {:.5}", summary.mean_s_p, summary.mean_mse);
        }
        "metrics" => {
            let dir = sub
                .get_one::<String>("run-dir")
                .map(PathBuf::from)
                .unwrap_or_else(|| cfg.output_dir.clone());
            let r = cmd_metrics(cfg, &dir)?;
            println!(
                "accuracy {:.4}  CE {:.4}  S_p {:.4}  PEUM {:.4}{}",
                r.accuracy,
                r.ce,
                r.s_p,
                r.peum,
                if r.peum_defined { "" } else { " (undefined)" }
            );
        }
        "bench" => {
            let (timings, builds) = cmd_bench(cfg)?;
            for t in &timings {
                println!("{0}x{0}: {1:.3} ms ({2} rectangles)", t.side, t.millis, t.rectangles);
            }
            for b in &builds {
                println!("graph k={}: {:.6} s", b.nodes, b.seconds);
            }
        }
        other => return Err(CliError::Usage(format!("unknown command `{other}`"))),
    }
    Ok(())
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let result = config_from_matches(sub).and_then(|cfg| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        pool.install(|| dispatch(name, sub, &cfg))
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
