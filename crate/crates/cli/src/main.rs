//! `advdrive` command-line entry point.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use advdrive::error::{Error, Result};
use advdrive::harness::{
    registry_root, run_scenario1_training, run_scenario3_adv_training, run_testing, Config, PolicyRegistry,
    ScenarioSpec,
};
use advdrive::metrics::{report_dir, Normalize};
use advdrive::sim::build_map_named;

const OUT_ENV: &str = "ADVDRIVE_OUT";

#[derive(Parser, Debug)]
#[command(name = "advdrive", version, about = "Adversarial multi-agent driving benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scenario 1: train `algo.tag` policies in a shared environment and register the best one.
    #[command(after_help = keys_help())]
    Train(Common),
    /// Run testing episodes (scenario 1 or 2, per `scenario.kind`) and write per-episode logs.
    #[command(after_help = keys_help())]
    Test(Common),
    /// Scenario 3: train an adversary against a frozen victim.
    #[command(name = "adv-train", after_help = keys_help())]
    AdvTrain(Common),
    /// Scenario 3 testing: adversary and victim together, per-episode logs.
    #[command(name = "adv-test", after_help = keys_help())]
    AdvTest(Common),
    /// Aggregate episode logs into metric tables and speed series.
    #[command(after_help = keys_help())]
    Report {
        /// Directory searched recursively for episode logs.
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Write the geometry of `scenario.map` as plain-text records.
    #[command(name = "map-dump", after_help = keys_help())]
    MapDump(Common),
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Config file with `key = value` lines.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output root [default: $ADVDRIVE_OUT, else ./out].
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed list, comma separated or a half-open range `a..b`.
    #[arg(long, value_name = "LIST")]
    seeds: Option<String>,
    /// Apply the desk-scale preset to keys not set explicitly.
    #[arg(long)]
    desk_scale: bool,
}

fn keys_help() -> String {
    Config::key_help()
}

impl Common {
    fn config(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        for kv in &self.overrides {
            cfg.set_override(kv)?;
        }
        if let Some(s) = &self.seeds {
            cfg.set("seeds.list", s)?;
        }
        if self.desk_scale {
            cfg.set("desk_scale.enable", "true")?;
        }
        cfg.resolve()
    }

    fn out_root(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn test_run(cfg: &Config, out: &Path) -> Result<()> {
    let registry = PolicyRegistry::open(&registry_root(cfg, out))?;
    let spec = ScenarioSpec::from_config(cfg, &registry)?;
    let dir = out.join("test").join(spec.run_label());
    let run = run_testing(&spec, &dir)?;
    std::fs::write(dir.join("config.txt"), cfg.to_text())?;
    log::info!("{} episodes written to {}", run.files.len(), dir.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(c) => {
            let cfg = c.config()?;
            let rep = run_scenario1_training(&cfg, &c.out_root())?;
            log::info!("registered {} from learner {} at {}", rep.name, rep.best, rep.checkpoint.display());
        }
        Command::Test(c) => {
            let cfg = c.config()?;
            test_run(&cfg, &c.out_root())?;
        }
        Command::AdvTrain(c) => {
            let cfg = c.config()?;
            let rep = run_scenario3_adv_training(&cfg, &c.out_root())?;
            log::info!("registered {} at {}", rep.name, rep.checkpoint.display());
        }
        Command::AdvTest(c) => {
            let mut cfg = c.config()?;
            cfg.set("scenario.kind", "3")?;
            test_run(&cfg, &c.out_root())?;
        }
        Command::Report { input, common } => {
            let cfg = common.config()?;
            let normalize: Normalize = cfg.get("metrics.normalize").parse()?;
            let dir = common.out_root().join("report");
            let out = common.out.clone().unwrap_or(dir);
            let rep = report_dir(&input, &out, normalize)?;
            log::info!("{} groups reported into {}", rep.groups.len(), out.display());
        }
        Command::MapDump(c) => {
            let cfg = c.config()?;
            let id = cfg.get("scenario.map");
            let map = build_map_named(id)?;
            let out = c.out_root();
            std::fs::create_dir_all(&out)?;
            let path = out.join(format!("map_{id}.txt"));
            std::fs::write(&path, map.dump())?;
            log::info!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
