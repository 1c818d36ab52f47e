use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use stoplab::config::{ExperimentConfig, SWEEP_IDS};
use stoplab::report::{self, Format};
use stoplab::run::{run_experiment, Status, MANIFEST_FILE};

#[derive(Parser)]
#[command(name = "stoplab", version, about = "Run the optimal stopping verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate an experiment file.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the enabled checks of an experiment.
    Run(RunArgs),
    /// Run parameter sweeps only (all sweeps unless --check is given).
    Sweep(RunArgs),
    /// Re-read a finished run, verify its digests and print the outcomes.
    Report {
        /// Output directory of the run.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: Format,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to the available cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Restrict the run to these check ids (repeatable).
    #[arg(long = "check")]
    checks: Vec<String>,
    #[arg(long, default_value = "csv")]
    format: Format,
}

fn load(args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn execute(args: RunArgs, sweep: bool) -> anyhow::Result<bool> {
    let mut cfg = load(&args)?;
    let mut only = args.checks.clone();
    if sweep {
        if let Some(bad) = only.iter().find(|id| !SWEEP_IDS.contains(&id.as_str())) {
            anyhow::bail!("'{bad}' is not a sweep; expected one of {SWEEP_IDS:?}");
        }
        if only.is_empty() {
            only = SWEEP_IDS.iter().map(|s| s.to_string()).collect();
        }
        cfg.checks.penalty = only.iter().any(|s| s == "penalty");
        cfg.checks.domain = only.iter().any(|s| s == "domain");
        cfg.checks.norm_audit = only.iter().any(|s| s == "norm_audit");
        cfg.checks.ladder = only.iter().any(|s| s == "ladder");
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().context("building the worker pool")?;
    let out = pool.install(|| run_experiment(&cfg, &only))?;
    print!("{}", String::from_utf8_lossy(&report::render(&out.outcomes, args.format)));
    let failed = out.outcomes.iter().filter(|o| o.status != Status::Pass).count();
    eprintln!(
        "{}: {} outcomes, {failed} not passing; manifest at {}",
        cfg.name,
        out.outcomes.len(),
        out.dir.join(MANIFEST_FILE).display()
    );
    Ok(failed == 0 && out.manifest.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { config } => ExperimentConfig::load(&config)
            .map_err(anyhow::Error::from)
            .and_then(|c| {
                c.validate()?;
                println!("{}: ok ({} checks enabled)", c.name, c.checks.enabled().len());
                Ok(true)
            }),
        Command::Run(args) => execute(args, false),
        Command::Sweep(args) => execute(args, true),
        Command::Report { out, format } => (|| {
            let manifest = report::load_manifest(&out)?;
            let outcomes = report::collect(&out, &manifest)?;
            print!("{}", String::from_utf8_lossy(&report::render(&outcomes, format)));
            Ok(outcomes.iter().all(|o| o.status == Status::Pass))
        })(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
